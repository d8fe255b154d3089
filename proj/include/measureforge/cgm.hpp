#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>

#include "measureforge/restricted.hpp"

namespace measureforge {

struct SolverConfig {
  double eta = 0.0;                 // stopping threshold on ||grad L|| (cgm) / violation (em)
  int max_iterations = 50;
  Grid grid;
  double lmo_epsilon = 0.0;         // reported scan accuracy; the grid scan itself is exact
  double inner_tol = 1e-10;
  // Warm-started re-solves on clustered supports converge linearly but can
  // need ~1e5 iterations; the driver default is sized so the flagship
  // instances complete rather than surface an inner-solver failure.
  long inner_max_iterations = 1000000;
  double kkt_tol = 1e-6;
  std::optional<double> gap_tolerance;  // optional stop on the conditional-gradient gap
  std::uint64_t seed = 0;           // provenance tag copied into trace metadata
};

struct LmoResult {
  double t = 0.0;        // chosen grid point (smallest t within the tie window)
  double value = 0.0;    // scan value at t
  double extremal = 0.0; // true extremal scan value over the whole grid
  std::size_t index = 0;
};

// Atom columns over a fixed grid.  All scans and matvecs go through the same
// per-column kernels so repeated runs and both solver drivers agree bitwise.
class GridAtoms {
 public:
  GridAtoms(const AtomDictionary& dict, const Grid& grid) : grid_(grid) {
    validate_grid(dict, grid);
    M_.resize(dict.output_dim(), static_cast<Eigen::Index>(grid.points.size()));
    for (std::size_t j = 0; j < grid.points.size(); ++j) {
      M_.col(static_cast<Eigen::Index>(j)) = dict.eval(grid.points[j]);
    }
  }

  // argmin over the grid of Re<Phi(t), g>; ties within 1e-12 * (1 + |min|)
  // resolve to the smallest t.
  LmoResult lmo_min(const CVec& g) const {
    const Eigen::Index n = M_.cols();
    double vmin = std::numeric_limits<double>::infinity();
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = M_.col(j).dot(g).real();
      vals[static_cast<std::size_t>(j)] = v;
      if (v < vmin) vmin = v;
    }
    const double window = 1e-12 * (1.0 + std::abs(vmin));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (vals[static_cast<std::size_t>(j)] <= vmin + window) {
        return LmoResult{grid_.points[static_cast<std::size_t>(j)],
                         vals[static_cast<std::size_t>(j)], vmin,
                         static_cast<std::size_t>(j)};
      }
    }
    throw std::logic_error("lmo_min: empty grid");
  }

  // argmax of Re<lambda, Phi(t)> as the mirrored min scan; shares its
  // tie-break exactly.
  LmoResult lmo_max(const CVec& lambda) const {
    LmoResult r = lmo_min(-lambda);
    return LmoResult{r.t, -r.value, -r.extremal, r.index};
  }

  const Eigen::MatrixXcd& matrix() const { return M_; }
  const Grid& grid() const { return grid_; }

 private:
  Eigen::MatrixXcd M_;
  Grid grid_;
};

inline LmoResult lmo_min(const AtomDictionary& dict, const Grid& grid, const CVec& g) {
  return GridAtoms(dict, grid).lmo_min(g);
}

inline LmoResult lmo_max(const AtomDictionary& dict, const Grid& grid, const CVec& lambda) {
  return GridAtoms(dict, grid).lmo_max(lambda);
}

enum class Termination { tolerance_met, max_iterations, stalled };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::tolerance_met: return "tolerance-met";
    case Termination::max_iterations: return "max-iterations";
    case Termination::stalled: return "stalled";
  }
  return "?";
}

struct IterationRecord {
  int iteration = 0;
  double t_added = std::numeric_limits<double>::quiet_NaN();
  SupportSet support;
  DiscreteMeasure measure;
  double primal_value = 0.0;
  CVec fitted;
  double gradient_norm = 0.0;
  CVec lambda;
  double lambda_norm = 0.0;
  double alpha = 0.0;
  double dual_value = 0.0;
  double violation = 0.0;  // gauge(lambda) over the grid minus alpha
  double wall_seconds = 0.0;
};

struct TraceMetadata {
  std::string algorithm;
  std::string dictionary;
  int m = 0;
  double radius = 0.0;
  double gamma = 0.0;
  int grid_size = 0;
  double grid_spacing = 0.0;
  double grid_lo = 0.0;
  double grid_hi = 0.0;
  double eta = 0.0;
  double lmo_epsilon = 0.0;
  double tv_bound = 1.0;
  double inner_tol = 0.0;
  std::uint64_t seed = 0;

  // Everything that must coincide for two traces to describe the same run
  // modulo the algorithm choice.
  std::string fingerprint() const {
    return dictionary + ";m=" + std::to_string(m) + ";grid=" + std::to_string(grid_size) +
           ";lo=" + detail::fmt_g(grid_lo) + ";hi=" + detail::fmt_g(grid_hi) +
           ";eta=" + detail::fmt_g(eta) + ";eps=" + detail::fmt_g(lmo_epsilon) +
           ";tv=" + detail::fmt_g(tv_bound) + ";itol=" + detail::fmt_g(inner_tol) +
           ";seed=" + std::to_string(seed);
  }
};

struct RunTrace {
  std::vector<IterationRecord> records;
  DiscreteMeasure final_measure;
  Termination termination = Termination::max_iterations;
  TraceMetadata metadata;
};

namespace detail {

inline DiscreteMeasure measure_from(const SupportSet& T, const std::vector<double>& w) {
  std::vector<Atom> atoms;
  atoms.reserve(T.size());
  for (std::size_t i = 0; i < T.size(); ++i) atoms.push_back({T.locations()[i], w[i]});
  return DiscreteMeasure(std::move(atoms));
}

// One restricted solve plus everything derived from it: the recovered dual
// point and the grid scan that doubles as the next atom proposal.
struct EngineStep {
  RestrictedSolution sol;
  DualPoint dual;
  LmoResult next;     // argmax of Re<lambda, Phi(t)> over the grid
  double violation = 0.0;
};

class IterationEngine {
 public:
  IterationEngine(const ProblemInstance& problem, const SolverConfig& config)
      : problem_(problem), config_(config), scan_(problem.dict, config.grid) {
    problem.validate();
    A_.resize(problem.dict.output_dim(), 0);
  }

  const SupportSet& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  const GridAtoms& scan() const { return scan_; }

  EngineStep solve_current() {
    RestrictedSolveOptions opts;
    opts.tol = config_.inner_tol;
    opts.max_iterations = config_.inner_max_iterations;
    opts.warm_start = support_.empty() ? nullptr : &weights_;
    EngineStep s;
    s.sol = solve_restricted_primal(A_, problem_.y, problem_.loss, problem_.tv_bound, opts);
    if (s.sol.converged) {
      weights_ = s.sol.weights;
      s.dual = recover_dual(s.sol, A_, problem_.y, problem_.loss, problem_.tv_bound,
                            config_.kkt_tol);
      s.next = scan_.lmo_max(s.dual.lambda);
      s.violation = s.next.extremal - s.dual.alpha;
    }
    return s;
  }

  // Insert an atom into the support (no-op when already present) and keep the
  // warm start aligned by seeding the new coordinate at zero.
  void grow(double t) {
    auto [idx, fresh] = support_.insert(t);
    if (!fresh) return;
    weights_.insert(weights_.begin() + static_cast<std::ptrdiff_t>(idx), 0.0);
    Eigen::MatrixXcd B(A_.rows(), A_.cols() + 1);
    const auto i = static_cast<Eigen::Index>(idx);
    if (i > 0) B.leftCols(i) = A_.leftCols(i);
    B.col(i) = problem_.dict.eval(t);
    if (i < A_.cols()) B.rightCols(A_.cols() - i) = A_.rightCols(A_.cols() - i);
    A_ = std::move(B);
  }

 private:
  const ProblemInstance& problem_;
  const SolverConfig& config_;
  GridAtoms scan_;
  SupportSet support_;
  std::vector<double> weights_;
  Eigen::MatrixXcd A_;
};

inline TraceMetadata make_metadata(const char* algorithm, const ProblemInstance& problem,
                                   const SolverConfig& config) {
  TraceMetadata md;
  md.algorithm = algorithm;
  md.dictionary = problem.dict.description();
  md.m = problem.dict.output_dim();
  md.radius = dict_radius(problem.dict, config.grid);
  md.gamma = problem.loss.gamma();
  md.grid_size = static_cast<int>(config.grid.size());
  md.grid_spacing = config.grid.nominal_spacing;
  md.grid_lo = config.grid.points.front();
  md.grid_hi = config.grid.points.back();
  md.eta = config.eta;
  md.lmo_epsilon = config.lmo_epsilon;
  md.tv_bound = problem.tv_bound;
  md.inner_tol = config.inner_tol;
  md.seed = config.seed;
  return md;
}

inline IterationRecord make_record(int l, double t_added, const SupportSet& T,
                                   DiscreteMeasure measure, const EngineStep& s,
                                   double wall_seconds) {
  IterationRecord rec;
  rec.iteration = l;
  rec.t_added = t_added;
  rec.support = T;
  rec.measure = std::move(measure);
  rec.primal_value = s.sol.value;
  rec.fitted = s.sol.fitted;
  rec.gradient_norm = s.dual.lambda.norm();  // lambda is -grad L at the fit
  rec.lambda = s.dual.lambda;
  rec.lambda_norm = s.dual.lambda.norm();
  rec.alpha = s.dual.alpha;
  rec.dual_value = s.dual.value;
  rec.violation = s.violation;
  rec.wall_seconds = wall_seconds;
  return rec;
}

[[noreturn]] inline void throw_unconverged(const char* algorithm, int l, const EngineStep& s,
                                           std::size_t support_size) {
  throw std::runtime_error(std::string(algorithm) + ": restricted solve did not converge at iteration " +
                           std::to_string(l) + " (support size " + std::to_string(support_size) +
                           ", inner iterations " + std::to_string(s.sol.inner_iterations) + ")");
}

}  // namespace detail

// Fully corrective conditional-gradient loop: propose the steepest atom over
// the grid, then re-optimize the weights over everything proposed so far.
// Record 0 is the state before any atom is added (value of the zero measure).
inline RunTrace cgm_run(const ProblemInstance& problem, const SolverConfig& config) {
  if (config.max_iterations < 0) throw std::invalid_argument("cgm_run: negative iteration budget");
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  detail::IterationEngine engine(problem, config);
  RunTrace trace;
  trace.metadata = detail::make_metadata("cgm", problem, config);
  trace.termination = Termination::max_iterations;

  detail::EngineStep step = engine.solve_current();
  if (!step.sol.converged) detail::throw_unconverged("cgm", 0, step, 0);
  trace.records.push_back(detail::make_record(
      0, std::numeric_limits<double>::quiet_NaN(), engine.support(),
      detail::measure_from(engine.support(), step.sol.weights), step, elapsed()));

  for (int l = 1; l <= config.max_iterations; ++l) {
    if (trace.records.back().gradient_norm <= config.eta) {
      trace.termination = Termination::tolerance_met;
      break;
    }
    if (config.gap_tolerance) {
      // <x, grad L> minus the best single-atom value, the standard gap bound.
      const double emin = -step.next.extremal;
      const double gap = -re_inner(step.sol.fitted, step.dual.lambda) -
                         std::min(0.0, problem.tv_bound * emin);
      if (gap <= *config.gap_tolerance) {
        trace.termination = Termination::tolerance_met;
        break;
      }
    }
    const double t_new = step.next.t;
    const bool already = engine.support().contains(t_new);
    const double prev_value = step.sol.value;
    engine.grow(t_new);
    step = engine.solve_current();
    if (!step.sol.converged) detail::throw_unconverged("cgm", l, step, engine.support().size());
    trace.records.push_back(detail::make_record(
        l, t_new, engine.support(),
        detail::measure_from(engine.support(), step.sol.weights), step, elapsed()));
    if (already && prev_value - step.sol.value <= 1e-12) {
      trace.termination = Termination::stalled;
      break;
    }
  }

  trace.final_measure = trace.records.back().measure;
  return trace;
}

}  // namespace measureforge

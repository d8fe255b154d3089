// Acceptance runner: end-to-end checks of the solver stack on the flagship
// super-resolution instance plus randomized small instances.  Each criterion
// prints one PASS/FAIL line; its wall-clock budget is part of the criterion.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "measureforge/measureforge.hpp"
#include "properties.hpp"

using namespace measureforge;
using mfprop::PropResult;
using Clock = std::chrono::steady_clock;

namespace {

struct CriterionResult {
  bool ok = true;
  std::vector<std::string> details;

  void note(const std::string& line) { details.push_back(line); }
  void require(bool cond, const std::string& line) {
    if (!cond) {
      ok = false;
      details.push_back("FAILED: " + line);
    }
  }
};

// Traces accumulated across criteria; the property suite replays structural
// invariants over every single one of them.
struct RecordedTrace {
  ProblemInstance problem;
  RunTrace trace;
};

std::vector<RecordedTrace> g_registry;

void remember(const ProblemInstance& problem, const RunTrace& trace) {
  g_registry.push_back({problem, trace});
}

std::string fmt(double v) { return detail::fmt_g(v); }

// Shared state: the flagship instance and the artifacts criteria 2-4 reuse.
struct Shared {
  ProblemInstance problem;        // m=33 trigonometric dictionary, four spikes
  DiscreteMeasure truth;
  Grid grid;                      // 1000 uniform points
  std::vector<BoundCertificate> certificates;
  bool have_certificates = false;
};

Shared g;

void criterion_equivalence(CriterionResult& res) {
  SolverConfig sc;
  sc.grid = g.grid;
  sc.max_iterations = 30;
  const RunTrace cg = cgm_run(g.problem, sc);
  SolverConfig se = sc;
  se.max_iterations = sc.max_iterations + 1;
  const RunTrace em = em_run(g.problem, se);
  remember(g.problem, cg);
  remember(g.problem, em);

  const EquivalenceReport rep = equivalence_check(cg, em, 1e-8);
  res.require(rep.supports_match && rep.max_support_discrepancy == 0.0,
              "supports differ between the two drivers");
  res.require(rep.compared_supports > 0 && rep.compared_values > 0,
              "nothing to compare between the traces");
  res.require(rep.max_value_discrepancy <= rep.value_tol,
              "value identity violated: worst " + fmt(rep.max_value_discrepancy));
  res.note("supports compared " + std::to_string(rep.compared_supports) +
           " (exact match), values compared " + std::to_string(rep.compared_values) +
           ", worst relative difference " + fmt(rep.max_value_discrepancy));
  res.note("terminations: growth " + std::string(termination_name(cg.termination)) +
           " after " + std::to_string(cg.records.size() - 1) + " iterations, exchange " +
           termination_name(em.termination));
}

void criterion_primal_decay(CriterionResult& res) {
  SolverConfig sc;
  sc.grid = g.grid;
  sc.max_iterations = 50;
  const RunTrace cg = cgm_run(g.problem, sc);
  SolverConfig se = sc;
  se.max_iterations = sc.max_iterations + 1;
  const RunTrace em = em_run(g.problem, se);
  remember(g.problem, cg);
  remember(g.problem, em);

  const ReferenceResult ref = compute_reference_optima(g.problem, sc, 500, 10);
  remember(g.problem, ref.cgm);
  remember(g.problem, ref.em);
  res.require(ref.optima.converged, "reference run hit its iteration budget");
  res.note("reference budget " + std::to_string(ref.optima.iterations) + ", v_primal " +
           fmt(ref.optima.v_primal) + ", v_dual " + fmt(ref.optima.v_dual));

  g.certificates = certify_bounds(cg, em, ref.optima);
  g.have_certificates = true;

  res.require(cg.metadata.gamma == 1.0, "curvature constant is not 1");
  res.require(std::abs(cg.metadata.radius * cg.metadata.radius - 33.0) < 1e-9,
              "squared dictionary radius is not 33");
  res.require(cg.metadata.lmo_epsilon == 0.0, "oracle accuracy parameter is not 0");

  long checked = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  for (const BoundCertificate& c : g.certificates) {
    if (c.kind != BoundKind::primal_rate || c.iteration < 1 || c.iteration > 50) continue;
    ++checked;
    worst_slack = std::max(worst_slack, c.lhs - c.rhs);
    res.require(c.satisfied, "primal decay bound fails at iteration " +
                                 std::to_string(c.iteration) + ": lhs " + fmt(c.lhs) +
                                 " rhs " + fmt(c.rhs));
  }
  res.require(checked > 0, "no primal decay certificates were produced");
  res.note(std::to_string(checked) + " per-iteration bounds checked (run " +
           termination_name(cg.termination) + " after " +
           std::to_string(cg.records.size() - 1) + " iterations), tightest margin " +
           fmt(-worst_slack));
}

void criterion_dual_decay(CriterionResult& res) {
  res.require(g.have_certificates, "certificates were not produced by the previous criterion");
  if (!g.have_certificates) return;
  struct Family {
    BoundKind kind;
    const char* label;
  };
  const Family families[] = {{BoundKind::dual_rate, "dual value"},
                             {BoundKind::lambda_rate, "dual iterate"},
                             {BoundKind::alpha_rate, "threshold iterate"},
                             {BoundKind::feasibility, "feasibility decay"}};
  for (const Family& fam : families) {
    long checked = 0;
    double worst_slack = -std::numeric_limits<double>::infinity();
    for (const BoundCertificate& c : g.certificates) {
      if (c.kind != fam.kind || c.iteration < 1 || c.iteration > 50) continue;
      ++checked;
      worst_slack = std::max(worst_slack, c.lhs - c.rhs);
      res.require(c.satisfied, std::string(fam.label) + " bound fails at iteration " +
                                   std::to_string(c.iteration) + ": lhs " + fmt(c.lhs) +
                                   " rhs " + fmt(c.rhs));
    }
    res.require(checked > 0, std::string("no ") + fam.label + " certificates were produced");
    res.note(std::string(fam.label) + ": " + std::to_string(checked) +
             " bounds, tightest margin " + fmt(-worst_slack));
  }
}

void criterion_strong_duality(CriterionResult& res) {
  res.require(g.have_certificates, "flagship certificates missing");
  for (const BoundCertificate& c : g.certificates) {
    if (c.kind != BoundKind::strong_duality) continue;
    res.require(c.satisfied, "flagship instance: |v_p - v_d| " + fmt(c.lhs) +
                                 " exceeds " + fmt(c.rhs));
    res.note("flagship instance gap " + fmt(c.lhs) + " within " + fmt(c.rhs));
  }

  mfprop::Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const mfprop::SmallInstance inst = mfprop::random_tabulated_instance(rng);
    SolverConfig base;
    base.grid = inst.grid;
    base.max_iterations = 20;
    const ReferenceResult ref = compute_reference_optima(inst.problem, base, 200, 10);
    remember(inst.problem, ref.cgm);
    remember(inst.problem, ref.em);
    const double gap = std::abs(ref.optima.v_primal - ref.optima.v_dual);
    const double tol = 1e-6 * (1.0 + std::abs(ref.optima.v_primal));
    worst = std::max(worst, gap / tol);
    res.require(ref.optima.converged,
                "random instance " + std::to_string(i) + ": reference hit its budget");
    res.require(gap <= tol, "random instance " + std::to_string(i) + ": gap " + fmt(gap) +
                                " exceeds " + fmt(tol));
  }
  res.note("20 random instances, worst gap at " + fmt(worst) + " of tolerance");
}

void criterion_dual_recovery(CriterionResult& res) {
  mfprop::Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const mfprop::SmallInstance inst = mfprop::random_tabulated_instance(rng);
    SolverConfig sc;
    sc.grid = inst.grid;
    sc.max_iterations = 15;
    const RunTrace cg = cgm_run(inst.problem, sc);
    remember(inst.problem, cg);
    const SupportSet& T = cg.records.back().support;
    res.require(!T.empty(), "random instance " + std::to_string(i) + ": empty support");
    if (T.empty()) continue;

    RestrictedSolveOptions opts;
    opts.tol = 1e-12;
    opts.max_iterations = 1000000;
    const Eigen::MatrixXcd A = detail::support_matrix(inst.problem.dict, T);
    const RestrictedSolution sol =
        solve_restricted_primal(A, inst.problem.y, inst.problem.loss, inst.problem.tv_bound, opts);
    const DualPoint fast = recover_dual(sol, A, inst.problem.y, inst.problem.loss,
                                        inst.problem.tv_bound);
    const DualPoint slow = solve_restricted_dual_oracle(inst.problem.dict, T, inst.problem.y,
                                                        inst.problem.loss, inst.problem.tv_bound);
    const double diff = std::abs(fast.value - slow.value);
    const double tol = 1e-4 * (1.0 + std::abs(fast.value));
    worst = std::max(worst, diff / tol);
    res.require(diff <= tol, "random instance " + std::to_string(i) + ": recovered value " +
                                 fmt(fast.value) + " vs oracle " + fmt(slow.value));
  }
  res.note("20 random instances, worst oracle disagreement at " + fmt(worst) + " of tolerance");
}

void criterion_grid_sweep(CriterionResult& res) {
  const int grids[] = {100, 1000, 10000};

  std::vector<double> clean_errors;
  for (int n : grids) {
    SolverConfig sc;
    sc.grid = Grid::uniform_for(g.problem.dict, n);
    sc.max_iterations = 50;
    const RunTrace cg = cgm_run(g.problem, sc);
    SolverConfig se = sc;
    se.max_iterations = sc.max_iterations + 1;
    const RunTrace em = em_run(g.problem, se);
    remember(g.problem, cg);
    remember(g.problem, em);
    const EquivalenceReport rep = equivalence_check(cg, em, 1e-8);
    res.require(rep.matched, "noise-free grid " + std::to_string(n) + ": drivers disagree");
    clean_errors.push_back(wasserstein1(cg.final_measure, g.truth, g.problem.dict.domain()));
  }
  res.note("noise-free transport errors: " + fmt(clean_errors[0]) + " / " +
           fmt(clean_errors[1]) + " / " + fmt(clean_errors[2]));
  res.require(clean_errors[0] >= clean_errors[1] && clean_errors[1] >= clean_errors[2],
              "noise-free error is not weakly decreasing in grid size");

  ExperimentConfig noisy_cfg;
  noisy_cfg.noise.kind = NoiseSpec::Kind::gaussian;
  noisy_cfg.noise.variance = 0.01;
  noisy_cfg.noise.seed = 0;
  auto [noisy_problem, noisy_gt] = gen_superres_instance(noisy_cfg);

  std::vector<double> noisy_errors;
  for (int n : grids) {
    SolverConfig sc;
    sc.grid = Grid::uniform_for(noisy_problem.dict, n);
    sc.max_iterations = 50;
    const RunTrace cg = cgm_run(noisy_problem, sc);
    SolverConfig se = sc;
    se.max_iterations = sc.max_iterations + 1;
    const RunTrace em = em_run(noisy_problem, se);
    remember(noisy_problem, cg);
    remember(noisy_problem, em);
    const EquivalenceReport rep = equivalence_check(cg, em, 1e-8);
    res.require(rep.matched, "noisy grid " + std::to_string(n) + ": drivers disagree");
    noisy_errors.push_back(
        wasserstein1(cg.final_measure, noisy_gt.measure, noisy_problem.dict.domain()));
  }
  const double lo = *std::min_element(noisy_errors.begin(), noisy_errors.end());
  const double hi = *std::max_element(noisy_errors.begin(), noisy_errors.end());
  res.note("noisy transport errors: " + fmt(noisy_errors[0]) + " / " + fmt(noisy_errors[1]) +
           " / " + fmt(noisy_errors[2]) + " (spread " + fmt(hi / lo) + "x)");
  res.require(hi <= 2.0 * lo, "noisy errors spread beyond a 2x band");
}

void criterion_property_suites(CriterionResult& res) {
  struct Suite {
    const char* label;
    PropResult result;
  };
  const Suite suites[] = {
      {"projection vs enumeration oracle", mfprop::prop_projection_oracle(1000)},
      {"conjugate pairing inequality", mfprop::prop_fenchel_young(100)},
      {"curvature sandwich", mfprop::prop_curvature_sandwich(100)},
      {"transport metric axioms", mfprop::prop_wasserstein_axioms(100)},
      {"independence of atom samples", mfprop::prop_chebyshev(50)},
      {"gradients vs finite differences", mfprop::prop_gradient_fd(30)},
  };
  for (const Suite& s : suites) {
    res.require(s.result.ok, std::string(s.label) + ": " + s.result.detail);
    res.note(std::string(s.label) + ": " + std::to_string(s.result.cases) + " cases");
  }

  long records = 0;
  for (const RecordedTrace& rt : g_registry) {
    const PropResult pr = mfprop::prop_trace_invariants(rt.trace, rt.problem);
    records += pr.cases;
    res.require(pr.ok, "trace invariants (" + rt.trace.metadata.algorithm + ", grid " +
                           std::to_string(rt.trace.metadata.grid_size) + "): " + pr.detail);
    if (!pr.ok) break;
  }
  res.note("trace invariants over " + std::to_string(g_registry.size()) + " recorded runs (" +
           std::to_string(records) + " iteration records)");
}

struct Criterion {
  const char* label;
  double budget_seconds;
  std::function<void(CriterionResult&)> body;
};

}  // namespace

int main() {
  ExperimentConfig cfg;  // four quarter-weight spikes, m=33, noise-free
  auto [problem, gt] = gen_superres_instance(cfg);
  g.problem = problem;
  g.truth = gt.measure;
  g.grid = Grid::uniform_for(problem.dict, 1000);

  const Criterion criteria[] = {
      {"solver equivalence (growth vs exchange)", 10.0, criterion_equivalence},
      {"primal value decay certificates", 30.0, criterion_primal_decay},
      {"dual value and iterate decay certificates", 30.0, criterion_dual_decay},
      {"strong duality", 10.0, criterion_strong_duality},
      {"dual recovery vs subgradient oracle", 20.0, criterion_dual_recovery},
      {"grid sweep recovery quality", 120.0, criterion_grid_sweep},
      {"property suites", 30.0, criterion_property_suites},
  };

  int failures = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    CriterionResult res;
    const auto t0 = Clock::now();
    try {
      c.body(res);
    } catch (const std::exception& e) {
      res.ok = false;
      res.note(std::string("FAILED: unhandled error: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_budget = elapsed <= c.budget_seconds;
    const bool pass = res.ok && in_budget;
    if (!pass) ++failures;
    std::printf("[%s] criterion %d/7: %s (%.2fs, budget %.0fs)\n", pass ? "PASS" : "FAIL", index,
                c.label, elapsed, c.budget_seconds);
    if (!in_budget) std::printf("    FAILED: wall time exceeds the budget\n");
    for (const std::string& line : res.details) std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
  }

  std::printf("%d/7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}

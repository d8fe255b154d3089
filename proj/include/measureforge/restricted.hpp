#pragma once

#include "measureforge/dictionary.hpp"

namespace measureforge {

// Finite candidate support, strictly increasing locations.
class SupportSet {
 public:
  SupportSet() = default;

  explicit SupportSet(std::vector<double> locations) {
    for (double t : locations) insert(t);
  }

  // Returns the index of t and whether it was newly inserted.
  std::pair<std::size_t, bool> insert(double t) {
    if (!std::isfinite(t)) throw std::invalid_argument("SupportSet: non-finite location");
    auto it = std::lower_bound(locations_.begin(), locations_.end(), t);
    if (it != locations_.end() && *it == t) {
      return {static_cast<std::size_t>(it - locations_.begin()), false};
    }
    const auto idx = static_cast<std::size_t>(it - locations_.begin());
    locations_.insert(it, t);
    return {idx, true};
  }

  bool contains(double t) const {
    auto it = std::lower_bound(locations_.begin(), locations_.end(), t);
    return it != locations_.end() && *it == t;
  }

  const std::vector<double>& locations() const { return locations_; }
  std::size_t size() const { return locations_.size(); }
  bool empty() const { return locations_.empty(); }

  bool operator==(const SupportSet& o) const { return locations_ == o.locations_; }

  // True when every location of `o` also appears here.
  bool contains_all(const SupportSet& o) const {
    return std::includes(locations_.begin(), locations_.end(),
                         o.locations_.begin(), o.locations_.end());
  }

 private:
  std::vector<double> locations_;
};

// Euclidean projection onto { w >= 0, sum w <= bound }.  Exact finite
// algorithm: clamp if the positive part already fits, otherwise project onto
// the simplex face sum w = bound via the sorted-threshold rule.
inline Eigen::VectorXd project_capped_simplex(Eigen::VectorXd a, double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("project_capped_simplex: bound must be positive");
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw std::invalid_argument("project_capped_simplex: non-finite entry");
  }
  Eigen::VectorXd p = a.cwiseMax(0.0);
  if (p.sum() <= bound) return p;
  std::vector<double> u(a.data(), a.data() + a.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double csum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    csum += u[k];
    const double cand = (csum - bound) / static_cast<double>(k + 1);
    if (u[k] - cand > 0.0) theta = cand;
    else break;
  }
  return (a.array() - theta).cwiseMax(0.0).matrix();
}

inline std::vector<double> project_capped_simplex(const std::vector<double>& a, double bound) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  Eigen::VectorXd p = project_capped_simplex(std::move(v), bound);
  return std::vector<double>(p.data(), p.data() + p.size());
}

struct RestrictedSolution {
  std::vector<double> weights;  // aligned with the support, each >= 0, sum <= bound
  double value = 0.0;
  CVec fitted;                  // synthesized observation at the weights
  bool converged = false;
  long inner_iterations = 0;
};

struct RestrictedSolveOptions {
  double tol = 1e-10;               // on the projected-gradient mapping norm
  long max_iterations = 10000;
  const std::vector<double>* warm_start = nullptr;  // size must match support
};

namespace detail {

// Columns Phi(t) for t in the support.  Shared accumulation kernel so every
// caller sees bit-identical matvecs.
inline Eigen::MatrixXcd support_matrix(const AtomDictionary& dict, const SupportSet& T) {
  Eigen::MatrixXcd A(dict.output_dim(), static_cast<Eigen::Index>(T.size()));
  for (std::size_t i = 0; i < T.size(); ++i) {
    A.col(static_cast<Eigen::Index>(i)) = dict.eval(T.locations()[i]);
  }
  return A;
}

inline CVec combine_columns(const Eigen::MatrixXcd& A, const Eigen::VectorXd& w) {
  CVec out = CVec::Zero(A.rows());
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    if (w[j] != 0.0) out += w[j] * A.col(j);
  }
  return out;
}

// Re(A^H z) entrywise: the real pairing of each column against z.
inline Eigen::VectorXd apply_adjoint_re(const Eigen::MatrixXcd& A, const CVec& z) {
  Eigen::VectorXd out(A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) out[j] = A.col(j).dot(z).real();
  return out;
}

// Upper estimate of the largest eigenvalue of Re(A^H A) by power iteration
// (64 rounds, deterministic start) with a 5% guard band.
inline double gram_spectral_bound(const Eigen::MatrixXcd& A) {
  const Eigen::Index k = A.cols();
  if (k == 0) return 0.0;
  if (k == 1) return A.col(0).squaredNorm();
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double rq = 0.0;
  for (int it = 0; it < 64; ++it) {
    Eigen::VectorXd gv = apply_adjoint_re(A, combine_columns(A, v));
    const double n = gv.norm();
    if (n == 0.0) return 0.0;
    rq = v.dot(gv);
    v = gv / n;
  }
  return std::max(rq, 0.0) * 1.05;
}

}  // namespace detail

// min L(A w - y) over { w >= 0, sum w <= bound } for the atoms in T.
// Accelerated projected gradient with momentum restart; always returns the
// best objective seen, so a warm start can only improve.
inline RestrictedSolution solve_restricted_primal(const Eigen::MatrixXcd& A, const CVec& y,
                                                  const LossModel& loss, double tv_bound,
                                                  const RestrictedSolveOptions& opts = {}) {
  if (!(tv_bound > 0.0)) throw std::invalid_argument("solve_restricted_primal: bound must be positive");
  const Eigen::Index k = A.cols();
  RestrictedSolution out;
  if (k == 0) {
    out.fitted = CVec::Zero(y.size());
    out.value = loss.value(-y);
    out.converged = true;
    return out;
  }

  Eigen::VectorXd w0 = Eigen::VectorXd::Zero(k);
  if (opts.warm_start) {
    if (static_cast<Eigen::Index>(opts.warm_start->size()) != k) {
      throw std::invalid_argument("solve_restricted_primal: warm start size mismatch");
    }
    w0 = Eigen::Map<const Eigen::VectorXd>(opts.warm_start->data(), k);
    w0 = project_capped_simplex(std::move(w0), tv_bound);
  }

  const double lip = loss.smoothness() * detail::gram_spectral_bound(A);
  const double step = lip > 0.0 ? 1.0 / lip : 1.0;

  auto objective = [&](const Eigen::VectorXd& w) { return loss.value(detail::combine_columns(A, w) - y); };
  auto grad = [&](const Eigen::VectorXd& w) {
    return detail::apply_adjoint_re(A, loss.gradient(detail::combine_columns(A, w) - y));
  };

  Eigen::VectorXd a = w0;
  double f_a = objective(a);
  Eigen::VectorXd v = a;
  double theta = 1.0;
  Eigen::VectorXd best = a;
  double f_best = f_a;
  bool converged = false;
  long it = 0;

  for (it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd a_next = project_capped_simplex(v - step * grad(v), tv_bound);
    const Eigen::VectorXd g_next = grad(a_next);
    const double f_next = objective(a_next);
    if (f_next < f_best) {
      f_best = f_next;
      best = a_next;
    }
    const double gm = (a_next - project_capped_simplex(a_next - step * g_next, tv_bound)).norm() / step;
    if (gm <= opts.tol) {
      best = a_next;
      f_best = std::min(f_best, f_next);
      converged = true;
      break;
    }
    // Restart (keep the point, drop the momentum) when the extrapolation
    // points against the step just taken or the objective rises beyond
    // roundoff.  An exact descent test would trip on objective noise near
    // the floor and silently lose the accelerated rate.
    const bool overshoot = (v - a_next).dot(a_next - a) > 0.0 ||
                           f_next > f_a + 1e-10 * (1.0 + std::abs(f_a));
    if (overshoot) {
      v = a_next;
      theta = 1.0;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      v = a_next + ((theta - 1.0) / theta_next) * (a_next - a);
      theta = theta_next;
    }
    a = a_next;
    f_a = f_next;
  }

  out.weights.assign(best.data(), best.data() + best.size());
  for (double& w : out.weights) {
    if (w < 0.0) w = (w >= -1e-12) ? 0.0 : throw std::logic_error("negative weight from projection");
  }
  out.fitted = detail::combine_columns(A, Eigen::Map<const Eigen::VectorXd>(out.weights.data(), k));
  out.value = loss.value(out.fitted - y);
  out.converged = converged;
  out.inner_iterations = std::min(it, opts.max_iterations);
  return out;
}

inline RestrictedSolution solve_restricted_primal(const AtomDictionary& dict, const SupportSet& T,
                                                  const CVec& y, const LossModel& loss,
                                                  double tv_bound = 1.0,
                                                  const RestrictedSolveOptions& opts = {}) {
  return solve_restricted_primal(detail::support_matrix(dict, T), y, loss, tv_bound, opts);
}

struct DualPoint {
  CVec lambda;
  double alpha = 0.0;
  double value = 0.0;
};

// Dual point read off the fitted residual: lambda = -grad L(fitted - y),
// alpha = positive part of the largest pairing over the support.  Requires a
// converged primal solution; checks the stationarity identity
// Re<fitted, lambda> = bound * alpha whenever the cap is active (alpha > 0).
inline DualPoint recover_dual(const RestrictedSolution& sol, const Eigen::MatrixXcd& A,
                              const CVec& y, const LossModel& loss, double tv_bound = 1.0,
                              double kkt_tol = 1e-6) {
  if (!sol.converged) {
    throw std::runtime_error("recover_dual: refusing an unconverged restricted solution");
  }
  DualPoint d;
  d.lambda = -loss.gradient(sol.fitted - y);
  double top = 0.0;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    top = std::max(top, A.col(j).dot(d.lambda).real());
  }
  d.alpha = std::max(0.0, top);
  d.value = re_inner(d.lambda, y) - loss.conjugate(-d.lambda) - tv_bound * d.alpha;
  if (d.alpha > kkt_tol) {
    const double resid = std::abs(re_inner(sol.fitted, d.lambda) - tv_bound * d.alpha);
    if (resid > kkt_tol) {
      throw std::runtime_error("recover_dual: stationarity residual " + detail::fmt_g(resid) +
                               " exceeds tolerance; solution is not at its optimum");
    }
  }
  return d;
}

inline DualPoint recover_dual(const RestrictedSolution& sol, const SupportSet& T,
                              const AtomDictionary& dict, const CVec& y, const LossModel& loss,
                              double tv_bound = 1.0, double kkt_tol = 1e-6) {
  return recover_dual(sol, detail::support_matrix(dict, T), y, loss, tv_bound, kkt_tol);
}

struct DualOracleOptions {
  long iterations = 200000;  // fixed budget keeps the oracle deterministic
};

// Independent check on recover_dual: maximize the restricted dual
//   h(lambda) = Re<lambda, y> - L*(-lambda) - bound * max(0, max_T Re<lambda, Phi(t)>)
// by projected supergradient ascent with the 2/(mu (k+1)) schedule for a
// 1/gamma-strongly-concave objective, tracking the best iterate and the
// weighted running average.  Slow by design; never used on the solve path.
inline DualPoint solve_restricted_dual_oracle(const AtomDictionary& dict, const SupportSet& T,
                                              const CVec& y, const LossModel& loss,
                                              double tv_bound = 1.0,
                                              const DualOracleOptions& opts = {}) {
  const Eigen::MatrixXcd A = detail::support_matrix(dict, T);
  const double gamma = loss.gamma();
  double radius_atoms = 0.0;
  for (Eigen::Index j = 0; j < A.cols(); ++j) radius_atoms = std::max(radius_atoms, A.col(j).norm());
  const double ball = gamma * (y.norm() + tv_bound * radius_atoms) + 1.0;

  auto h_value = [&](const CVec& lam) {
    double top = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) top = std::max(top, A.col(j).dot(lam).real());
    return re_inner(lam, y) - loss.conjugate(-lam) - tv_bound * std::max(0.0, top);
  };

  CVec lam = CVec::Zero(y.size());
  CVec avg = CVec::Zero(y.size());
  double avg_wsum = 0.0;
  CVec best = lam;
  double best_val = h_value(lam);
  const double mu = 1.0 / gamma;

  for (long k = 1; k <= opts.iterations; ++k) {
    double top = 0.0;
    Eigen::Index top_j = -1;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      const double p = A.col(j).dot(lam).real();
      if (p > top) {
        top = p;
        top_j = j;
      }
    }
    CVec g = y + loss.conjugate_gradient(-lam);  // d/dlambda of the smooth part
    if (top_j >= 0) g -= tv_bound * A.col(top_j);
    lam += (2.0 / (mu * static_cast<double>(k + 1))) * g;
    const double n = lam.norm();
    if (n > ball) lam *= ball / n;

    const double wk = static_cast<double>(k);
    avg = (avg * avg_wsum + wk * lam) / (avg_wsum + wk);
    avg_wsum += wk;
    const double hv = h_value(lam);
    if (hv > best_val) {
      best_val = hv;
      best = lam;
    }
  }
  const double avg_val = h_value(avg);
  if (avg_val > best_val) {
    best_val = avg_val;
    best = avg;
  }

  DualPoint d;
  d.lambda = best;
  double top = 0.0;
  for (Eigen::Index j = 0; j < A.cols(); ++j) top = std::max(top, A.col(j).dot(best).real());
  d.alpha = std::max(0.0, top);
  d.value = best_val;
  return d;
}

}  // namespace measureforge

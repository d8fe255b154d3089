#pragma once

#include "measureforge/em.hpp"

namespace measureforge {

// L1 distance between the cumulative distribution functions over the domain
// interval.  For equal total masses this is the 1-Wasserstein distance on the
// line; a mass imbalance shows up as a terminal plateau of height
// |mass1 - mass2| that is integrated up to the right endpoint, so it is never
// silently discarded.
inline double wasserstein1(const DiscreteMeasure& x1, const DiscreteMeasure& x2,
                           const ParameterDomain& domain) {
  for (const DiscreteMeasure* x : {&x1, &x2}) {
    for (const Atom& a : x->atoms()) {
      if (!domain.contains(a.location)) {
        throw std::invalid_argument("wasserstein1: atom at " + detail::fmt_g(a.location) +
                                    " outside the common domain");
      }
    }
  }
  const auto& a1 = x1.atoms();
  const auto& a2 = x2.atoms();
  std::size_t i = 0, j = 0;
  double fdiff = 0.0, prev = domain.lo, total = 0.0;
  while (i < a1.size() || j < a2.size()) {
    double t;
    if (j >= a2.size() || (i < a1.size() && a1[i].location <= a2[j].location)) {
      t = a1[i].location;
    } else {
      t = a2[j].location;
    }
    total += std::abs(fdiff) * (t - prev);
    while (i < a1.size() && a1[i].location == t) fdiff += a1[i++].weight;
    while (j < a2.size() && a2[j].location == t) fdiff -= a2[j++].weight;
    prev = t;
  }
  total += std::abs(fdiff) * (domain.hi - prev);
  return total;
}

// max over the grid of Re<lambda, Phi(t)>.
inline double gauge_value(const CVec& lambda, const AtomDictionary& dict, const Grid& grid) {
  return GridAtoms(dict, grid).lmo_max(lambda).extremal;
}

// How far (lambda, alpha) sits outside the dual constraint set, measured on
// the grid; nonpositive means feasible there.
inline double feasibility_violation(const CVec& lambda, double alpha, const AtomDictionary& dict,
                                    const Grid& grid) {
  return gauge_value(lambda, dict, grid) - alpha;
}

enum class BoundKind {
  primal_rate,
  dual_rate,
  lambda_rate,
  alpha_rate,
  feasibility,
  strong_duality,
};

inline const char* bound_kind_name(BoundKind k) {
  switch (k) {
    case BoundKind::primal_rate: return "primal-rate-13";
    case BoundKind::dual_rate: return "dual-rate-14";
    case BoundKind::lambda_rate: return "lambda-rate-15";
    case BoundKind::alpha_rate: return "alpha-rate-16";
    case BoundKind::feasibility: return "feasibility-17";
    case BoundKind::strong_duality: return "strong-duality";
  }
  return "?";
}

struct BoundCertificate {
  BoundKind kind = BoundKind::strong_duality;
  int iteration = -1;  // -1 for certificates that are not per-iteration
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;  // lhs <= rhs + 1e-9
  double gamma = 0.0;
  double radius = 0.0;
  double epsilon = 0.0;
};

inline constexpr double kCertificateSlack = 1e-9;

inline BoundCertificate make_certificate(BoundKind kind, int iteration, double lhs, double rhs,
                                         double gamma, double radius, double epsilon) {
  BoundCertificate c;
  c.kind = kind;
  c.iteration = iteration;
  c.lhs = lhs;
  c.rhs = rhs;
  c.satisfied = lhs <= rhs + kCertificateSlack;
  c.gamma = gamma;
  c.radius = radius;
  c.epsilon = epsilon;
  return c;
}

// Optimal values and dual optimizer taken from a much longer run of both
// drivers; certificates are only meaningful against these.
struct ReferenceOptima {
  double v_primal = 0.0;
  double v_dual = 0.0;
  CVec lambda;
  double alpha = 0.0;
  long iterations = 0;    // budget of the reference run
  bool converged = false; // reference run terminated on its own before the budget
  std::string fingerprint;
};

struct ReferenceResult {
  ReferenceOptima optima;
  RunTrace cgm;
  RunTrace em;
};

// Long reference run of both drivers at a tightened inner tolerance.  The
// budget is max(min_iterations, multiplier * base budget); a run that stops
// on its own (stall or tolerance) counts as converged.
inline ReferenceResult compute_reference_optima(const ProblemInstance& problem,
                                                const SolverConfig& base,
                                                int min_iterations = 500, int multiplier = 20) {
  SolverConfig ref = base;
  ref.max_iterations = std::max(min_iterations, multiplier * base.max_iterations);
  ref.eta = 0.0;
  ref.gap_tolerance.reset();
  ref.inner_tol = std::min(base.inner_tol, 1e-12);
  ref.inner_max_iterations = std::max(base.inner_max_iterations, 100000L);

  ReferenceResult out;
  out.cgm = cgm_run(problem, ref);
  SolverConfig ref_em = ref;
  ref_em.max_iterations = ref.max_iterations + 1;
  out.em = em_run(problem, ref_em);

  out.optima.v_primal = out.cgm.records.back().primal_value;
  out.optima.v_dual = out.em.records.back().dual_value;
  out.optima.lambda = out.em.records.back().lambda;
  out.optima.alpha = out.em.records.back().alpha;
  out.optima.iterations = ref.max_iterations;
  out.optima.converged = out.cgm.termination != Termination::max_iterations &&
                         out.em.termination != Termination::max_iterations;
  // The fingerprint pins the setup the reference certifies: the deep run
  // intentionally deviates in eta and inner tolerance, so those two fields
  // are restored to the base configuration before stamping.
  TraceMetadata setup = out.cgm.metadata;
  setup.eta = base.eta;
  setup.inner_tol = base.inner_tol;
  out.optima.fingerprint = setup.fingerprint();
  return out;
}

// Per-iteration decay certificates for both traces against the reference
// optima, plus one strong-duality certificate for the reference pair itself.
// Refuses to certify when the reference is absent, belongs to a different
// setup, or is not clearly more converged than the traces.
inline std::vector<BoundCertificate> certify_bounds(const RunTrace& cgm_trace,
                                                    const RunTrace& em_trace,
                                                    const ReferenceOptima& refs) {
  if (refs.lambda.size() == 0 || refs.iterations == 0) {
    throw std::runtime_error("certify_bounds: missing reference optima");
  }
  const std::string fp = cgm_trace.metadata.fingerprint();
  if (fp != em_trace.metadata.fingerprint()) {
    throw std::runtime_error("certify_bounds: traces come from different setups");
  }
  if (!refs.fingerprint.empty() && refs.fingerprint != fp) {
    throw std::runtime_error("certify_bounds: reference optima come from a different setup");
  }
  long deepest = 0;
  for (const auto& r : cgm_trace.records) deepest = std::max(deepest, static_cast<long>(r.iteration));
  for (const auto& r : em_trace.records) deepest = std::max(deepest, static_cast<long>(r.iteration));
  if (!refs.converged && refs.iterations < 10 * deepest) {
    throw std::runtime_error("certify_bounds: reference run is not deep enough to certify against");
  }

  const double gamma = cgm_trace.metadata.gamma;
  const double r = cgm_trace.metadata.radius;
  const double eps = cgm_trace.metadata.lmo_epsilon;
  const double r2 = r * r;

  std::vector<BoundCertificate> certs;
  auto rate = [&](int l) { return 4.0 * gamma * r2 * (1.0 + eps) / static_cast<double>(l + 2); };
  auto iterate_rate = [&](int l, double radius_power) {
    return std::sqrt(8.0 * gamma * gamma * radius_power * (1.0 + eps) / static_cast<double>(l + 2));
  };

  for (const auto& rec : cgm_trace.records) {
    if (rec.iteration < 1) continue;
    certs.push_back(make_certificate(BoundKind::primal_rate, rec.iteration,
                                     rec.primal_value - refs.v_primal, rate(rec.iteration),
                                     gamma, r, eps));
  }
  for (const auto& rec : em_trace.records) {
    if (rec.iteration < 1) continue;
    const int l = rec.iteration;
    certs.push_back(make_certificate(BoundKind::dual_rate, l, rec.dual_value - refs.v_dual,
                                     rate(l), gamma, r, eps));
    certs.push_back(make_certificate(BoundKind::lambda_rate, l,
                                     (rec.lambda - refs.lambda).norm(), iterate_rate(l, r2),
                                     gamma, r, eps));
    certs.push_back(make_certificate(BoundKind::alpha_rate, l, std::abs(rec.alpha - refs.alpha),
                                     iterate_rate(l, r2 * r2), gamma, r, eps));
    certs.push_back(make_certificate(BoundKind::feasibility, l, rec.violation + rec.alpha,
                                     refs.alpha + iterate_rate(l, r2 * r2), gamma, r, eps));
  }
  certs.push_back(make_certificate(BoundKind::strong_duality, -1,
                                   std::abs(refs.v_primal - refs.v_dual),
                                   1e-6 * (1.0 + std::abs(refs.v_primal)), gamma, r, eps));
  return certs;
}

struct EquivalenceReport {
  bool supports_match = false;
  double max_support_discrepancy = 0.0;
  double max_value_discrepancy = 0.0;  // relative, over the shifted value identity
  long compared_supports = 0;
  long compared_values = 0;
  double value_tol = 1e-8;
  bool matched = false;
};

// The two drivers must visit identical supports (record l vs record l) and
// identical restricted values shifted by one (cgm record l vs em record l+1).
// Refuses traces whose configuration fingerprints differ.
inline EquivalenceReport equivalence_check(const RunTrace& cgm_trace, const RunTrace& em_trace,
                                           double value_tol = 1e-8) {
  if (cgm_trace.metadata.algorithm != "cgm" || em_trace.metadata.algorithm != "em") {
    throw std::runtime_error("equivalence_check: expected one cgm trace and one em trace");
  }
  if (cgm_trace.metadata.fingerprint() != em_trace.metadata.fingerprint()) {
    throw std::runtime_error("equivalence_check: traces come from different configurations");
  }

  auto find_record = [](const RunTrace& tr, int l) -> const IterationRecord* {
    for (const auto& rec : tr.records) {
      if (rec.iteration == l) return &rec;
    }
    return nullptr;
  };

  EquivalenceReport rep;
  rep.value_tol = value_tol;
  rep.supports_match = true;

  for (const auto& crec : cgm_trace.records) {
    if (crec.iteration < 1) continue;
    const IterationRecord* erec = find_record(em_trace, crec.iteration);
    if (!erec) continue;
    ++rep.compared_supports;
    const auto& a = crec.support.locations();
    const auto& b = erec->support.locations();
    if (a.size() != b.size()) {
      rep.supports_match = false;
      rep.max_support_discrepancy = std::numeric_limits<double>::infinity();
      continue;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = std::abs(a[i] - b[i]);
      rep.max_support_discrepancy = std::max(rep.max_support_discrepancy, d);
      if (d != 0.0) rep.supports_match = false;
    }
  }

  for (const auto& crec : cgm_trace.records) {
    const IterationRecord* erec = find_record(em_trace, crec.iteration + 1);
    if (!erec) continue;
    ++rep.compared_values;
    const double d = std::abs(crec.primal_value - erec->dual_value) /
                     (1.0 + std::abs(crec.primal_value));
    rep.max_value_discrepancy = std::max(rep.max_value_discrepancy, d);
  }

  rep.matched = rep.supports_match && rep.compared_supports > 0 && rep.compared_values > 0 &&
                rep.max_value_discrepancy <= value_tol;
  return rep;
}

}  // namespace measureforge

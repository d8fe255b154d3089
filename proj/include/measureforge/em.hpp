#pragma once

#include "measureforge/cgm.hpp"

namespace measureforge {

// Dual exchange loop.  Iteration l solves the restricted problem on the
// support accumulated so far (T^{l-1}), reads off the dual point, and
// exchanges in the grid location maximizing Re<lambda, Phi(t)>.  Stops when
// that location violates the dual constraint by at most eta.  Records carry
// the support after the exchange; the terminal record keeps the support it
// was solved on.
inline RunTrace em_run(const ProblemInstance& problem, const SolverConfig& config) {
  if (config.max_iterations < 1) {
    throw std::invalid_argument("em_run: need at least one iteration");
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  detail::IterationEngine engine(problem, config);
  RunTrace trace;
  trace.metadata = detail::make_metadata("em", problem, config);
  trace.termination = Termination::max_iterations;

  for (int l = 1; l <= config.max_iterations; ++l) {
    detail::EngineStep step = engine.solve_current();
    if (!step.sol.converged) detail::throw_unconverged("em", l, step, engine.support().size());
    const double t_new = step.next.t;
    DiscreteMeasure solved = detail::measure_from(engine.support(), step.sol.weights);
    if (step.violation <= config.eta) {
      trace.records.push_back(
          detail::make_record(l, t_new, engine.support(), std::move(solved), step, elapsed()));
      trace.termination = Termination::tolerance_met;
      break;
    }
    if (engine.support().contains(t_new)) {
      // The most violating location is already ours; exchanging cannot move.
      trace.records.push_back(
          detail::make_record(l, t_new, engine.support(), std::move(solved), step, elapsed()));
      trace.termination = Termination::stalled;
      break;
    }
    engine.grow(t_new);
    trace.records.push_back(
        detail::make_record(l, t_new, engine.support(), std::move(solved), step, elapsed()));
  }

  trace.final_measure = trace.records.back().measure;
  return trace;
}

}  // namespace measureforge

#include <catch2/catch_amalgamated.hpp>

#include "properties.hpp"

using namespace measureforge;

namespace {

struct OrthoEm {
  ProblemInstance problem;
  SolverConfig config;

  OrthoEm() {
    Eigen::MatrixXcd atoms = Eigen::MatrixXcd::Identity(3, 3);
    problem.dict = AtomDictionary::tabulated({0.1, 0.5, 0.9}, atoms);
    problem.y = CVec(3);
    problem.y << Complex(2, 0), Complex(1.5, 0), Complex(0.5, 0);
    problem.loss = LossModel::scaled_quadratic(1.0);
    problem.tv_bound = 2.0;
    config.grid = Grid::uniform_for(problem.dict, 0);
    config.inner_tol = 1e-12;
    config.inner_max_iterations = 100000;
    config.max_iterations = 10;
  }
};

}  // namespace

TEST_CASE("exchange walkthrough tightens the dual and stops at feasibility") {
  OrthoEm inst;
  const RunTrace trace = em_run(inst.problem, inst.config);

  REQUIRE(trace.records.size() == 3);
  CHECK(trace.termination == Termination::tolerance_met);
  CHECK(trace.metadata.algorithm == "em");

  // iteration 1: solved on the empty support, exchanged in the steepest atom
  const IterationRecord& r1 = trace.records[0];
  CHECK(r1.iteration == 1);
  CHECK(r1.t_added == 0.1);
  CHECK(r1.support.locations() == std::vector<double>{0.1});
  CHECK(r1.measure.atoms().empty());
  CHECK(r1.primal_value == Catch::Approx(3.25).margin(1e-14));
  CHECK(r1.dual_value == Catch::Approx(3.25).margin(1e-14));
  CHECK(r1.violation == Catch::Approx(2.0).margin(1e-12));

  const IterationRecord& r2 = trace.records[1];
  CHECK(r2.iteration == 2);
  CHECK(r2.t_added == 0.5);
  CHECK(r2.support.locations() == std::vector<double>{0.1, 0.5});
  CHECK(r2.measure.tv_mass() == Catch::Approx(2.0).margin(1e-8));
  CHECK(r2.dual_value == Catch::Approx(1.25).margin(1e-9));
  CHECK(r2.violation == Catch::Approx(1.5).margin(1e-8));

  // iteration 3: no grid location violates the dual constraint any more
  const IterationRecord& r3 = trace.records[2];
  CHECK(r3.iteration == 3);
  CHECK(r3.support.locations() == std::vector<double>{0.1, 0.5});
  CHECK(r3.dual_value == Catch::Approx(0.6875).margin(1e-9));
  CHECK(r3.violation == Catch::Approx(0.0).margin(1e-8));
  CHECK(r3.alpha == Catch::Approx(0.75).margin(1e-9));
  REQUIRE(r3.measure.atoms().size() == 2);
  CHECK(r3.measure.atoms()[0].weight == Catch::Approx(1.25).margin(1e-8));
  CHECK(trace.final_measure == r3.measure);
}

TEST_CASE("exchange terminations") {
  OrthoEm inst;

  SECTION("slack threshold accepts the empty solution") {
    SolverConfig cfg = inst.config;
    cfg.eta = 10.0;
    const RunTrace t = em_run(inst.problem, cfg);
    CHECK(t.records.size() == 1);
    CHECK(t.termination == Termination::tolerance_met);
    CHECK(t.final_measure.atoms().empty());
  }

  SECTION("iteration budget") {
    SolverConfig cfg = inst.config;
    cfg.max_iterations = 1;
    const RunTrace t = em_run(inst.problem, cfg);
    CHECK(t.records.size() == 1);
    CHECK(t.termination == Termination::max_iterations);
    cfg.max_iterations = 0;
    CHECK_THROWS_AS(em_run(inst.problem, cfg), std::invalid_argument);
  }

  SECTION("unreachable threshold stalls once the grid optimum is reached") {
    SolverConfig cfg = inst.config;
    cfg.eta = -1.0;  // can never be met: forces the exchange to repeat itself
    const RunTrace t = em_run(inst.problem, cfg);
    CHECK(t.termination == Termination::stalled);
    CHECK(t.records.back().t_added == 0.1);
    CHECK(t.records.back().support.locations() == std::vector<double>{0.1, 0.5});
    CHECK(t.records.back().violation <= 0.0);
  }
}

TEST_CASE("both drivers replay the identical solve sequence") {
  mfprop::Rng rng(41);
  for (int c = 0; c < 8; ++c) {
    mfprop::SmallInstance inst = mfprop::random_tabulated_instance(rng);
    SolverConfig cgm_cfg;
    cgm_cfg.grid = inst.grid;
    cgm_cfg.max_iterations = 10;
    SolverConfig em_cfg = cgm_cfg;
    em_cfg.max_iterations = 11;

    const RunTrace cg = cgm_run(inst.problem, cgm_cfg);
    const RunTrace ex = em_run(inst.problem, em_cfg);
    CHECK(cg.metadata.fingerprint() == ex.metadata.fingerprint());

    // The exchange run can only stop earlier: once the steepest location is
    // already carried, it halts while the gradient run may keep polishing.
    REQUIRE(ex.records.size() <= cg.records.size());
    REQUIRE(!ex.records.empty());
    for (std::size_t i = 0; i < ex.records.size(); ++i) {
      // record i of both runs is built from the identical i-th restricted
      // solve of the shared engine, so every solved quantity matches bitwise
      CHECK(ex.records[i].iteration == cg.records[i].iteration + 1);
      CHECK(ex.records[i].primal_value == cg.records[i].primal_value);
      CHECK(ex.records[i].dual_value == cg.records[i].dual_value);
      CHECK(ex.records[i].alpha == cg.records[i].alpha);
      CHECK(ex.records[i].violation == cg.records[i].violation);
      CHECK(ex.records[i].lambda == cg.records[i].lambda);
      if (i + 1 < cg.records.size()) {
        CHECK(ex.records[i].t_added == cg.records[i + 1].t_added);
        CHECK(ex.records[i].support == cg.records[i + 1].support);
      }
    }

    const auto res = mfprop::prop_trace_invariants(ex, inst.problem);
    INFO(res.detail);
    CHECK(res.ok);
  }
}

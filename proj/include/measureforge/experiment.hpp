#pragma once

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <future>
#include <random>
#include <thread>

#include "measureforge/serialize.hpp"

namespace measureforge {

struct DictionarySpec {
  std::string family = "fourier";
  int m = 33;                 // fourier output dimension
  double c = 100.0;           // gaussian width coefficient
  int samples_count = 33;     // gaussian sample locations, uniform on [lo, hi]
  double samples_lo = 0.0;
  double samples_hi = 1.0;

  AtomDictionary make() const {
    if (family == "fourier") return AtomDictionary::fourier(m);
    if (family == "gaussian") {
      if (samples_count < 2) throw std::invalid_argument("dictionary: need at least two samples");
      std::vector<double> s(static_cast<std::size_t>(samples_count));
      for (int j = 0; j < samples_count; ++j) {
        s[static_cast<std::size_t>(j)] =
            samples_lo + (samples_hi - samples_lo) * (static_cast<double>(j) / (samples_count - 1));
      }
      return AtomDictionary::gaussian(std::move(s), c, ParameterDomain(samples_lo, samples_hi));
    }
    throw std::invalid_argument("dictionary: unsupported family '" + family + "' in config");
  }

  Json to_json() const {
    if (family == "fourier") return Json{{"family", "fourier"}, {"m", m}};
    return Json{{"family", "gaussian"},
                {"c", c},
                {"samples", Json{{"count", samples_count}, {"lo", samples_lo}, {"hi", samples_hi}}}};
  }

  static DictionarySpec from_json(const Json& j) {
    DictionarySpec d;
    d.family = j.value("family", std::string("fourier"));
    if (d.family == "fourier") {
      d.m = j.value("m", 33);
    } else if (d.family == "gaussian") {
      d.c = j.value("c", 100.0);
      if (j.contains("samples")) {
        const Json& s = j["samples"];
        d.samples_count = s.value("count", 33);
        d.samples_lo = s.value("lo", 0.0);
        d.samples_hi = s.value("hi", 1.0);
      }
    } else {
      throw std::invalid_argument("dictionary: unsupported family '" + d.family + "'");
    }
    return d;
  }
};

struct NoiseSpec {
  enum class Kind { none, gaussian };
  Kind kind = Kind::none;
  double variance = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) {
      throw std::invalid_argument("noise: variance must be nonnegative and finite");
    }
  }

  Json to_json() const {
    return Json{{"kind", kind == Kind::gaussian ? "gaussian" : "none"},
                {"variance", variance},
                {"seed", seed}};
  }

  static NoiseSpec from_json(const Json& j) {
    NoiseSpec n;
    const std::string k = j.value("kind", std::string("none"));
    if (k == "gaussian") n.kind = Kind::gaussian;
    else if (k == "none") n.kind = Kind::none;
    else throw std::invalid_argument("noise: unknown kind '" + k + "'");
    n.variance = j.value("variance", 0.0);
    n.seed = j.value("seed", std::uint64_t{0});
    n.validate();
    return n;
  }
};

inline DiscreteMeasure default_spikes() {
  const double pi = std::numbers::pi;
  return DiscreteMeasure({{0.1 * pi, 0.25}, {0.2 * pi, 0.25}, {0.3 * pi, 0.25}, {0.31 * pi, 0.25}});
}

struct ExperimentConfig {
  DictionarySpec dictionary;
  DiscreteMeasure ground_truth = default_spikes();
  NoiseSpec noise;
  double eta = 0.0;
  int iterations = 50;
  int grid = 1000;
  double lmo_epsilon = 0.0;
  double inner_tol = 1e-10;
  long inner_max_iterations = 1000000;
  double kkt_tol = 1e-6;
  double tv_bound = 1.0;
  std::vector<int> sweep;       // bench grid sizes; empty means {grid}
  int reference_min_iterations = 500;
  int reference_multiplier = 10;
  std::string out_dir = "out";

  Json to_json() const {
    Json solver{{"eta", eta},
                {"iterations", iterations},
                {"grid", grid},
                {"lmo_epsilon", lmo_epsilon},
                {"inner_tol", inner_tol},
                {"inner_max_iterations", inner_max_iterations},
                {"kkt_tol", kkt_tol},
                {"tv_bound", tv_bound}};
    return Json{{"dictionary", dictionary.to_json()},
                {"ground_truth", measure_to_json(ground_truth)},
                {"noise", noise.to_json()},
                {"solver", std::move(solver)},
                {"sweep", sweep},
                {"reference",
                 Json{{"min_iterations", reference_min_iterations},
                      {"multiplier", reference_multiplier}}},
                {"out", out_dir}};
  }

  static ExperimentConfig from_json(const Json& j) {
    ExperimentConfig c;
    if (j.contains("dictionary")) c.dictionary = DictionarySpec::from_json(j["dictionary"]);
    if (j.contains("ground_truth")) c.ground_truth = measure_from_json(j["ground_truth"]);
    if (j.contains("noise")) c.noise = NoiseSpec::from_json(j["noise"]);
    if (j.contains("solver")) {
      const Json& s = j["solver"];
      c.eta = s.value("eta", c.eta);
      c.iterations = s.value("iterations", c.iterations);
      c.grid = s.value("grid", c.grid);
      c.lmo_epsilon = s.value("lmo_epsilon", c.lmo_epsilon);
      c.inner_tol = s.value("inner_tol", c.inner_tol);
      c.inner_max_iterations = s.value("inner_max_iterations", c.inner_max_iterations);
      c.kkt_tol = s.value("kkt_tol", c.kkt_tol);
      c.tv_bound = s.value("tv_bound", c.tv_bound);
    }
    if (j.contains("sweep")) c.sweep = j["sweep"].get<std::vector<int>>();
    if (j.contains("reference")) {
      const Json& r = j["reference"];
      c.reference_min_iterations = r.value("min_iterations", c.reference_min_iterations);
      c.reference_multiplier = r.value("multiplier", c.reference_multiplier);
    }
    c.out_dir = j.value("out", c.out_dir);
    if (c.iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
    if (c.grid < 2) throw std::invalid_argument("config: grid must be >= 2");
    return c;
  }
};

struct GroundTruth {
  DiscreteMeasure measure;
  CVec clean_observations;
  CVec noisy_observations;
  std::uint64_t seed = 0;
};

// Builds the dictionary, synthesizes the clean observation from the ground
// truth spikes, and (optionally) perturbs each real coordinate — real and
// imaginary parts independently — with N(0, variance) noise.
inline std::pair<ProblemInstance, GroundTruth> gen_superres_instance(const ExperimentConfig& config) {
  config.noise.validate();
  AtomDictionary dict = config.dictionary.make();
  for (const Atom& a : config.ground_truth.atoms()) {
    if (!dict.domain().contains(a.location)) {
      throw std::invalid_argument("gen_superres_instance: spike at " + detail::fmt_g(a.location) +
                                  " outside the dictionary domain");
    }
  }
  GroundTruth gt;
  gt.measure = config.ground_truth;
  gt.clean_observations = synthesize(dict, gt.measure);
  gt.noisy_observations = gt.clean_observations;
  gt.seed = config.noise.seed;
  if (config.noise.kind == NoiseSpec::Kind::gaussian && config.noise.variance > 0.0) {
    std::mt19937_64 rng(config.noise.seed);
    std::normal_distribution<double> n(0.0, std::sqrt(config.noise.variance));
    for (Eigen::Index i = 0; i < gt.noisy_observations.size(); ++i) {
      const double re = n(rng);
      const double im = n(rng);
      gt.noisy_observations[i] += Complex(re, im);
    }
  }
  ProblemInstance problem;
  problem.y = gt.noisy_observations;
  problem.dict = std::move(dict);
  problem.loss = LossModel::scaled_quadratic(1.0);
  problem.tv_bound = config.tv_bound;
  problem.validate();
  return {std::move(problem), std::move(gt)};
}

enum class RunMode { solve_cgm, solve_em, compare, bench };

inline const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::solve_cgm: return "solve-cgm";
    case RunMode::solve_em: return "solve-em";
    case RunMode::compare: return "compare";
    case RunMode::bench: return "bench";
  }
  return "?";
}

struct ExperimentResult {
  bool ok = false;
  Json summary;
  std::vector<std::string> files;
};

namespace detail {

struct EntryOutcome {
  int grid_size = 0;
  std::optional<RunTrace> cgm;
  std::optional<RunTrace> em;
  std::optional<ReferenceOptima> reference;
  std::optional<EquivalenceReport> equivalence;
  std::vector<BoundCertificate> certificates;
  std::vector<double> wasser_cgm;
  std::vector<double> wasser_em;
  std::string cgm_file;
  std::string em_file;
  std::string error;
};

inline std::vector<double> wasser_per_record(const RunTrace& trace, const DiscreteMeasure& truth,
                                             const ParameterDomain& domain) {
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) out.push_back(wasserstein1(rec.measure, truth, domain));
  return out;
}

inline EntryOutcome run_entry(const ExperimentConfig& config, const ProblemInstance& problem,
                              const GroundTruth& gt, int n, RunMode mode) {
  EntryOutcome out;
  out.grid_size = n;
  try {
    SolverConfig sc;
    sc.eta = config.eta;
    sc.max_iterations = config.iterations;
    sc.grid = Grid::uniform_for(problem.dict, n);
    sc.lmo_epsilon = config.lmo_epsilon;
    sc.inner_tol = config.inner_tol;
    sc.inner_max_iterations = config.inner_max_iterations;
    sc.kkt_tol = config.kkt_tol;
    sc.seed = config.noise.seed;

    const bool want_cgm = mode != RunMode::solve_em;
    const bool want_em = mode != RunMode::solve_cgm;
    if (want_cgm) {
      out.cgm = cgm_run(problem, sc);
      out.wasser_cgm = wasser_per_record(*out.cgm, gt.measure, problem.dict.domain());
    }
    if (want_em) {
      SolverConfig sc_em = sc;
      // one extra dual solve so the shifted value identity covers every
      // primal record
      if (mode == RunMode::compare || mode == RunMode::bench) {
        sc_em.max_iterations = config.iterations + 1;
      }
      out.em = em_run(problem, sc_em);
      out.wasser_em = wasser_per_record(*out.em, gt.measure, problem.dict.domain());
    }
    if (out.cgm && out.em) out.equivalence = equivalence_check(*out.cgm, *out.em);
    if (mode == RunMode::bench) {
      ReferenceResult ref = compute_reference_optima(problem, sc, config.reference_min_iterations,
                                                     config.reference_multiplier);
      out.reference = ref.optima;
      out.certificates = certify_bounds(*out.cgm, *out.em, ref.optima);
    }
  } catch (const std::exception& e) {
    out.error = std::string(e.what()) + " (grid " + std::to_string(n) + ", " +
                run_mode_name(mode) + ")";
  }
  return out;
}

inline std::size_t thread_budget(std::size_t entries) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t threads = std::min<std::size_t>(entries, hw);
  if (const char* env = std::getenv("MEASURE_FORGE_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap >= 1) threads = std::min<std::size_t>(threads, cap);
  }
  return std::max<std::size_t>(threads, 1);
}

inline std::string iso_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string(buf);
}

}  // namespace detail

// Runs the configured sweep (bench) or a single entry (solve/compare), writes
// trace CSVs plus summary.json (and certificates.json when references were
// computed), and reports overall success.
inline ExperimentResult run_experiment(const ExperimentConfig& config, RunMode mode) {
  auto [problem, gt] = gen_superres_instance(config);

  std::vector<int> sweep = config.sweep;
  if (mode != RunMode::bench || sweep.empty()) sweep = {config.grid};

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);

  const std::size_t threads = detail::thread_budget(sweep.size());
  std::vector<detail::EntryOutcome> outcomes(sweep.size());
  for (std::size_t base = 0; base < sweep.size(); base += threads) {
    const std::size_t hi = std::min(base + threads, sweep.size());
    std::vector<std::future<detail::EntryOutcome>> futs;
    for (std::size_t i = base; i < hi; ++i) {
      futs.push_back(std::async(std::launch::async, [&, i] {
        return detail::run_entry(config, problem, gt, sweep[i], mode);
      }));
    }
    for (std::size_t i = base; i < hi; ++i) outcomes[i] = futs[i - base].get();
  }

  ExperimentResult result;
  bool ok = true;
  Json entries = Json::array();
  Json cert_file = Json::array();
  bool any_reference = false;

  for (detail::EntryOutcome& out : outcomes) {
    Json entry;
    entry["grid"] = out.grid_size;
    if (!out.error.empty()) {
      entry["error"] = out.error;
      ok = false;
      entries.push_back(std::move(entry));
      continue;
    }

    auto write_trace = [&](const RunTrace& tr, const std::vector<double>& wasser) {
      const std::string name =
          "trace_" + tr.metadata.algorithm + "_" + std::to_string(out.grid_size) + ".csv";
      const fs::path path = fs::path(config.out_dir) / name;
      std::ostringstream body;
      write_trace_csv(body, trace_csv_rows(tr, out.certificates, wasser));
      write_text_file(path.string(), body.str());
      result.files.push_back(path.string());
      return name;
    };

    Json files = Json::object();
    if (out.cgm) files["cgm"] = out.cgm_file = write_trace(*out.cgm, out.wasser_cgm);
    if (out.em) files["em"] = out.em_file = write_trace(*out.em, out.wasser_em);
    entry["files"] = std::move(files);

    const TraceMetadata& md = out.cgm ? out.cgm->metadata : out.em->metadata;
    entry["metadata"] = metadata_to_json(md);
    Json terminations = Json::object();
    if (out.cgm) terminations["cgm"] = termination_name(out.cgm->termination);
    if (out.em) terminations["em"] = termination_name(out.em->termination);
    entry["terminations"] = std::move(terminations);

    double v_p, v_d;
    if (out.reference) {
      v_p = out.reference->v_primal;
      v_d = out.reference->v_dual;
    } else if (out.cgm && out.em) {
      v_p = out.cgm->records.back().primal_value;
      v_d = out.em->records.back().dual_value;
    } else {
      const RunTrace& tr = out.cgm ? *out.cgm : *out.em;
      v_p = tr.records.back().primal_value;
      v_d = tr.records.back().dual_value;
    }
    const double sd_gap = std::abs(v_p - v_d);
    const double sd_tol = 1e-6 * (1.0 + std::abs(v_p));
    entry["strong_duality"] =
        Json{{"v_primal", v_p}, {"v_dual", v_d}, {"gap", sd_gap}, {"tol", sd_tol},
             {"ok", sd_gap <= sd_tol}};
    if (sd_gap > sd_tol) ok = false;

    if (out.reference) {
      entry["reference"] = reference_to_json(*out.reference);
      any_reference = true;
    }
    if (out.equivalence) {
      entry["equivalence"] = equivalence_to_json(*out.equivalence);
      if (!out.equivalence->matched) ok = false;
    }

    long failed = 0;
    for (const auto& c : out.certificates) {
      if (!c.satisfied) ++failed;
    }
    entry["certificates_total"] = static_cast<long>(out.certificates.size());
    entry["certificates_failed"] = failed;
    if (failed > 0) ok = false;
    if (!out.certificates.empty()) {
      Json arr = Json::array();
      for (const auto& c : out.certificates) arr.push_back(certificate_to_json(c));
      cert_file.push_back(Json{{"grid", out.grid_size}, {"certificates", std::move(arr)}});
    }

    Json final_fields = Json::object();
    if (out.cgm) {
      final_fields["primal_value"] = out.cgm->records.back().primal_value;
      final_fields["wasserstein_cgm"] = out.wasser_cgm.back();
      final_fields["mass_difference"] =
          std::abs(out.cgm->final_measure.tv_mass() - gt.measure.tv_mass());
    }
    if (out.em) {
      final_fields["dual_value"] = out.em->records.back().dual_value;
      final_fields["wasserstein_em"] = out.wasser_em.back();
      if (!out.cgm) {
        final_fields["mass_difference"] =
            std::abs(out.em->final_measure.tv_mass() - gt.measure.tv_mass());
      }
    }
    entry["final"] = std::move(final_fields);
    entries.push_back(std::move(entry));
  }

  Json summary;
  summary["timestamp"] = detail::iso_timestamp();
  summary["mode"] = run_mode_name(mode);
  summary["prng"] = "mt19937_64";
  summary["noise_convention"] =
      "gaussian noise is applied independently to each real coordinate "
      "(real and imaginary parts each receive N(0, variance))";
  summary["config"] = config.to_json();
  summary["threads"] = threads;
  summary["entries"] = std::move(entries);
  summary["ok"] = ok;

  const fs::path summary_path = fs::path(config.out_dir) / "summary.json";
  write_text_file(summary_path.string(), summary.dump(2) + "\n");
  result.files.push_back(summary_path.string());

  if (any_reference) {
    const fs::path cert_path = fs::path(config.out_dir) / "certificates.json";
    write_text_file(cert_path.string(), cert_file.dump(2) + "\n");
    result.files.push_back(cert_path.string());
  }

  result.ok = ok;
  result.summary = std::move(summary);
  return result;
}

// Recomputes every certificate from the stored traces and summary in a
// directory produced by bench, rewrites certificates.json, and returns
// whether everything still holds.  The lambda-distance left-hand sides are
// the one quantity not reconstructible from the CSV schema; those are taken
// from the stored columns.
inline std::pair<bool, Json> certify_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path summary_path = fs::path(dir) / "summary.json";
  Json summary = Json::parse(read_text_file(summary_path.string()));
  if (!summary.contains("entries")) throw std::runtime_error("certify: malformed summary.json");

  bool ok = true;
  bool any = false;
  Json cert_file = Json::array();
  for (const Json& entry : summary["entries"]) {
    if (!entry.contains("reference")) continue;
    any = true;
    const ReferenceOptima refs = reference_from_json(entry["reference"]);
    const Json& md = entry.at("metadata");
    const double gamma = md.at("gamma").get<double>();
    const double radius = md.at("radius").get<double>();
    const double eps = md.at("lmo_epsilon").get<double>();
    const double r2 = radius * radius;
    const int grid = entry.at("grid").get<int>();

    auto load_rows = [&](const char* key) {
      const std::string name = entry.at("files").at(key).get<std::string>();
      std::istringstream is(read_text_file((fs::path(dir) / name).string()));
      return read_trace_csv(is);
    };
    auto rate = [&](long l) { return 4.0 * gamma * r2 * (1.0 + eps) / static_cast<double>(l + 2); };
    auto iterate_rate = [&](long l, double rp) {
      return std::sqrt(8.0 * gamma * gamma * rp * (1.0 + eps) / static_cast<double>(l + 2));
    };

    std::vector<BoundCertificate> certs;
    for (const TraceCsvRow& row : load_rows("cgm")) {
      if (row.iter < 1) continue;
      certs.push_back(make_certificate(BoundKind::primal_rate, static_cast<int>(row.iter),
                                       row.primal_value - refs.v_primal, rate(row.iter), gamma,
                                       radius, eps));
    }
    for (const TraceCsvRow& row : load_rows("em")) {
      if (row.iter < 1) continue;
      const int l = static_cast<int>(row.iter);
      certs.push_back(make_certificate(BoundKind::dual_rate, l, row.dual_value - refs.v_dual,
                                       rate(l), gamma, radius, eps));
      certs.push_back(make_certificate(BoundKind::lambda_rate, l, row.b15_lhs,
                                       iterate_rate(l, r2), gamma, radius, eps));
      certs.push_back(make_certificate(BoundKind::alpha_rate, l, std::abs(row.alpha - refs.alpha),
                                       iterate_rate(l, r2 * r2), gamma, radius, eps));
      certs.push_back(make_certificate(BoundKind::feasibility, l, row.violation + row.alpha,
                                       refs.alpha + iterate_rate(l, r2 * r2), gamma, radius, eps));
    }
    certs.push_back(make_certificate(BoundKind::strong_duality, -1,
                                     std::abs(refs.v_primal - refs.v_dual),
                                     1e-6 * (1.0 + std::abs(refs.v_primal)), gamma, radius, eps));

    Json arr = Json::array();
    for (const auto& c : certs) {
      if (!c.satisfied) ok = false;
      arr.push_back(certificate_to_json(c));
    }
    cert_file.push_back(Json{{"grid", grid}, {"certificates", std::move(arr)}});
  }
  if (!any) {
    throw std::runtime_error("certify: no entries with reference optima in " + dir +
                             " (run bench first)");
  }
  write_text_file((fs::path(dir) / "certificates.json").string(), cert_file.dump(2) + "\n");
  return {ok, std::move(cert_file)};
}

}  // namespace measureforge

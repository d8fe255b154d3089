// Command-line front end: solve / compare / bench / certify over JSON configs.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "measureforge/measureforge.hpp"

namespace mf = measureforge;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_result(const mf::ExperimentResult& result) {
  for (const std::string& f : result.files) std::printf("wrote %s\n", f.c_str());
  for (const auto& entry : result.summary["entries"]) {
    const int grid = entry["grid"].get<int>();
    if (entry.contains("error")) {
      std::printf("grid %d: ERROR %s\n", grid, entry["error"].get<std::string>().c_str());
      continue;
    }
    std::string line = "grid " + std::to_string(grid) + ":";
    if (entry.contains("final")) {
      const auto& fin = entry["final"];
      if (fin.contains("primal_value")) {
        line += " primal " + num(fin["primal_value"].get<double>());
      } else if (fin.contains("dual_value")) {
        line += " dual " + num(fin["dual_value"].get<double>());
      }
      if (fin.contains("wasserstein_cgm")) {
        line += " w1 " + num(fin["wasserstein_cgm"].get<double>());
      } else if (fin.contains("wasserstein_em")) {
        line += " w1 " + num(fin["wasserstein_em"].get<double>());
      }
    }
    if (entry.contains("equivalence")) {
      line += entry["equivalence"]["matched"].get<bool>() ? " equivalence ok"
                                                          : " equivalence MISMATCH";
    }
    if (entry.contains("certificates_total")) {
      const long total = entry["certificates_total"].get<long>();
      const long failed = entry["certificates_failed"].get<long>();
      if (total > 0) {
        line += " certificates " + std::to_string(total - failed) + "/" + std::to_string(total);
      }
    }
    std::printf("%s\n", line.c_str());
  }
  std::printf("%s\n", result.ok ? "OK" : "FAILED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"measure-forge: sparse nonnegative measure recovery by conditional "
               "gradients and dual exchange"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string algo = "cgm";
  int grid = 0;
  int iters = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--grid", grid, "grid size override")->check(CLI::PositiveNumber);
    sub->add_option("--iters", iters, "iteration budget override")->check(CLI::PositiveNumber);
    sub->add_option("--eta", eta, "stopping threshold override");
    sub->add_option("--seed", seed, "noise seed override");
  };

  CLI::App* solve = app.add_subcommand("solve", "run one algorithm on one instance");
  solve->add_option("--algo", algo, "cgm or em")->check(CLI::IsMember({"cgm", "em"}));
  add_common(solve);
  CLI::App* compare = app.add_subcommand("compare", "run both algorithms and check equivalence");
  add_common(compare);
  CLI::App* bench = app.add_subcommand("bench", "sweep grid sizes with reference certificates");
  add_common(bench);
  CLI::App* certify = app.add_subcommand("certify", "re-verify certificates in an output directory");
  certify->add_option("--out", out_dir, "directory holding summary.json and traces")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(certify)) {
      auto [ok, certs] = mf::certify_directory(out_dir);
      long total = 0, failed = 0;
      for (const auto& entry : certs) {
        for (const auto& c : entry["certificates"]) {
          ++total;
          if (!c["satisfied"].get<bool>()) ++failed;
        }
      }
      std::printf("rechecked %ld certificates, %ld failed\n", total, failed);
      std::printf("%s\n", ok ? "OK" : "FAILED");
      return ok ? 0 : 1;
    }

    CLI::App* active = app.got_subcommand(solve) ? solve
                       : app.got_subcommand(compare) ? compare
                                                     : bench;
    mf::ExperimentConfig cfg;
    if (active->count("--config")) {
      cfg = mf::ExperimentConfig::from_json(mf::Json::parse(mf::read_text_file(config_path)));
    }
    if (active->count("--grid")) cfg.grid = grid;
    if (active->count("--iters")) cfg.iterations = iters;
    if (active->count("--eta")) cfg.eta = eta;
    if (active->count("--seed")) cfg.noise.seed = seed;
    if (active->count("--out")) cfg.out_dir = out_dir;

    mf::RunMode mode;
    if (active == solve) {
      mode = algo == "em" ? mf::RunMode::solve_em : mf::RunMode::solve_cgm;
    } else if (active == compare) {
      mode = mf::RunMode::compare;
    } else {
      mode = mf::RunMode::bench;
    }

    mf::ExperimentResult result = mf::run_experiment(cfg, mode);
    print_result(result);
    return result.ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

// Command-line front end. Everything goes through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "ionchan/ionchan.h"

namespace {

// 0 clean, 1 violations flagged, 2 config or usage error, 3 simulation or i/o failure.
int exit_code(ionch_status s) {
  switch (s) {
    case IONCH_OK: return 0;
    case IONCH_VIOLATION: return 1;
    case IONCH_PARSE:
    case IONCH_RANGE:
    case IONCH_INVALID_ARG: return 2;
    default: return 3;
  }
}

int report(ionch_status s) {
  std::fprintf(stderr, "ionchan: %s: %s\n", ionch_status_name(s), ionch_last_error());
  return exit_code(s);
}

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic ion-channel cable simulator and convergence harness"};
  app.set_version_flag("--version", ionch_version());
  std::string subcommand, config_path, out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  bool quiet = false;
  app.add_option("subcommand", subcommand,
                 "simulate | mean-field | converge | algo-error | corrector-check | poisson-lln | hh-demo")
      ->required();
  app.add_option("--config,-c", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "override run.seed");
  auto* workers_opt = app.add_option("--workers", workers, "override run.workers")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (takes precedence over IONCHAN_OUT_DIR)");
  app.add_flag("--quiet,-q", quiet, "suppress progress lines");
  CLI11_PARSE(app, argc, argv);

  ionch_config* cfg = nullptr;
  ionch_status s = ionch_config_load(config_path.c_str(), &cfg);
  if (s != IONCH_OK) return report(s);
  s = ionch_config_set_subcommand(cfg, subcommand.c_str());
  if (s == IONCH_OK && *seed_opt) s = ionch_config_set_seed(cfg, seed);
  if (s == IONCH_OK && *workers_opt) s = ionch_config_set_workers(cfg, workers);
  if (s == IONCH_OK && !out_dir.empty()) s = ionch_config_set_out_dir(cfg, out_dir.c_str());
  if (s != IONCH_OK) {
    ionch_config_free(cfg);
    return report(s);
  }

  ionch_run_summary summary{};
  s = ionch_run(cfg, quiet ? nullptr : log_line, nullptr, &summary);
  ionch_config_free(cfg);
  if (s != IONCH_OK && s != IONCH_VIOLATION) return report(s);
  std::printf("%s (output in %s)\n", summary.line, summary.out_dir);
  return exit_code(s);
}

#include "ionchan/run.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>

#include "ionchan/averaging.hpp"
#include "ionchan/error.hpp"
#include "ionchan/io.hpp"
#include "ionchan/presets.hpp"

namespace ionchan {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g17(double v) { return fmt("%.17g", v); }

class Outputs {
 public:
  Outputs(fs::path dir, RunResult& result) : dir_(std::move(dir)), result_(result) {}

  void write(const std::string& name, const std::function<void(std::ostream&)>& writer) {
    write_file_atomic(dir_ / name, writer);
    result_.files.push_back((dir_ / name).string());
  }

  void text(const std::string& name, const std::string& content) {
    write(name, [&](std::ostream& os) { os << content; });
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  RunResult& result_;
};

// Tagged (series, x, y) rows for external plotting.
struct PlotData {
  std::vector<std::tuple<std::string, double, double>> rows;
  void add(const std::string& series, double x, double y) { rows.emplace_back(series, x, y); }
  void write(std::ostream& os) const {
    os << "series,x,y\n";
    for (const auto& [s, x, y] : rows) os << s << ',' << g17(x) << ',' << g17(y) << '\n';
  }
};

void log_line(const RunOptions& opt, const std::string& line) {
  if (opt.log) *opt.log << line << '\n' << std::flush;
}

// ---------------------------------------------------------------------------

void run_simulate(const RunConfig& c, Outputs& out, RunResult& res, json& js) {
  const auto lattice = config_lattice(c);
  const auto spec = model_factory(c)(lattice);
  const auto alg = parse_algorithm(c.text("algorithm.name"));
  const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  const double T = c.real("experiment.T");
  Rng init_rng(seed, 0);
  auto state = sample_initial_state(lattice, spec.model, spec.init, init_rng);
  Rng rng(seed, 1);
  Recorder rec;
  SimStats stats;
  try {
    stats = simulate(alg, lattice, spec.model, state, T, rng, config_sim_options(c), rec);
  } catch (const BoundViolation& e) {
    throw BoundViolation("run seed " + std::to_string(seed) + ": " + e.what(), e.time(), e.compartment());
  }
  const auto& tr = rec.trajectory();
  const std::string format = c.text("io.trajectory_format");
  if (format == "csv" || format == "both") {
    out.write("trajectory.csv", [&](std::ostream& os) { tr.write_csv(os); });
    out.write("events.csv", [&](std::ostream& os) { tr.write_events_csv(os); });
  }
  if (format == "binary" || format == "both") out.write("trajectory.bin", [&](std::ostream& os) { tr.write_binary(os); });
  res.rows = static_cast<std::int64_t>(tr.rows());
  js["snapshots"] = tr.rows();
  js["events"] = stats.events;
  js["candidates"] = stats.candidates;
  js["Lambda"] = stats.bound.Lambda;
  js["n"] = lattice.n();
  res.summary = "simulate: " + std::to_string(tr.rows()) + " snapshots, " + std::to_string(stats.events) +
                " events, 0 violations";
}

void run_mean_field(const RunConfig& c, Outputs& out, RunResult& res, json& js) {
  const auto lattice = config_lattice(c);
  const auto spec = model_factory(c)(lattice);
  const double T = c.real("experiment.T"), dt = c.real("experiment.mf_dt");
  MeanFieldOptions mo;
  mo.record_stride = std::max(1, static_cast<int>(std::ceil(T / dt) / 512.0));
  const auto mf = solve_mean_field(lattice, spec.model, spec.init, T, dt, mo);
  out.write("meanfield.csv", [&](std::ostream& os) {
    os << "t,k,U";
    for (int i = 1; i <= mf.types; ++i)
      for (int j = 1; j <= mf.configs; ++j) os << ",S_" << i << '_' << j;
    os << '\n';
    const int w = mf.types * mf.configs;
    for (std::size_t r = 0; r < mf.rows(); ++r) {
      auto u = mf.voltage(r);
      auto s = mf.occupancy(r);
      for (int k = 0; k < mf.n; ++k) {
        os << g17(mf.times[r]) << ',' << k << ',' << g17(u[k]);
        for (int q = 0; q < w; ++q) os << ',' << g17(s[static_cast<std::size_t>(k) * w + q]);
        os << '\n';
      }
    }
  });
  res.rows = static_cast<std::int64_t>(mf.rows() * mf.n);
  js["time_rows"] = mf.rows();
  js["n"] = mf.n;
  res.summary = "mean-field: " + std::to_string(res.rows) + " rows written, 0 violations";
}

void run_converge(const RunConfig& c, const RunOptions& opt, Outputs& out, RunResult& res, json& js) {
  ConvergenceConfig cc;
  cc.factory = model_factory(c);
  cc.inverse_spacings = c.int_list("experiment.n_list");
  cc.L = c.real("lattice.L");
  cc.D = c.real("lattice.D");
  cc.T = c.real("experiment.T");
  cc.samples = static_cast<int>(c.integer("experiment.samples"));
  cc.algorithm = parse_algorithm(c.text("algorithm.name"));
  cc.sim = config_sim_options(c);
  cc.mf_dt = c.real("experiment.mf_dt");
  if (c.has("experiment.p")) cc.p = c.real("experiment.p");
  cc.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  cc.workers = static_cast<int>(c.integer("run.workers"));
  const fs::path records_path = out.dir() / "records.csv";
  if (c.flag("io.resume") && fs::exists(records_path)) {
    std::ifstream in(records_path);
    cc.existing = read_records_csv(in);
    log_line(opt, "resuming: " + std::to_string(cc.existing.size()) + " stored rows");
  }
  const int total = static_cast<int>(cc.inverse_spacings.size()) * cc.samples;
  int finished = 0;
  std::mutex progress_mutex;
  cc.progress = [&](const ExperimentRecord& r) {
    std::lock_guard lock(progress_mutex);
    ++finished;
    log_line(opt, "[" + std::to_string(finished) + "/" + std::to_string(total) + "] " + r.run_id +
                      (r.failed ? " FAILED: " + r.message : " error_V=" + fmt("%.5f", r.error_V)));
  };
  const auto rows = convergence_study(cc);
  out.write("records.csv", [&](std::ostream& os) { write_records_csv(os, rows); });

  std::int64_t failed = 0;
  for (const auto& r : rows) failed += r.failed;
  res.rows = static_cast<std::int64_t>(rows.size());
  res.violations = failed;
  js["rows"] = rows.size();
  js["failed_rows"] = failed;

  PlotData plot;
  std::string slopes = "kind,slope,intercept,residual,points\n";
  auto fit_line = [&](const std::string& kind, const SlopeFit& f) {
    slopes += kind + "," + g17(f.slope) + "," + g17(f.intercept) + "," + g17(f.residual) + "," +
              std::to_string(f.points) + "\n";
  };
  const auto pts = mean_error_points(rows);
  for (const auto& r : rows)
    if (!r.failed) plot.add("sample_error", r.h, r.error_V);
  for (const auto& [h, m] : pts) plot.add("mean_error", h, m);
  if (pts.size() >= 2) {
    const auto fit = loglog_slope(pts);
    fit_line("mean", fit);
    res.slope = fit.slope;
    js["mean_slope"] = fit.slope;
    js["mean_intercept"] = fit.intercept;
    for (const auto& [h, m] : pts) plot.add("mean_fit", h, std::exp(fit.intercept) * std::pow(h, fit.slope));

    // per-experiment curves: sample index s across all h
    std::map<int, std::vector<std::pair<double, double>>> omega;
    for (const auto& r : rows) {
      if (r.failed || !(r.error_V > 0.0)) continue;
      const auto us = r.run_id.rfind("_s");
      omega[std::stoi(r.run_id.substr(us + 2))].emplace_back(r.h, r.error_V);
    }
    int decreasing = 0, fitted = 0;
    for (const auto& [s, p] : omega) {
      if (p.size() < 2) continue;
      const auto f = loglog_slope(p);
      fit_line("omega_" + std::to_string(s), f);
      ++fitted;
      decreasing += f.slope > 0.0;
    }
    js["omega_fits"] = fitted;
    js["omega_decreasing_fraction"] = fitted ? static_cast<double>(decreasing) / fitted : 0.0;

    // swap resampling over the per-h sample columns
    std::map<double, std::vector<double>> cols;
    for (const auto& r : rows)
      if (!r.failed && r.error_V > 0.0) cols[r.h].push_back(r.error_V);
    std::vector<std::vector<double>> columns;
    std::vector<double> hs;
    for (auto& [h, col] : cols) {
      hs.push_back(h);
      columns.push_back(col);
    }
    const int draws = static_cast<int>(c.integer("experiment.swap_draws"));
    if (draws > 0 && columns.size() >= 2) {
      const auto sl = swap_histogram(columns, hs, draws, cc.seed ^ 0x5A5Aull);
      const auto ms = mean_se(sl);
      js["swap_draws"] = draws;
      js["swap_mean_slope"] = ms.mean;
      js["swap_sd_slope"] = sample_sd(sl);
      const auto bins = histogram(sl, static_cast<int>(c.integer("experiment.bins")));
      out.write("histogram.csv", [&](std::ostream& os) {
        os << "lo,hi,count\n";
        for (const auto& b : bins) os << g17(b.lo) << ',' << g17(b.hi) << ',' << b.count << '\n';
      });
      for (const auto& b : bins) plot.add("swap_histogram", 0.5 * (b.lo + b.hi), static_cast<double>(b.count));
    }
  }
  out.text("slopes.csv", slopes);
  out.write("plot_data.csv", [&](std::ostream& os) { plot.write(os); });
  res.summary = "converge: " + std::to_string(rows.size()) + " rows written, " + std::to_string(failed) +
                " violations" + (res.slope ? ", mean slope " + fmt("%.4f", *res.slope) : "");
}

void run_algo_error(const RunConfig& c, Outputs& out, RunResult& res, json& js) {
  const auto taus = c.real_list("experiment.tau_list");
  PlotData plot;
  std::string table = "h,tau,estimate,se,site,failed\n";
  json cells = json::array();
  std::vector<AlgoErrorEstimate> ests;
  for (double tau : taus) {
    AlgoErrorConfig ac;
    ac.factory = model_factory(c);
    ac.h = c.real("experiment.h");
    ac.L = c.real("lattice.L");
    ac.D = c.real("lattice.D");
    ac.T = c.real("experiment.T");
    ac.samples = static_cast<int>(c.integer("experiment.samples"));
    ac.sim = config_sim_options(c);
    ac.sim.tau = tau;
    ac.sim.dt_max = std::min(ac.sim.dt_max, tau);
    ac.bootstrap = static_cast<int>(c.integer("experiment.bootstrap"));
    ac.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
    ac.workers = static_cast<int>(c.integer("run.workers"));
    auto est = algorithmic_error(ac);
    table += g17(ac.h) + "," + g17(tau) + "," + g17(est.estimate) + "," + g17(est.se) + "," +
             std::to_string(est.site) + "," + std::to_string(est.failed) + "\n";
    const std::string tag = "tau_" + fmt("%g", tau);
    for (std::size_t r = 0; r < est.times.size(); ++r) {
      plot.add("pet_mean_" + tag, est.times[r], est.mean_first[r]);
      plot.add("il_mean_" + tag, est.times[r], est.mean_second[r]);
    }
    cells.push_back({{"tau", tau}, {"estimate", est.estimate}, {"se", est.se}, {"failed", est.failed}});
    res.violations += est.failed;
    ests.push_back(std::move(est));
  }
  out.text("algo_error.csv", table);
  out.write("plot_data.csv", [&](std::ostream& os) { plot.write(os); });
  res.rows = static_cast<std::int64_t>(taus.size());
  js["cells"] = cells;
  std::string trend;
  if (ests.size() >= 2) {
    // compare the largest and smallest step
    std::size_t big = 0, small = 0;
    for (std::size_t q = 0; q < taus.size(); ++q) {
      if (taus[q] > taus[big]) big = q;
      if (taus[q] < taus[small]) small = q;
    }
    const double combined = std::hypot(ests[big].se, ests[small].se);
    const bool ok = ests[small].estimate <= ests[big].estimate ||
                    ests[small].estimate - ests[big].estimate <= 2.0 * combined;
    js["smaller_tau_agrees_better"] = ok;
    trend = ok ? ", smaller tau agrees better" : ", smaller tau does NOT agree better";
  }
  res.summary = "algo-error: " + std::to_string(res.rows) + " rows written, " + std::to_string(res.violations) +
                " violations" + trend;
}

void run_corrector_check(const RunConfig& c, Outputs& out, RunResult& res, json& js) {
  const auto ns = c.int_list("experiment.corrector_n");
  const auto ps = c.real_list("experiment.corrector_p");
  const int trials = static_cast<int>(c.integer("experiment.trials"));
  const double L = c.real("experiment.corrector_L"), D = c.real("lattice.D");
  const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  std::string table =
      "n,p,N,ceiling_l1,observed_l1,ceiling_diff,observed_diff,ceiling_jump,observed_jump,violations\n";
  int cell = 0;
  for (int n : ns) {
    for (double p : ps) {
      auto rep = corrector_bound_report(n, p, trials, seed + static_cast<std::uint64_t>(cell++), L, D);
      // the l1 ceiling is attained exactly by the profile itself
      const auto nu = corrector_profile(rep.N, n);
      const double l1 = profile_l1(nu);
      if (std::fabs(l1 / D - rep.ceiling.l1) > 1e-12) ++rep.violations;
      table += std::to_string(n) + "," + g17(p) + "," + std::to_string(rep.N) + "," + g17(rep.ceiling.l1) + "," +
               g17(rep.observed_l1) + "," + g17(rep.ceiling.diff) + "," + g17(rep.observed_diff) + "," +
               g17(rep.ceiling.jump) + "," + g17(rep.observed_jump) + "," + std::to_string(rep.violations) + "\n";
      res.violations += rep.violations;
      ++res.rows;
    }
  }
  out.text("corrector.csv", table);
  js["rows"] = res.rows;
  res.summary = "corrector-check: " + std::to_string(res.rows) + " rows written, " +
                std::to_string(res.violations) + " violations";
}

void run_poisson_lln(const RunConfig& c, Outputs& out, RunResult& res, json& js) {
  const std::string ck = c.text("experiment.clocks");
  const ClockKind clocks = ck == "random" ? ClockKind::Random : ck == "zero" ? ClockKind::Zero : ClockKind::Identity;
  const auto windows = c.int_list("experiment.windows");
  const auto rep = poisson_lln_check(c.real("experiment.gamma"), windows, c.real("experiment.T"),
                                     static_cast<int>(c.integer("experiment.trials")),
                                     static_cast<std::uint64_t>(c.integer("run.seed")), c.real("experiment.tau_T"), clocks);
  std::string table = "n,threshold,exceedances,max_sup,mean_final,se_final\n";
  PlotData plot;
  for (const auto& w : rep.windows) {
    table += std::to_string(w.n) + "," + g17(w.threshold) + "," + std::to_string(w.exceedances) + "," +
             g17(w.max_sup) + "," + g17(w.final_sum.mean) + "," + g17(w.final_sum.se) + "\n";
    plot.add("max_sup", w.n, w.max_sup);
    plot.add("threshold", w.n, w.threshold);
  }
  // eventual compliance: the largest three windows must not exceed
  const std::size_t tail = std::min<std::size_t>(3, rep.windows.size());
  for (std::size_t q = rep.windows.size() - tail; q < rep.windows.size(); ++q)
    res.violations += rep.windows[q].exceedances;
  out.text("poisson.csv", table);
  out.write("plot_data.csv", [&](std::ostream& os) { plot.write(os); });
  res.rows = static_cast<std::int64_t>(rep.windows.size());
  js["growth_exponent"] = rep.growth;
  js["tail_exceedances"] = res.violations;
  res.summary = "poisson-lln: " + std::to_string(res.rows) + " rows written, " + std::to_string(res.violations) +
                " violations";
}

void run_hh_demo(const RunConfig& c, const RunOptions& opt, Outputs& out, RunResult& res, json& js) {
  RunConfig hc = c;
  if (hc.text("model.preset") != "hodgkin-huxley") set_config_value(hc, "model.preset", "hodgkin-huxley");
  const CircleLattice lattice(1, 1.0, 0.0);
  auto spec = model_factory(hc)(lattice);
  const double v = c.real("experiment.clamp_v");
  // voltage clamp: no ionic drift, bounds evaluated at the clamp
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 16; ++j) spec.model.set_drift(i, j, ScalarFn{});
  spec.model.set_range({v, v});
  const int runs = static_cast<int>(c.integer("experiment.runs"));
  const double T = c.real("experiment.hh_T");
  const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  const auto alg = parse_algorithm(c.text("algorithm.name"));
  const auto sim = config_sim_options(c);
  std::vector<int> na(runs), k(runs);
  std::vector<char> ok(runs, 0);
  parallel_for(runs, static_cast<int>(c.integer("run.workers")), [&](int r) {
    SystemState state(1, 3, 16);
    state.V[0] = v;
    Rng rng(seed, static_cast<std::uint64_t>(r));
    struct Null : TrajectoryObserver {
      void on_record(const SystemState&) override {}
    } sink;
    try {
      simulate(alg, lattice, spec.model, state, T, rng, sim, sink);
      na[r] = state.occupancy(0, 0);
      k[r] = state.occupancy(0, 1);
      ok[r] = 1;
    } catch (const Error& e) {
      log_line(opt, "hh run " + std::to_string(r) + " failed: " + e.what());
    }
  });
  int good = 0;
  for (char o : ok) good += o;
  res.violations += runs - good;
  if (good < 2) throw ModelError("hh-demo: no successful runs");
  // sodium bits 0-2 are m gates and bit 3 the h gate; potassium has four n gates
  auto rate = [&](int i, int a, int b) { return spec.model.rate(i, a, b, v); };
  const double m_inf = rate(0, 0, 1) / (rate(0, 0, 1) + rate(0, 1, 0));
  const double h_inf = rate(0, 0, 8) / (rate(0, 0, 8) + rate(0, 8, 0));
  const double n_inf = rate(1, 0, 1) / (rate(1, 0, 1) + rate(1, 1, 0));
  struct Row {
    std::string channel;
    double observed, se, expected, gate_product, z;
  };
  std::vector<Row> table;
  auto summarize = [&](const std::string& name, const std::vector<int>& cfg, int bits, double expected) {
    double hits = 0.0;
    std::vector<double> bit_open(bits, 0.0);
    for (int r = 0; r < runs; ++r) {
      if (!ok[r]) continue;
      hits += cfg[r] == 15;
      for (int b = 0; b < bits; ++b) bit_open[b] += (cfg[r] >> b) & 1;
    }
    const double p = hits / good;
    const double se = std::sqrt(std::max(p * (1 - p), expected * (1 - expected)) / good);
    double prod = 1.0;
    for (double b : bit_open) prod *= b / good;
    table.push_back({name, p, se, expected, prod, (p - expected) / se});
  };
  summarize("sodium", na, 4, m_inf * m_inf * m_inf * h_inf);
  summarize("potassium", k, 4, std::pow(n_inf, 4));
  std::string csv = "channel,observed,se,expected,product_of_gate_fractions,z\n";
  json chans = json::array();
  for (const auto& r : table) {
    csv += r.channel + "," + g17(r.observed) + "," + g17(r.se) + "," + g17(r.expected) + "," + g17(r.gate_product) +
           "," + g17(r.z) + "\n";
    if (std::fabs(r.z) > 3.0) ++res.violations;
    chans.push_back({{"channel", r.channel}, {"observed", r.observed}, {"expected", r.expected}, {"z", r.z}});
  }
  out.text("hh.csv", csv);
  res.rows = static_cast<std::int64_t>(table.size());
  js["channels"] = chans;
  js["clamp_v"] = v;
  js["runs"] = runs;
  res.summary = "hh-demo: " + std::to_string(res.rows) + " rows written, " + std::to_string(res.violations) +
                " violations";
}

}  // namespace

RunResult run(const RunConfig& config, const RunOptions& options) {
  const auto sub = config.subcommand();
  if (!sub) throw ConfigError("no subcommand given", 0, "run.subcommand");
  RunResult res;
  fs::path dir = config.text("io.out");
  if (!options.out_dir_fixed)
    if (const char* env = std::getenv("IONCHAN_OUT_DIR"); env && *env) dir = env;
  res.out_dir = dir.string();
  Outputs out(dir, res);
  out.text("resolved.cfg", emit_config(config));
  json js;
  js["subcommand"] = subcommand_name(*sub);
  js["seed"] = config.integer("run.seed");
  const auto start = std::chrono::steady_clock::now();
  switch (*sub) {
    case Subcommand::Simulate: run_simulate(config, out, res, js); break;
    case Subcommand::MeanField: run_mean_field(config, out, res, js); break;
    case Subcommand::Converge: run_converge(config, options, out, res, js); break;
    case Subcommand::AlgoError: run_algo_error(config, out, res, js); break;
    case Subcommand::CorrectorCheck: run_corrector_check(config, out, res, js); break;
    case Subcommand::PoissonLln: run_poisson_lln(config, out, res, js); break;
    case Subcommand::HhDemo: run_hh_demo(config, options, out, res, js); break;
  }
  js["violations"] = res.violations;
  js["rows"] = res.rows;
  js["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.exit_code = res.violations == 0 ? 0 : 1;
  js["exit_code"] = res.exit_code;
  json files = json::array();
  for (const auto& f : res.files) files.push_back(fs::path(f).filename().string());
  files.push_back("summary.json");
  js["files"] = files;
  out.text("summary.json", js.dump(2) + "\n");
  return res;
}

}  // namespace ionchan

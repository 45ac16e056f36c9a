#include "ionchan/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "ionchan/averaging.hpp"
#include "ionchan/error.hpp"
#include "ionchan/rng.hpp"

namespace ionchan {

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (count <= 0) return;
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int q = 0; q < count; ++q) body(q);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int q = next++; q < count; q = next++) body(q);
    });
}

// ---------------------------------------------------------------------------
// error metrics

double sup_error(const Trajectory& stoch, const MeanFieldTrajectory& det, double T) {
  if (stoch.n != det.n) throw ModelError("stochastic and mean-field lattices differ in size");
  if (stoch.rows() == 0 || det.rows() == 0) throw ModelError("empty trajectory");
  std::vector<double> grid;
  for (double t : stoch.times)
    if (t <= T) grid.push_back(t);
  for (double t : det.times)
    if (t <= T) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> a(stoch.n), b(det.n);
  double worst = 0.0;
  for (double t : grid) {
    stoch.voltage_at(t, a);
    det.voltage_at(t, b);
    for (int k = 0; k < stoch.n; ++k) worst = std::max(worst, std::fabs(a[k] - b[k]));
  }
  return worst;
}

SupErrorObserver::SupErrorObserver(const MeanFieldTrajectory& det, double T, const CircleLattice* lattice,
                                   int window)
    : det_(det), T_(T), lattice_(lattice), window_(window) {
  if (lattice_ && det_.S.empty()) throw ModelError("Zbar error needs the mean-field occupancy");
  v_tmp_.resize(det.n);
  u_tmp_.resize(det.n);
}

void SupErrorObserver::compare(double t, std::span<const double> v) {
  det_.voltage_at(t, u_tmp_);
  for (int k = 0; k < det_.n; ++k) error_ = std::max(error_, std::fabs(v[k] - u_tmp_[k]));
}

void SupErrorObserver::on_record(const SystemState& state) {
  const double t = state.t;
  if (state.size() != det_.n) throw ModelError("stochastic and mean-field lattices differ in size");
  if (t > T_) return;
  const auto& times = det_.times;
  while (next_row_ < times.size() && times[next_row_] < t) {
    const double td = times[next_row_++];
    if (!started_) {
      compare(td, state.V);
      continue;
    }
    if (td <= t_prev_) continue;
    const double w = (td - t_prev_) / (t - t_prev_);
    for (int k = 0; k < det_.n; ++k) v_tmp_[k] = (1.0 - w) * v_prev_[k] + w * state.V[k];
    compare(td, v_tmp_);
  }
  while (next_row_ < times.size() && times[next_row_] == t) ++next_row_;
  compare(t, state.V);
  if (lattice_ && window_ > 0) {
    const auto avg = local_average_window(state, *lattice_, window_);
    s_tmp_.resize(avg.zbar.size());
    det_.occupancy_at(t, s_tmp_);
    for (std::size_t q = 0; q < s_tmp_.size(); ++q)
      zbar_error_ = std::max(zbar_error_, std::fabs(avg.zbar[q] - s_tmp_[q]));
  }
  started_ = true;
  t_prev_ = t;
  v_prev_ = state.V;
}

// ---------------------------------------------------------------------------
// convergence study

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t run_seed(std::uint64_t master, int inverse_spacing, int sample) {
  return mix(mix(mix(master) ^ static_cast<std::uint64_t>(inverse_spacing)) ^ static_cast<std::uint64_t>(sample));
}

std::string run_id(int inverse_spacing, int sample) {
  return "n" + std::to_string(inverse_spacing) + "_s" + std::to_string(sample);
}

std::vector<ExperimentRecord> convergence_study(const ConvergenceConfig& cfg) {
  if (!cfg.factory) throw ModelError("convergence study needs a model factory");
  if (cfg.samples < 1) throw ModelError("convergence study needs at least one sample");
  if (cfg.inverse_spacings.empty()) throw ModelError("convergence study needs an h grid");
  std::map<std::string, ExperimentRecord> done;
  for (const auto& r : cfg.existing)
    if (!r.failed) done.emplace(r.run_id, r);

  const int levels = static_cast<int>(cfg.inverse_spacings.size());
  std::vector<CircleLattice> lattices;
  for (int ni : cfg.inverse_spacings) {
    if (ni < 1) throw ModelError("inverse spacings must be positive");
    lattices.push_back(CircleLattice::from_spacing(1.0 / ni, cfg.L, cfg.D));
  }
  std::vector<int> windows(levels, 0);
  if (cfg.p)
    for (int l = 0; l < levels; ++l)
      windows[l] = clamp_window(window_size(lattices[l].h(), *cfg.p), lattices[l].n());

  // the reference solution is shared by every sample at one h
  std::vector<std::optional<MeanFieldTrajectory>> reference(levels);
  std::vector<std::string> reference_error(levels);
  parallel_for(levels, cfg.workers, [&](int l) {
    try {
      const auto spec = cfg.factory(lattices[l]);
      MeanFieldOptions mo;
      const double steps = std::ceil(cfg.T / cfg.mf_dt);
      mo.record_stride = std::max(1, static_cast<int>(steps / 1024.0));
      mo.keep_occupancy = cfg.p.has_value();
      reference[l] = solve_mean_field(lattices[l], spec.model, spec.init, cfg.T, cfg.mf_dt, mo);
    } catch (const Error& e) {
      reference_error[l] = std::string("mean field: ") + e.what();
    }
  });

  const int total = levels * cfg.samples;
  std::vector<ExperimentRecord> rows(total);
  parallel_for(total, cfg.workers, [&](int q) {
    const int l = q / cfg.samples, s = q % cfg.samples;
    const int ni = cfg.inverse_spacings[l];
    ExperimentRecord& r = rows[q];
    r.run_id = run_id(ni, s);
    if (auto it = done.find(r.run_id); it != done.end()) {
      r = it->second;
      return;
    }
    const CircleLattice& lattice = lattices[l];
    r.algorithm = cfg.algorithm;
    r.n = lattice.n();
    r.h = lattice.h();
    r.p = cfg.p.value_or(-1.0);
    r.seed = run_seed(cfg.seed, ni, s);
    r.T = cfg.T;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (!reference[l]) throw ModelError(reference_error[l]);
      const auto spec = cfg.factory(lattice);
      Rng init_rng(r.seed, 0);
      auto state = sample_initial_state(lattice, spec.model, spec.init, init_rng);
      Rng rng(r.seed, 1);
      SupErrorObserver obs(*reference[l], cfg.T, cfg.p ? &lattice : nullptr, windows[l]);
      const auto stats = simulate(cfg.algorithm, lattice, spec.model, state, cfg.T, rng, cfg.sim, obs);
      r.error_V = obs.error();
      if (cfg.p) r.error_Zbar = obs.zbar_error();
      r.events = stats.events;
    } catch (const Error& e) {
      r.failed = true;
      r.message = e.what();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cfg.progress) cfg.progress(r);
  });
  return rows;
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t q = 0; q < line.size(); ++q) {
    const char c = line[q];
    if (quoted) {
      if (c == '"' && q + 1 < line.size() && line[q + 1] == '"') {
        cur += '"';
        ++q;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

constexpr const char* kRecordHeader = "run_id,algorithm,n,h,p,seed,T,error_V,error_Zbar,wall_time,events,status,message";

}  // namespace

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& rows) {
  os << kRecordHeader << '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::string zbar = r.error_Zbar ? "" : "nan";
    if (r.error_Zbar) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.error_Zbar);
      zbar = buf;
    }
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.17g,%.17g,%llu,%.17g,%.17g,%s,%.6f,%lld,%s,", csv_quote(r.run_id).c_str(),
                  algorithm_name(r.algorithm), r.n, r.h, r.p, static_cast<unsigned long long>(r.seed), r.T, r.error_V,
                  zbar.c_str(), r.wall_time, static_cast<long long>(r.events), r.failed ? "failed" : "ok");
    os << buf << csv_quote(r.message) << '\n';
  }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kRecordHeader) throw IoError("not a records table");
  std::vector<ExperimentRecord> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 13) throw IoError("records table line " + std::to_string(lineno) + ": expected 13 fields");
    try {
      ExperimentRecord r;
      r.run_id = f[0];
      r.algorithm = parse_algorithm(f[1]);
      r.n = std::stoi(f[2]);
      r.h = std::stod(f[3]);
      r.p = std::stod(f[4]);
      r.seed = std::stoull(f[5]);
      r.T = std::stod(f[6]);
      r.error_V = std::stod(f[7]);
      if (f[8] != "nan") r.error_Zbar = std::stod(f[8]);
      r.wall_time = std::stod(f[9]);
      r.events = std::stoll(f[10]);
      r.failed = f[11] != "ok";
      r.message = f[12];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw IoError("records table line " + std::to_string(lineno) + ": malformed field");
    }
  }
  return rows;
}

std::vector<std::pair<double, double>> mean_error_points(const std::vector<ExperimentRecord>& rows) {
  std::map<double, std::vector<double>> by_h;
  for (const auto& r : rows)
    if (!r.failed) by_h[r.h].push_back(r.error_V);
  std::vector<std::pair<double, double>> pts;
  for (auto it = by_h.rbegin(); it != by_h.rend(); ++it) pts.emplace_back(it->first, mean_se(it->second).mean);
  return pts;
}

std::vector<double> swap_histogram(const std::vector<std::vector<double>>& columns, const std::vector<double>& hs,
                                   int draws, std::uint64_t seed) {
  if (columns.size() != hs.size()) throw ModelError("swap histogram needs one column per h");
  if (columns.size() < 2) throw ModelError("swap histogram needs at least two h values");
  for (const auto& c : columns)
    if (c.empty()) throw ModelError("swap histogram column is empty");
  Rng rng(seed);
  std::vector<double> slopes;
  slopes.reserve(std::max(draws, 0));
  std::vector<std::pair<double, double>> pts(columns.size());
  for (int d = 0; d < draws; ++d) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      pts[c] = {hs[c], columns[c][rng.index(static_cast<int>(columns[c].size()))]};
    slopes.push_back(loglog_slope(pts).slope);
  }
  return slopes;
}

// ---------------------------------------------------------------------------
// algorithmic error

namespace {

// Samples V at one site on a uniform time grid by linear interpolation
// between consecutive records.
class SiteSampler : public TrajectoryObserver {
 public:
  SiteSampler(int site, double T, int intervals) : site_(site), T_(T), intervals_(intervals) {
    values_.reserve(intervals + 1);
  }
  void on_record(const SystemState& state) override {
    const double t = state.t, v = state.V[site_];
    while (static_cast<int>(values_.size()) <= intervals_) {
      const double tg = T_ * static_cast<double>(values_.size()) / intervals_;
      if (tg > t) break;
      if (!started_ || tg >= t) {
        values_.push_back(v);
      } else {
        const double w = (tg - t_prev_) / (t - t_prev_);
        values_.push_back((1.0 - w) * v_prev_ + w * v);
      }
    }
    started_ = true;
    t_prev_ = t;
    v_prev_ = v;
  }
  std::vector<double>& values() { return values_; }

 private:
  int site_;
  double T_;
  int intervals_;
  bool started_ = false;
  double t_prev_ = 0.0, v_prev_ = 0.0;
  std::vector<double> values_;
};

double sup_mean_gap(const std::vector<std::vector<double>>& a, const std::vector<int>& ia,
                    const std::vector<std::vector<double>>& b, const std::vector<int>& ib, std::vector<double>* ma,
                    std::vector<double>* mb) {
  const std::size_t len = a[ia.front()].size();
  std::vector<double> sa(len, 0.0), sb(len, 0.0);
  for (int q : ia)
    for (std::size_t r = 0; r < len; ++r) sa[r] += a[q][r];
  for (int q : ib)
    for (std::size_t r = 0; r < len; ++r) sb[r] += b[q][r];
  double worst = 0.0;
  for (std::size_t r = 0; r < len; ++r) {
    sa[r] /= ia.size();
    sb[r] /= ib.size();
    worst = std::max(worst, std::fabs(sa[r] - sb[r]));
  }
  if (ma) *ma = std::move(sa);
  if (mb) *mb = std::move(sb);
  return worst;
}

}  // namespace

AlgoErrorEstimate algorithmic_error(const AlgoErrorConfig& cfg) {
  if (!cfg.factory) throw ModelError("algorithmic error needs a model factory");
  if (cfg.samples < 2) throw ModelError("algorithmic error needs at least two samples");
  const auto lattice = CircleLattice::from_spacing(cfg.h, cfg.L, cfg.D);
  const auto spec = cfg.factory(lattice);
  const int n = lattice.n();
  AlgoErrorEstimate est;
  est.site = lattice.wrap(std::lround(cfg.L / 2.0 / lattice.h()));
  constexpr int kIntervals = 512;
  for (int r = 0; r <= kIntervals; ++r) est.times.push_back(cfg.T * r / kIntervals);

  std::vector<std::vector<double>> paths[2];
  std::vector<char> ok[2];
  for (int a = 0; a < 2; ++a) {
    paths[a].assign(cfg.samples, {});
    ok[a].assign(cfg.samples, 0);
  }
  parallel_for(2 * cfg.samples, cfg.workers, [&](int q) {
    const int a = q / cfg.samples, s = q % cfg.samples;
    const Algorithm alg = a == 0 ? cfg.first : cfg.second;
    const std::uint64_t seed = run_seed(cfg.seed, n, s);
    try {
      Rng init_rng(seed, 0);
      auto state = sample_initial_state(lattice, spec.model, spec.init, init_rng);
      Rng rng(seed, 1);
      SiteSampler sampler(est.site, cfg.T, kIntervals);
      SimOptions opt = cfg.sim;
      opt.dt_record = cfg.T / kIntervals;
      simulate(alg, lattice, spec.model, state, cfg.T, rng, opt, sampler);
      if (static_cast<int>(sampler.values().size()) != kIntervals + 1) throw ModelError("incomplete path");
      paths[a][s] = std::move(sampler.values());
      ok[a][s] = 1;
    } catch (const Error&) {
      ok[a][s] = 0;
    }
  });
  std::vector<int> idx[2];
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < cfg.samples; ++s) {
      if (ok[a][s]) idx[a].push_back(s);
      else ++est.failed;
    }
  if (idx[0].size() < 2 || idx[1].size() < 2) throw ModelError("too many failed runs for an algorithmic-error estimate");
  est.estimate = sup_mean_gap(paths[0], idx[0], paths[1], idx[1], &est.mean_first, &est.mean_second);
  Rng boot(cfg.seed, 0xB007);
  std::vector<double> reps;
  std::vector<int> ra, rb;
  // both arms share seeds, so resample whole sample indices to keep the pairing
  for (int b = 0; b < cfg.bootstrap; ++b) {
    ra.clear();
    rb.clear();
    for (int q = 0; q < cfg.samples; ++q) {
      const int s = boot.index(cfg.samples);
      if (ok[0][s]) ra.push_back(s);
      if (ok[1][s]) rb.push_back(s);
    }
    if (ra.empty() || rb.empty()) continue;
    reps.push_back(sup_mean_gap(paths[0], ra, paths[1], rb, nullptr, nullptr));
  }
  est.se = sample_sd(reps);
  return est;
}

// ---------------------------------------------------------------------------
// Poisson law-of-large-numbers check

namespace {

struct TrialResult {
  double sup = 0.0;
  double final_sum = 0.0;
};

TrialResult identity_trial(int n, double T, double tau_T, Rng& rng) {
  const double end = std::min(T, tau_T);
  const auto count = rng.poisson(n * end);
  std::vector<double> s(count);
  for (auto& x : s) x = rng.uniform() * end;
  std::sort(s.begin(), s.end());
  double sup = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double comp = n * s[j];
    sup = std::max({sup, std::fabs(static_cast<double>(j) - comp), std::fabs(static_cast<double>(j + 1) - comp)});
  }
  const double fin = static_cast<double>(count) - n * end;
  return {std::max(sup, std::fabs(fin)), fin};
}

TrialResult random_clock_trial(int n, double T, double tau_T, Rng& rng) {
  // tau_k(t) = min(c_k t, tau_T), c_k uniform on [1/2, 1]
  std::vector<double> speed(n), saturation(n), events;
  for (int k = 0; k < n; ++k) {
    speed[k] = 0.5 + 0.5 * rng.uniform();
    saturation[k] = tau_T / speed[k];
    const double reach = std::min(speed[k] * T, tau_T);
    const auto m = rng.poisson(reach);
    for (std::int64_t q = 0; q < m; ++q) events.push_back(rng.uniform() * reach / speed[k]);
  }
  std::sort(events.begin(), events.end());
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return saturation[a] < saturation[b]; });
  double slope = 0.0;
  for (double c : speed) slope += c;
  int saturated = 0;
  std::size_t ptr = 0;
  auto compensator = [&](double t) {
    while (ptr < order.size() && saturation[order[ptr]] <= t) {
      slope -= speed[order[ptr]];
      ++saturated;
      ++ptr;
    }
    return t * slope + tau_T * saturated;
  };
  double sup = 0.0;
  for (std::size_t j = 0; j < events.size(); ++j) {
    const double comp = compensator(events[j]);
    sup = std::max({sup, std::fabs(static_cast<double>(j) - comp), std::fabs(static_cast<double>(j + 1) - comp)});
  }
  const double fin = static_cast<double>(events.size()) - compensator(T);
  return {std::max(sup, std::fabs(fin)), fin};
}

}  // namespace

PoissonLlnReport poisson_lln_check(double gamma, const std::vector<int>& windows, double T, int trials,
                                   std::uint64_t seed, double tau_T, ClockKind clocks) {
  if (!(T > 0.0)) throw ModelError("Poisson check needs T > 0");
  if (!(gamma > 0.0)) throw ModelError("Poisson check needs gamma > 0");
  if (trials < 1) throw ModelError("Poisson check needs at least one trial");
  if (!(tau_T >= 0.0)) throw ModelError("clock cap must be nonnegative");
  for (int w : windows)
    if (w < 1) throw ModelError("window sizes must be positive");
  PoissonLlnReport rep;
  rep.gamma = gamma;
  rep.trials = trials;
  if (windows.size() >= 2) {
    // sum_i n_i^{-gamma} converges when n_i grows like i^a with a gamma > 1
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < windows.size(); ++i) pts.emplace_back(static_cast<double>(i + 1), windows[i]);
    const bool flat = std::all_of(windows.begin(), windows.end(), [&](int w) { return w == windows.front(); });
    rep.growth = flat ? 0.0 : loglog_slope(pts).slope;
    rep.admissible = rep.growth * gamma > 1.0;
    if (!rep.admissible) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "gamma = %g is not admissible: window sizes grow like i^%.3g, so sum n_i^-gamma diverges",
                    gamma, rep.growth);
      throw ModelError(buf);
    }
  }
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const int n = windows[w];
    PoissonWindow pw;
    pw.n = n;
    pw.threshold = 6.0 * gamma * std::sqrt(static_cast<double>(n)) * std::log(static_cast<double>(n));
    std::vector<double> finals;
    for (int t = 0; t < trials; ++t) {
      Rng rng(seed, w * 1000003ull + t);
      TrialResult r;
      if (clocks == ClockKind::Identity) r = identity_trial(n, T, tau_T, rng);
      else if (clocks == ClockKind::Random) r = random_clock_trial(n, T, tau_T, rng);
      pw.max_sup = std::max(pw.max_sup, r.sup);
      if (r.sup > pw.threshold) ++pw.exceedances;
      finals.push_back(r.final_sum);
    }
    pw.final_sum = mean_se(finals);
    rep.windows.push_back(pw);
  }
  return rep;
}

}  // namespace ionchan

#include "ionchan/stoch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "ionchan/error.hpp"

namespace ionchan {

RateBound rate_bound(const ChannelModel& model, int n_sites, double margin) {
  if (n_sites < 1) throw ModelError("rate bound needs at least one site");
  if (!(margin >= 0.0)) throw ModelError("rate-bound margin must be nonnegative");
  RateBound b;
  b.slots = model.thinning_slots();
  b.per_type.assign(model.types(), 0.0);
  const VoltageRange range = model.range();
  constexpr int kGrid = 1025;
  for (int i = 0; i < model.types(); ++i) {
    if (!model.stochastic(i)) continue;
    if (auto declared = model.declared_bound(i)) {
      b.per_type[i] = *declared;
      continue;
    }
    double peak = 0.0;
    const int points = range.max > range.min ? kGrid : 1;
    for (int g = 0; g < points; ++g) {
      const double v = points == 1 ? range.min : range.min + (range.max - range.min) * g / (points - 1);
      for (int a = 0; a < model.configs(); ++a) {
        const double exit = model.exit_rate(i, a, v);
        if (!std::isfinite(exit))
          throw ModelError("exit rate of type " + std::to_string(i + 1) +
                           " is unbounded on the declared voltage range");
        peak = std::max(peak, exit);
      }
    }
    b.per_type[i] = (1.0 + margin) * peak;
  }
  for (double l : b.per_type) b.lambda_local += l;
  b.Lambda = static_cast<double>(n_sites) * b.slots * b.lambda_local;
  return b;
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Pet: return "pet";
    case Algorithm::Il: return "il";
    case Algorithm::Oracle: return "oracle";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "pet") return Algorithm::Pet;
  if (name == "il") return Algorithm::Il;
  if (name == "oracle") return Algorithm::Oracle;
  throw ConfigError("unknown algorithm '" + name + "' (expected pet, il or oracle)");
}

// ---------------------------------------------------------------------------
// trajectory storage

void Recorder::on_record(const SystemState& state) {
  auto& tr = traj_;
  if (tr.times.empty()) {
    tr.n = state.size();
    tr.types = state.types;
    tr.configs = state.configs;
  }
  if (!tr.times.empty() && state.t == tr.times.back()) {
    // same instant as the previous row (grid point coinciding with a jump): keep the later state
    std::copy(state.V.begin(), state.V.end(), tr.V.end() - tr.n);
    if (keep_occ_) std::copy(state.occ.begin(), state.occ.end(), tr.occ.end() - state.occ.size());
    return;
  }
  tr.times.push_back(state.t);
  tr.V.insert(tr.V.end(), state.V.begin(), state.V.end());
  if (keep_occ_) tr.occ.insert(tr.occ.end(), state.occ.begin(), state.occ.end());
}

void Trajectory::voltage_at(double t, std::span<double> out) const {
  if (times.empty()) throw ModelError("empty trajectory");
  if (t <= times.front() || rows() == 1) {
    std::copy_n(V.begin(), n, out.begin());
    return;
  }
  if (t >= times.back()) {
    auto last = voltage(rows() - 1);
    std::copy(last.begin(), last.end(), out.begin());
    return;
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin()), lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  auto a = voltage(lo), b = voltage(hi);
  for (int k = 0; k < n; ++k) out[k] = (1.0 - w) * a[k] + w * b[k];
}

void Trajectory::write_csv(std::ostream& os) const {
  char buf[96];
  os << "t,k,V\n";
  for (std::size_t r = 0; r < rows(); ++r) {
    auto v = voltage(r);
    for (int k = 0; k < n; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g\n", times[r], k, v[k]);
      os << buf;
    }
  }
}

void Trajectory::write_events_csv(std::ostream& os) const {
  char buf[96];
  os << "t,k,i,from,to\n";
  for (const Event& e : events) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%d,%d\n", e.t, e.k, e.i + 1, e.from + 1, e.to + 1);
    os << buf;
  }
}

namespace {

constexpr char kMagic[8] = {'I', 'C', 'H', 'T', 'R', 'A', 'J', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void put_array(std::ostream& os, const std::vector<T>& v) {
  put<std::uint64_t>(os, v.size());
  if (!v.empty()) os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated trajectory file");
  return v;
}

template <class T>
std::vector<T> get_array(std::istream& is) {
  const auto count = get<std::uint64_t>(is);
  if (count > (std::uint64_t{1} << 36)) throw IoError("corrupt trajectory file");
  std::vector<T> v(count);
  if (count && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T))))
    throw IoError("truncated trajectory file");
  return v;
}

}  // namespace

void Trajectory::write_binary(std::ostream& os) const {
  os.write(kMagic, sizeof kMagic);
  put<std::int32_t>(os, n);
  put<std::int32_t>(os, types);
  put<std::int32_t>(os, configs);
  put_array(os, times);
  put_array(os, V);
  put_array(os, occ);
  put<std::uint64_t>(os, events.size());
  for (const Event& e : events) {
    put(os, e.t);
    put<std::int32_t>(os, e.k);
    put<std::int32_t>(os, e.i);
    put<std::int32_t>(os, e.from);
    put<std::int32_t>(os, e.to);
  }
  if (!os) throw IoError("failed writing trajectory");
}

Trajectory Trajectory::read_binary(std::istream& is) {
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("not a trajectory file");
  Trajectory t;
  t.n = get<std::int32_t>(is);
  t.types = get<std::int32_t>(is);
  t.configs = get<std::int32_t>(is);
  t.times = get_array<double>(is);
  t.V = get_array<double>(is);
  t.occ = get_array<int>(is);
  const auto count = get<std::uint64_t>(is);
  if (count > (std::uint64_t{1} << 36)) throw IoError("corrupt trajectory file");
  t.events.reserve(count);
  for (std::uint64_t q = 0; q < count; ++q) {
    Event e{};
    e.t = get<double>(is);
    e.k = get<std::int32_t>(is);
    e.i = get<std::int32_t>(is);
    e.from = get<std::int32_t>(is);
    e.to = get<std::int32_t>(is);
    t.events.push_back(e);
  }
  if (t.V.size() != t.times.size() * static_cast<std::size_t>(t.n)) throw IoError("corrupt trajectory file");
  return t;
}

// ---------------------------------------------------------------------------
// shared machinery

namespace {

void check_inputs(const CircleLattice& lattice, const ChannelModel& model, const SystemState& state,
                  double T) {
  if (state.size() != lattice.n()) throw ModelError("state size does not match the lattice");
  if (state.types != model.types() || state.configs != model.configs() || !state.one_hot_valid())
    throw ModelError("state occupancy does not match the model");
  if (!(T > state.t)) throw ModelError("horizon must exceed the start time");
}

class RecordGrid {
 public:
  RecordGrid(double t0, double T, double dt_record) : t0_(t0), T_(T) {
    const double step = dt_record > 0.0 ? dt_record : (T - t0) / 512.0;
    count_ = std::max<std::int64_t>(1, std::llround((T - t0) / step));
  }
  double next_time() const {
    if (next_ > count_) return std::numeric_limits<double>::infinity();
    if (next_ == count_) return T_;
    return t0_ + (T_ - t0_) * static_cast<double>(next_) / static_cast<double>(count_);
  }
  void pop() { ++next_; }

 private:
  double t0_, T_;
  std::int64_t count_;
  std::int64_t next_ = 1;
};

// Candidate-type choice and the thinning test, shared by PET and IL.
class Thinner {
 public:
  Thinner(const ChannelModel& model, const RateBound& bound) : model_(model), bound_(bound) {
    double acc = 0.0;
    for (int i = 0; i < model.types(); ++i) {
      if (bound.per_type[i] <= 0.0) continue;
      acc += bound.per_type[i];
      types_.push_back(i);
      cumulative_.push_back(acc);
    }
  }

  int pick_type(Rng& rng) const {
    if (types_.size() == 1) return types_.front();
    const double u = rng.uniform() * cumulative_.back();
    for (std::size_t q = 0; q < types_.size(); ++q)
      if (u < cumulative_[q]) return types_[q];
    return types_.back();
  }

  /// Returns the new configuration, or -1 when the candidate is rejected.
  int trial(const SystemState& state, int k, int i, double v, double t, Rng& rng) const {
    const int a = state.occupancy(k, i);
    const double cap = bound_.slots * bound_.per_type[i];
    const double exit = model_.exit_rate(i, a, v);
    const double p = exit / cap;
    if (p > 1.0 + 1e-12) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "rate bound violated: thinning probability %.6g > 1 at compartment %d, type %d, "
                    "t = %.9g, V = %.9g",
                    p, k, i + 1, t, v);
      throw BoundViolation(buf, t, k);
    }
    const double u = rng.uniform();
    if (!(u < p)) return -1;
    // u / p is again uniform on [0, 1); reuse it to pick the destination
    const double target = u * cap;
    double acc = 0.0;
    int last = -1;
    for (const auto& e : model_.outgoing(i, a)) {
      const double r = model_.rate_slot(e.slot, v);
      if (r <= 0.0) continue;
      acc += r;
      last = e.to;
      if (target < acc) return e.to;
    }
    return last;
  }

 private:
  const ChannelModel& model_;
  const RateBound& bound_;
  std::vector<int> types_;
  std::vector<double> cumulative_;
};

// Continuous extension of the frozen integrator: full-lattice substeps of at
// most dt_max, cubic Hermite inside each substep.
class DenseVoltage {
 public:
  DenseVoltage(const CircleLattice& lattice, const ChannelModel& model, double dt_max)
      : lattice_(lattice), model_(model), integ_(lattice, model), dt_max_(dt_max) {}

  void restart(const SystemState& state, double t_end) {
    scratch_ = state;
    end_ = t_end;
    ta_ = state.t;
    Va_ = state.V;
    rhs(Va_, Fa_);
    build();
  }

  double at(int k, double t) {
    ensure(t);
    return eval(k, t);
  }

  void fill(double t, std::vector<double>& V) {
    ensure(t);
    for (int k = 0; k < static_cast<int>(V.size()); ++k) V[k] = eval(k, t);
  }

  std::int64_t steps() const { return integ_.steps_taken(); }

 private:
  void ensure(double t) {
    while (t > tb_ && tb_ < end_) {
      ta_ = tb_;
      Va_.swap(Vb_);
      Fa_.swap(Fb_);
      build();
    }
  }

  void build() {
    const double h = std::min(dt_max_, end_ - ta_);
    scratch_.t = ta_;
    scratch_.V = Va_;
    if (h > 0.0) integ_.step(scratch_, h);
    tb_ = h >= end_ - ta_ ? end_ : ta_ + h;
    Vb_ = scratch_.V;
    rhs(Vb_, Fb_);
  }

  void rhs(const std::vector<double>& V, std::vector<double>& F) const {
    const int n = static_cast<int>(V.size());
    F.resize(n);
    const double s = n >= 2 ? lattice_.D() / (lattice_.h() * lattice_.h()) : 0.0;
    for (int k = 0; k < n; ++k) {
      const double l = V[k == 0 ? n - 1 : k - 1], r = V[k == n - 1 ? 0 : k + 1];
      F[k] = s * (r - 2.0 * V[k] + l) + model_.reaction(scratch_.occupied(k), V[k]);
    }
  }

  double eval(int k, double t) const {
    const double h = tb_ - ta_;
    if (h <= 0.0) return Va_[k];
    const double s = std::clamp((t - ta_) / h, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * Va_[k] + (s3 - 2 * s2 + s) * h * Fa_[k] + (-2 * s3 + 3 * s2) * Vb_[k] +
           (s3 - s2) * h * Fb_[k];
  }

  const CircleLattice& lattice_;
  const ChannelModel& model_;
  FrozenIntegrator integ_;
  double dt_max_;
  SystemState scratch_;
  double end_ = 0.0, ta_ = 0.0, tb_ = 0.0;
  std::vector<double> Va_, Vb_, Fa_, Fb_;
};

void flip(SystemState& state, int k, int i, int to, double t, SimStats& stats, TrajectoryObserver& observer) {
  const int from = state.occupancy(k, i);
  state.occupancy(k, i) = to;
  ++stats.events;
  observer.on_event(Event{t, k, i, from, to});
}

SimStats pet_exact(const CircleLattice& lattice, const ChannelModel& model, SystemState& state, double T,
                   Rng& rng, const SimOptions& opt, TrajectoryObserver& observer, SimStats stats) {
  const int n = lattice.n();
  FrozenIntegrator integ(lattice, model);
  RecordGrid grid(state.t, T, opt.dt_record);
  Thinner thinner(model, stats.bound);
  auto advance_to = [&](double target) {
    for (double tg = grid.next_time(); tg <= target; tg = grid.next_time()) {
      integ.advance(state, tg, opt.dt_max);
      observer.on_record(state);
      grid.pop();
    }
    integ.advance(state, target, opt.dt_max);
  };
  observer.on_record(state);
  const double Lambda = stats.bound.Lambda;
  while (Lambda > 0.0) {
    const double tc = state.t + rng.exponential(Lambda);
    if (tc >= T) break;
    advance_to(tc);
    ++stats.candidates;
    const int k = rng.index(n);
    const int i = thinner.pick_type(rng);
    const int to = thinner.trial(state, k, i, state.V[k], tc, rng);
    if (to >= 0) {
      flip(state, k, i, to, tc, stats, observer);
      observer.on_record(state);
    }
  }
  advance_to(T);
  stats.steps = integ.steps_taken();
  return stats;
}

SimStats pet_dense(const CircleLattice& lattice, const ChannelModel& model, SystemState& state, double T,
                   Rng& rng, const SimOptions& opt, TrajectoryObserver& observer, SimStats stats) {
  const int n = lattice.n();
  DenseVoltage dense(lattice, model, opt.dt_max);
  RecordGrid grid(state.t, T, opt.dt_record);
  Thinner thinner(model, stats.bound);
  dense.restart(state, T);
  auto records_to = [&](double target) {
    for (double tg = grid.next_time(); tg <= target; tg = grid.next_time()) {
      dense.fill(tg, state.V);
      state.t = tg;
      observer.on_record(state);
      grid.pop();
    }
  };
  observer.on_record(state);
  const double Lambda = stats.bound.Lambda;
  double t = state.t;
  while (Lambda > 0.0) {
    const double tc = t + rng.exponential(Lambda);
    if (tc >= T) break;
    records_to(tc);
    t = tc;
    ++stats.candidates;
    const int k = rng.index(n);
    const int i = thinner.pick_type(rng);
    const double v = dense.at(k, tc);
    const int to = thinner.trial(state, k, i, v, tc, rng);
    if (to >= 0) {
      dense.fill(tc, state.V);
      state.t = tc;
      flip(state, k, i, to, tc, stats, observer);
      observer.on_record(state);
      dense.restart(state, T);
    }
  }
  records_to(T);
  dense.fill(T, state.V);
  state.t = T;
  stats.steps = dense.steps();
  return stats;
}

}  // namespace

// ---------------------------------------------------------------------------
// algorithms

SimStats pet_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState& state,
                      double T, Rng& rng, const SimOptions& options, TrajectoryObserver& observer) {
  check_inputs(lattice, model, state, T);
  if (!(options.dt_max > 0.0)) throw ModelError("dt_max must be positive");
  SimStats stats;
  stats.bound = rate_bound(model, lattice.n(), options.margin);
  if (options.voltage == VoltageEval::Dense)
    return pet_dense(lattice, model, state, T, rng, options, observer, std::move(stats));
  return pet_exact(lattice, model, state, T, rng, options, observer, std::move(stats));
}

SimStats il_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState& state,
                     double T, Rng& rng, const SimOptions& options, TrajectoryObserver& observer) {
  check_inputs(lattice, model, state, T);
  if (!(options.tau > 0.0)) throw ModelError("IL step tau must be positive");
  if (!(options.dt_max > 0.0)) throw ModelError("dt_max must be positive");
  const int n = lattice.n();
  SimStats stats;
  stats.bound = rate_bound(model, n, options.margin);
  const double Lambda = stats.bound.Lambda;
  FrozenIntegrator integ(lattice, model);
  RecordGrid grid(state.t, T, options.dt_record);
  Thinner thinner(model, stats.bound);
  observer.on_record(state);
  const double t0 = state.t;
  const auto steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((T - t0) / options.tau - 1e-9)));
  for (std::int64_t s = 1; s <= steps; ++s) {
    const double t1 = s == steps ? T : t0 + options.tau * static_cast<double>(s);
    const std::int64_t m = Lambda > 0.0 ? rng.poisson((t1 - state.t) * Lambda) : 0;
    for (double tg = grid.next_time(); tg < t1; tg = grid.next_time()) {
      integ.advance(state, tg, options.dt_max);
      observer.on_record(state);
      grid.pop();
    }
    integ.advance(state, t1, options.dt_max);
    bool changed = false;
    for (std::int64_t q = 0; q < m; ++q) {
      ++stats.candidates;
      const int k = rng.index(n);
      const int i = thinner.pick_type(rng);
      const int to = thinner.trial(state, k, i, state.V[k], t1, rng);
      if (to >= 0) {
        flip(state, k, i, to, t1, stats, observer);
        changed = true;
      }
    }
    bool on_grid = false;
    while (grid.next_time() <= t1) {
      grid.pop();
      on_grid = true;
    }
    if (changed || on_grid) observer.on_record(state);
  }
  stats.steps = integ.steps_taken();
  return stats;
}

SimStats oracle_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState& state,
                         double T, Rng& rng, const SimOptions& options, TrajectoryObserver& observer) {
  check_inputs(lattice, model, state, T);
  if (!(options.dt > 0.0)) throw ModelError("oracle step dt must be positive");
  const int n = lattice.n();
  SimStats stats;
  std::vector<int> stochastic;
  for (int i = 0; i < model.types(); ++i)
    if (model.stochastic(i)) stochastic.push_back(i);
  FrozenIntegrator integ(lattice, model);
  RecordGrid grid(state.t, T, options.dt_record);
  observer.on_record(state);
  const double t0 = state.t;
  const auto steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((T - t0) / options.dt - 1e-9)));
  const double dt = (T - t0) / static_cast<double>(steps);
  for (std::int64_t s = 1; s <= steps; ++s) {
    integ.step(state, dt);
    state.t = s == steps ? T : t0 + dt * static_cast<double>(s);
    bool changed = false;
    for (int k = 0; k < n; ++k) {
      const double v = state.V[k];
      for (int i : stochastic) {
        const int a = state.occupancy(k, i);
        const double u = rng.uniform();
        double acc = 0.0;
        int to = -1;
        for (const auto& e : model.outgoing(i, a)) {
          acc += model.rate_slot(e.slot, v) * dt;
          if (to < 0 && u < acc) to = e.to;
        }
        if (acc > 0.1 + 1e-12) {
          char buf[200];
          std::snprintf(buf, sizeof buf,
                        "oracle step too large: exit rate * dt = %.6g > 0.1 at compartment %d, t = %.9g",
                        acc, k, state.t);
          throw IntegrationError(buf, state.t);
        }
        if (to >= 0) {
          flip(state, k, i, to, state.t, stats, observer);
          changed = true;
        }
      }
    }
    ++stats.candidates;
    bool on_grid = false;
    while (grid.next_time() <= state.t + 1e-9 * dt) {
      grid.pop();
      on_grid = true;
    }
    if (changed || on_grid) observer.on_record(state);
  }
  stats.steps = integ.steps_taken();
  return stats;
}

SimStats simulate(Algorithm algorithm, const CircleLattice& lattice, const ChannelModel& model,
                  SystemState& state, double T, Rng& rng, const SimOptions& options,
                  TrajectoryObserver& observer) {
  switch (algorithm) {
    case Algorithm::Pet: return pet_simulate(lattice, model, state, T, rng, options, observer);
    case Algorithm::Il: return il_simulate(lattice, model, state, T, rng, options, observer);
    case Algorithm::Oracle: return oracle_simulate(lattice, model, state, T, rng, options, observer);
  }
  throw ModelError("unknown algorithm");
}

Trajectory pet_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState state,
                        double T, double dt_max, std::uint64_t seed) {
  SimOptions opt;
  opt.dt_max = dt_max;
  Rng rng(seed);
  Recorder rec;
  pet_simulate(lattice, model, state, T, rng, opt, rec);
  return std::move(rec.trajectory());
}

Trajectory il_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState state,
                       double T, double tau, std::uint64_t seed) {
  SimOptions opt;
  opt.tau = tau;
  opt.dt_max = std::min(opt.dt_max, tau);
  Rng rng(seed);
  Recorder rec;
  il_simulate(lattice, model, state, T, rng, opt, rec);
  return std::move(rec.trajectory());
}

Trajectory oracle_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState state,
                           double T, double dt, std::uint64_t seed) {
  SimOptions opt;
  opt.dt = dt;
  Rng rng(seed);
  Recorder rec;
  oracle_simulate(lattice, model, state, T, rng, opt, rec);
  return std::move(rec.trajectory());
}

}  // namespace ionchan

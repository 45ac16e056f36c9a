#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "ionchan/stats.hpp"
#include "ionchan/stoch.hpp"

using namespace ionchan;
using testing::constant;

namespace {

struct Null : TrajectoryObserver {
  void on_record(const SystemState&) override {}
};

// First event time of each run, or T when nothing happened.
struct FirstEvent : TrajectoryObserver {
  double t = -1.0;
  int to = -1;
  void on_record(const SystemState&) override {}
  void on_event(const Event& e) override {
    if (t < 0) {
      t = e.t;
      to = e.to;
    }
  }
};

SystemState single_site(int types = 1, int configs = 2) { return SystemState(1, types, configs); }

}  // namespace

TEST_CASE("rate bound accounting") {
  SUBCASE("toy declared bound") {
    const CircleLattice lat(16, 16.0, 1.0);
    const auto spec = testing::toy(lat);
    const auto b = rate_bound(spec.model, lat.n());
    CHECK(b.per_type[0] == doctest::Approx(2 * std::exp(5.0)));
    CHECK(b.per_type[0] == doctest::Approx(296.83).epsilon(1e-4));
    CHECK(b.per_type[1] == 0.0);
    CHECK(b.Lambda == doctest::Approx(2 * 16 * 2 * std::exp(5.0)));
  }
  SUBCASE("constant rates with two slots") {
    auto m = testing::two_state(1.0, 1.0);
    m.set_thinning_slots(2);
    CHECK(rate_bound(m, 8, 0.0).Lambda == 16.0);
    // brute force: max exit rate over configurations is 1
    double peak = 0.0;
    for (int a = 0; a < 2; ++a) peak = std::max(peak, m.exit_rate(0, a, 0.3));
    CHECK(peak == 1.0);
  }
  SUBCASE("computed bound carries the margin") {
    auto m = testing::two_state(2.0, 3.0);
    CHECK(rate_bound(m, 1).per_type[0] == doctest::Approx(3.3));
  }
  SUBCASE("no rates") { CHECK(rate_bound(testing::two_state(0, 0), 8).Lambda == 0.0); }
}

TEST_CASE("zero rates reproduce the frozen integrator for every algorithm") {
  const CircleLattice lat(8, 2.0, 1.0);
  ChannelModel m("drift", 1, 2);
  m.set_drift(0, 0, [](double v) { return 1 - v; });
  m.set_drift(0, 1, [](double v) { return -v; });
  SystemState s0(8, 1, 2);
  for (int k = 0; k < 8; ++k) {
    s0.V[k] = std::cos(k);
    s0.occupancy(k, 0) = k % 3 == 0;
  }
  auto frozen = s0;
  integrate_frozen(frozen, lat, m, 1.0, 1e-2);
  SimOptions opt;
  opt.dt_max = 1e-2;
  opt.tau = 0.1;
  opt.dt = 1e-2;
  opt.dt_record = 0.1;  // record points on the step grid
  for (auto alg : {Algorithm::Pet, Algorithm::Il, Algorithm::Oracle}) {
    for (auto mode : {VoltageEval::Exact, VoltageEval::Dense}) {
      opt.voltage = mode;
      auto s = s0;
      Rng rng(1);
      Recorder rec;
      const auto st = simulate(alg, lat, m, s, 1.0, rng, opt, rec);
      CHECK(st.events == 0);
      CHECK(s.occ == s0.occ);
      CHECK(s.t == 1.0);
      INFO(std::string(algorithm_name(alg)) << (mode == VoltageEval::Dense ? " dense" : " exact"));
      CHECK(testing::max_abs_diff(s.V, frozen.V) <= 1e-10);
    }
  }
}

TEST_CASE("PET first switching time is exponential") {
  const CircleLattice lat(1, 1.0, 0.0);
  const auto m = testing::two_state(1.0, 0.0);
  SimOptions opt;
  opt.margin = 0.5;  // thinning has real work to do
  std::vector<double> times;
  for (int r = 0; r < 10000; ++r) {
    auto s = single_site();
    Rng rng(77, r);
    FirstEvent obs;
    pet_simulate(lat, m, s, 30.0, rng, opt, obs);
    REQUIRE(obs.t > 0);
    times.push_back(obs.t);
  }
  const auto ms = mean_se(times);
  CHECK(std::fabs(ms.mean - 1.0) <= 3.0 / std::sqrt(1e4));
  CHECK(ks_statistic_exponential(times, 1.0) < ks_critical_1pct(times.size()));
}

TEST_CASE("thinning picks destinations in proportion to their rates") {
  // three configurations, exits 1.0 -> config 1 and 1.5 -> config 2
  const CircleLattice lat(1, 1.0, 0.0);
  ChannelModel m("three", 1, 3);
  m.set_rate(0, 0, 1, constant(1.0));
  m.set_rate(0, 0, 2, constant(1.5));
  m.set_rate(0, 1, 0, constant(4.0));
  std::vector<double> times;
  int to_two = 0;
  const int runs = 10000;
  for (int r = 0; r < runs; ++r) {
    auto s = SystemState(1, 1, 3);
    Rng rng(5, r);
    FirstEvent obs;
    pet_simulate(lat, m, s, 20.0, rng, SimOptions{}, obs);
    times.push_back(obs.t);
    to_two += obs.to == 2;
  }
  CHECK(ks_statistic_exponential(times, 2.5) < ks_critical_1pct(times.size()));
  const double p = 0.6, se = std::sqrt(p * (1 - p) / runs);
  CHECK(std::fabs(to_two / double(runs) - p) <= 3 * se);
}

TEST_CASE("IL stationary open fraction") {
  const CircleLattice lat(1, 1.0, 0.0);
  const auto m = testing::two_state(1.0, 1.0);
  SimOptions opt;
  opt.tau = 1.0 / 64;
  opt.dt_max = opt.tau;
  opt.dt_record = 100.0;
  Null sink;
  double open = 0.0;
  const int runs = 10000;
  for (int r = 0; r < runs; ++r) {
    auto s = single_site();
    Rng rng(9, r);
    il_simulate(lat, m, s, 100.0, rng, opt, sink);
    open += s.occupancy(0, 0) == 1;
  }
  CHECK(std::fabs(open / runs - 0.5) <= 3 * std::sqrt(0.25 / runs));
}

TEST_CASE("oracle survival approaches e^-1") {
  const CircleLattice lat(1, 1.0, 0.0);
  const auto m = testing::two_state(1.0, 0.0);
  SimOptions opt;
  opt.dt = 1e-4;
  opt.dt_record = 1.0;
  Null sink;
  const int runs = 10000;
  int survived = 0;
  for (int r = 0; r < runs; ++r) {
    auto s = single_site();
    Rng rng(11, r);
    oracle_simulate(lat, m, s, 1.0, rng, opt, sink);
    survived += s.occupancy(0, 0) == 0;
  }
  const double p = std::exp(-1.0);
  CHECK(std::fabs(survived / double(runs) - p) <= 3 * std::sqrt(p * (1 - p) / runs));
}

TEST_CASE("oracle rejects steps that are too coarse") {
  const CircleLattice lat(1, 1.0, 0.0);
  const auto m = testing::two_state(50.0, 0.0);
  auto s = single_site();
  Rng rng(1);
  Null sink;
  SimOptions opt;
  opt.dt = 0.01;
  CHECK_THROWS_AS(oracle_simulate(lat, m, s, 1.0, rng, opt, sink), IntegrationError);
}

TEST_CASE("PET and the oracle agree on the mean toy voltage") {
  // reduced sample count; the full 10^4-sample comparison lives in the acceptance suite
  const CircleLattice lat(4, 16.0, 1.0);
  const auto spec = testing::toy(lat);
  const int runs = 1500;
  std::vector<double> pet(runs), oracle(runs);
  SimOptions opt;
  opt.dt = 1e-4;
  opt.dt_record = 1.0;
  Null sink;
  for (int r = 0; r < runs; ++r) {
    Rng init(100, r);
    const auto s0 = sample_initial_state(lat, spec.model, spec.init, init);
    auto a = s0, b = s0;
    Rng ra(200, r), rb(300, r);
    pet_simulate(lat, spec.model, a, 1.0, ra, opt, sink);
    oracle_simulate(lat, spec.model, b, 1.0, rb, opt, sink);
    pet[r] = a.V[0];
    oracle[r] = b.V[0];
  }
  const auto x = mean_se(pet), y = mean_se(oracle);
  CHECK(x.se > 0.0);
  CHECK(std::fabs(x.mean - y.mean) <= 3 * std::hypot(x.se, y.se));
}

TEST_CASE("dense and exact voltage evaluation give the same path") {
  const CircleLattice lat(32, 16.0, 1.0);
  const auto spec = testing::toy(lat);
  const auto s0 = sample_initial_state(lat, spec.model, spec.init, std::uint64_t{4});
  SimOptions opt;
  auto run = [&](VoltageEval mode) {
    opt.voltage = mode;
    auto s = s0;
    Rng rng(8, 1);
    Recorder rec;
    pet_simulate(lat, spec.model, s, 5.0, rng, opt, rec);
    return std::make_pair(s, rec.trajectory().events);
  };
  const auto [se, ee] = run(VoltageEval::Exact);
  const auto [sd, ed] = run(VoltageEval::Dense);
  REQUIRE(ee.size() == ed.size());
  for (std::size_t q = 0; q < ee.size(); ++q) {
    CHECK(ee[q].k == ed[q].k);
    CHECK(ee[q].t == ed[q].t);
  }
  // the two differ only by where substeps restart, well inside the O(dt_max^2) error
  CHECK(testing::max_abs_diff(se.V, sd.V) <= 1e-4);
}

TEST_CASE("seeded runs are bit-identical") {
  const CircleLattice lat(64, 16.0, 1.0);
  const auto spec = testing::toy(lat);
  for (auto alg : {Algorithm::Pet, Algorithm::Il}) {
    auto once = [&] {
      auto s = sample_initial_state(lat, spec.model, spec.init, std::uint64_t{6});
      Rng rng(6, 1);
      Recorder rec;
      simulate(alg, lat, spec.model, s, 3.0, rng, SimOptions{}, rec);
      return rec.trajectory();
    };
    const auto a = once(), b = once();
    CHECK(a.events == b.events);
    CHECK(a == b);
  }
}

TEST_CASE("occupancy stays one-hot through many events") {
  // random four-configuration model with voltage-dependent rates and drifts
  const CircleLattice lat(16, 4.0, 1.0);
  ChannelModel m("random", 2, 4);
  Rng pick(123);
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < 4; ++a) {
      m.set_drift(i, a, [c = pick.uniform() - 0.5](double v) { return c - 0.2 * v; });
      for (int b = 0; b < 4; ++b) {
        if (a == b || pick.uniform() < 0.3) continue;
        const double c0 = 5 * pick.uniform(), c1 = 5 * pick.uniform();
        m.set_rate(i, a, b, [c0, c1](double v) { return c0 + c1 * v * v; });
      }
    }
  }
  m.set_range({-3.0, 3.0});
  struct Checker : TrajectoryObserver {
    std::int64_t bad = 0, seen = 0;
    void on_record(const SystemState& s) override {
      ++seen;
      if (!s.one_hot_valid()) ++bad;
    }
  } check;
  SystemState s(16, 2, 4);
  Rng rng(321);
  SimOptions opt;
  opt.dt_record = 10.0;
  std::int64_t events = 0;
  double t = 0.0;
  while (events < 100000) {
    const auto st = pet_simulate(lat, m, s, t + 20.0, rng, opt, check);
    events += st.events;
    t += 20.0;
  }
  CHECK(check.bad == 0);
  CHECK(check.seen > 100000);
  const auto z = s.one_hot();
  for (int k = 0; k < 16; ++k)
    for (int i = 0; i < 2; ++i) CHECK(z[(k * 2 + i) * 4 + 0] + z[(k * 2 + i) * 4 + 1] + z[(k * 2 + i) * 4 + 2] + z[(k * 2 + i) * 4 + 3] == 1);
}

TEST_CASE("exclusive preset never mixes its blocks") {
  auto p = ExclusiveParams::standard();
  p.alpha2 = constant(0.0);
  p.beta2 = constant(0.0);
  const auto spec = make_exclusive(p);
  const CircleLattice lat(32, 8.0, 1.0);
  struct Blocks : TrajectoryObserver {
    std::vector<int> start;
    int crossings = 0;
    void on_record(const SystemState& s) override {
      if (start.empty())
        for (int k = 0; k < s.size(); ++k) start.push_back(s.occupancy(k, 0) / 2);
      for (int k = 0; k < s.size(); ++k) crossings += s.occupancy(k, 0) / 2 != start[k];
    }
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = sample_initial_state(lat, spec.model, spec.init, seed);
    Blocks obs;
    Rng rng(seed, 1);
    const auto st = pet_simulate(lat, spec.model, s, 2.0, rng, SimOptions{}, obs);
    CHECK(st.events > 0);
    CHECK(obs.crossings == 0);
  }
}

TEST_CASE("candidate workload scales with Lambda") {
  // constant rates, no drift: candidates ~ Lambda T, accepted events ~ n T
  const auto m = testing::two_state(1.0, 1.0);
  auto work = [&](int n) {
    const CircleLattice lat(n, 1.0, 0.0);
    SystemState s(n, 1, 2);
    Rng rng(44, n);
    Null sink;
    SimOptions opt;
    opt.dt_max = 1.0;
    const auto st = pet_simulate(lat, m, s, 200.0, rng, opt, sink);
    return std::make_pair(st.candidates / st.bound.Lambda, st.events / double(n));
  };
  const auto [c1, e1] = work(16);
  const auto [c4, e4] = work(64);
  CHECK(std::fabs(c4 / c1 - 1) <= 0.1);
  CHECK(std::fabs(e4 / e1 - 1) <= 0.1);
}

TEST_CASE("toy pulse either survives or decays across realizations") {
  const CircleLattice lat(64, 16.0, 1.0);  // h = 1/4
  const auto spec = testing::toy(lat);
  int decayed = 0;
  const int runs = 200;
  SimOptions opt;
  opt.dt_record = 15.0;
  Null sink;
  for (int r = 0; r < runs; ++r) {
    auto s = sample_initial_state(lat, spec.model, spec.init, Rng(31, r).engine()());
    Rng rng(31, 1000 + r);
    pet_simulate(lat, spec.model, s, 15.0, rng, opt, sink);
    decayed += *std::max_element(s.V.begin(), s.V.end()) < 0.1;
  }
  MESSAGE("decayed in " << decayed << " of " << runs);
  CHECK(decayed > 0);
  CHECK(decayed < runs);
}

TEST_CASE("bound violations carry time and compartment") {
  const CircleLattice lat(4, 1.0, 0.0);
  auto m = testing::two_state(5.0, 5.0);
  m.set_declared_bound(0, 1.0);
  SystemState s(4, 1, 2);
  Rng rng(2);
  Null sink;
  try {
    pet_simulate(lat, m, s, 10.0, rng, SimOptions{}, sink);
    FAIL("expected a bound violation");
  } catch (const BoundViolation& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.compartment() >= 0);
    CHECK(e.compartment() < 4);
    CHECK(std::string(e.what()).find("compartment") != std::string::npos);
  }
}

TEST_CASE("trajectory files round-trip") {
  const CircleLattice lat(8, 2.0, 1.0);
  const auto spec = testing::toy(lat);
  auto s = sample_initial_state(lat, spec.model, spec.init, std::uint64_t{3});
  const auto tr = pet_simulate(lat, spec.model, s, 1.0, 1e-2, 3);
  std::stringstream bin;
  tr.write_binary(bin);
  CHECK(Trajectory::read_binary(bin) == tr);
  std::stringstream bad("not a trajectory");
  CHECK_THROWS_AS(Trajectory::read_binary(bad), IoError);

  std::ostringstream csv;
  tr.write_csv(csv);
  const auto text = csv.str();
  CHECK(text.rfind("t,k,V\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(1 + tr.rows() * 8));
  std::ostringstream ev;
  tr.write_events_csv(ev);
  CHECK(ev.str().rfind("t,k,i,from,to\n", 0) == 0);

  // recorded times are nondecreasing and the voltage interpolant hits the rows
  for (std::size_t r = 1; r < tr.rows(); ++r) CHECK(tr.times[r] > tr.times[r - 1]);
  std::vector<double> v(8);
  tr.voltage_at(tr.times[1], v);
  for (int k = 0; k < 8; ++k) CHECK(v[k] == tr.voltage(1)[k]);
}

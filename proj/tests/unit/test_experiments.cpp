#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "ionchan/error.hpp"
#include "ionchan/experiments.hpp"

using namespace ionchan;

namespace {

Trajectory flat_path(int n, std::vector<double> times, double value) {
  Trajectory tr;
  tr.n = n;
  tr.types = 1;
  tr.configs = 2;
  tr.times = std::move(times);
  tr.V.assign(tr.times.size() * n, value);
  return tr;
}

MeanFieldTrajectory flat_field(int n, std::vector<double> times, double value) {
  MeanFieldTrajectory mf;
  mf.n = n;
  mf.types = 1;
  mf.configs = 2;
  mf.times = std::move(times);
  mf.U.assign(mf.times.size() * n, value);
  return mf;
}

// Sends every callback to two observers.
class Tee : public TrajectoryObserver {
 public:
  Tee(TrajectoryObserver& a, TrajectoryObserver& b) : a_(a), b_(b) {}
  void on_record(const SystemState& s) override {
    a_.on_record(s);
    b_.on_record(s);
  }
  void on_event(const Event& e) override {
    a_.on_event(e);
    b_.on_event(e);
  }

 private:
  TrajectoryObserver& a_;
  TrajectoryObserver& b_;
};

ConvergenceConfig toy_sweep(std::vector<int> inv, int samples, double T) {
  ConvergenceConfig c;
  c.factory = [](const CircleLattice& l) { return testing::toy(l); };
  c.inverse_spacings = std::move(inv);
  c.samples = samples;
  c.T = T;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("sup error on hand-made paths") {
  SUBCASE("identical") {
    auto tr = flat_path(4, {0, 0.5, 1}, 0.2);
    tr.V[5] = 0.9;
    auto mf = flat_field(4, {0, 0.5, 1}, 0.2);
    mf.U[5] = 0.9;
    CHECK(sup_error(tr, mf, 1.0) == 0.0);
  }
  SUBCASE("constant gap") {
    CHECK(sup_error(flat_path(8, {0, 0.3, 1}, 0.3), flat_field(8, {0, 0.25, 0.5, 1}, 0.0), 1.0) ==
          doctest::Approx(0.3));
  }
  SUBCASE("peak between stochastic rows is seen") {
    auto mf = flat_field(2, {0, 0.5, 1}, 0.0);
    mf.U[2 * 1 + 1] = -0.7;
    CHECK(sup_error(flat_path(2, {0, 1}, 0.0), mf, 1.0) == doctest::Approx(0.7));
  }
  SUBCASE("mismatched lattices") {
    CHECK_THROWS_AS(sup_error(flat_path(2, {0, 1}, 0.0), flat_field(3, {0, 1}, 0.0), 1.0), ModelError);
  }
}

TEST_CASE("streaming sup error matches the stored form") {
  const CircleLattice lat(32, 16.0, 1.0);
  const auto spec = testing::toy(lat);
  const double T = 4.0;
  const auto mf = solve_mean_field(lat, spec.model, spec.init, T, 1e-3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng init_rng(seed, 0);
    auto state = sample_initial_state(lat, spec.model, spec.init, init_rng);
    Recorder rec(false);
    SupErrorObserver stream(mf, T);
    Tee tee(rec, stream);
    Rng rng(seed, 1);
    simulate(Algorithm::Pet, lat, spec.model, state, T, rng, SimOptions{}, tee);
    const double stored = sup_error(rec.trajectory(), mf, T);
    CHECK(stored > 0.0);
    CHECK(stream.error() == doctest::Approx(stored).epsilon(1e-12));
  }
}

TEST_CASE("convergence study bookkeeping") {
  auto cfg = toy_sweep({2, 3, 4}, 5, 1.0);
  const auto rows = convergence_study(cfg);
  REQUIRE(rows.size() == 15);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int inv = cfg.inverse_spacings[r / 5];
    const int s = static_cast<int>(r % 5);
    CHECK(rows[r].run_id == run_id(inv, s));
    CHECK(rows[r].n == 16 * inv);
    CHECK(rows[r].seed == run_seed(cfg.seed, inv, s));
    CHECK_FALSE(rows[r].failed);
    CHECK_FALSE(rows[r].error_Zbar.has_value());
  }

  SUBCASE("reproducible bit for bit") {
    const auto again = convergence_study(cfg);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      CHECK(again[r].error_V == rows[r].error_V);
      CHECK(again[r].events == rows[r].events);
    }
  }
  SUBCASE("worker count does not change the rows") {
    cfg.workers = 3;
    const auto par = convergence_study(cfg);
    for (std::size_t r = 0; r < rows.size(); ++r) CHECK(par[r].error_V == rows[r].error_V);
  }
  SUBCASE("csv round trip") {
    std::stringstream ss;
    write_records_csv(ss, rows);
    const auto back = read_records_csv(ss);
    REQUIRE(back.size() == rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      CHECK(back[r].run_id == rows[r].run_id);
      CHECK(back[r].seed == rows[r].seed);
      CHECK(back[r].error_V == rows[r].error_V);
      CHECK(back[r].error_Zbar == rows[r].error_Zbar);
    }
  }
  SUBCASE("resume skips finished rows") {
    cfg.existing.assign(rows.begin(), rows.begin() + 7);
    cfg.existing[0].error_V = -1.0;  // marker: must be kept, not recomputed
    const auto resumed = convergence_study(cfg);
    REQUIRE(resumed.size() == 15);
    CHECK(resumed[0].error_V == -1.0);
    for (std::size_t r = 1; r < rows.size(); ++r) CHECK(resumed[r].error_V == rows[r].error_V);
  }
  SUBCASE("Zbar channel") {
    cfg.p = 0.5;
    for (const auto& r : convergence_study(cfg)) {
      REQUIRE(r.error_Zbar.has_value());
      CHECK(*r.error_Zbar > 0.0);
      CHECK(*r.error_Zbar <= 1.0);
    }
  }
}

TEST_CASE("toy errors are small and shrink with h") {
  auto cfg = toy_sweep({3, 12, 16}, 50, 15.0);
  const auto rows = convergence_study(cfg);
  const auto pts = mean_error_points(rows);
  REQUIRE(pts.size() == 3);
  MESSAGE("mean error h=1/3 " << pts[0].second << ", h=1/12 " << pts[1].second);
  CHECK(pts[1].second < pts[0].second);
  int small = 0;
  for (const auto& r : rows)
    if (r.n == 256 && !r.failed && r.error_V < 0.2) ++small;
  MESSAGE(small << " of 50 runs at h=1/16 below 0.2");
  CHECK(small >= 45);
}

TEST_CASE("log-log slope fits") {
  const std::vector<std::pair<double, double>> power{{1, 1}, {0.5, 0.5}, {0.25, 0.25}};
  CHECK(loglog_slope(power).slope == doctest::Approx(1.0));
  CHECK(loglog_slope(power).residual == doctest::Approx(0.0));
  const std::vector<std::pair<double, double>> flat{{1, 3.5}, {0.5, 3.5}};
  CHECK(loglog_slope(flat).slope == doctest::Approx(0.0));
  const std::vector<std::pair<double, double>> bad{{1, 1}, {0.5, 0.0}};
  CHECK_THROWS(loglog_slope(bad));
  const std::vector<std::pair<double, double>> one{{1, 1}};
  CHECK_THROWS(loglog_slope(one));
}

TEST_CASE("swap histogram") {
  SUBCASE("identical rows give a point mass") {
    const std::vector<double> hs{0.5, 0.25, 0.125};
    const std::vector<std::vector<double>> cols{{0.4, 0.4, 0.4}, {0.2, 0.2, 0.2}, {0.1, 0.1, 0.1}};
    for (double s : swap_histogram(cols, hs, 500, 3)) CHECK(s == doctest::Approx(1.0));
  }
  SUBCASE("each column is sampled uniformly") {
    // with h = {e, 1} and the second column fixed at 1, the slope is log of the first pick
    const std::vector<double> hs{std::exp(1.0), 1.0};
    const std::vector<std::vector<double>> cols{{1.0, std::exp(1.0), std::exp(2.0), std::exp(3.0)}, {1.0}};
    const int draws = 8000;
    std::vector<double> observed(4, 0.0), expected(4, draws / 4.0);
    for (double s : swap_histogram(cols, hs, draws, 21)) {
      const long idx = std::lround(s);
      REQUIRE(idx >= 0);
      REQUIRE(idx < 4);
      observed[idx] += 1;
    }
    CHECK(chi_square(observed, expected) < 11.34);  // 1% point, 3 degrees of freedom
  }
  SUBCASE("wider h range gives a tighter slope distribution") {
    Rng rng(8);
    std::normal_distribution<double> noise(0.0, 0.3);
    auto columns = [&](int last) {
      std::vector<double> hs;
      std::vector<std::vector<double>> cols;
      for (int n = 2; n <= last; ++n) {
        hs.push_back(1.0 / n);
        std::vector<double> c;
        for (int s = 0; s < 50; ++s) c.push_back(std::sqrt(1.0 / n) * std::exp(noise(rng.engine())));
        cols.push_back(c);
      }
      return std::make_pair(hs, cols);
    };
    const auto [hw, cw] = columns(30);
    const auto [hn, cn] = columns(18);
    const auto wide = swap_histogram(cw, hw, 4000, 1);
    const auto narrow = swap_histogram(cn, hn, 4000, 1);
    CHECK(mean_se(wide).mean == doctest::Approx(0.5).epsilon(0.1));
    CHECK(sample_sd(wide) < sample_sd(narrow));
  }
  SUBCASE("empty column") {
    CHECK_THROWS(swap_histogram({{1.0}, {}}, {0.5, 0.25}, 10, 1));
  }
}

TEST_CASE("algorithmic error of an algorithm against itself is zero") {
  AlgoErrorConfig c;
  c.factory = [](const CircleLattice& l) { return testing::toy(l); };
  c.T = 2.0;
  c.samples = 6;
  c.bootstrap = 20;
  c.first = c.second = Algorithm::Pet;
  const auto est = algorithmic_error(c);
  CHECK(est.estimate == 0.0);
  CHECK(est.se == 0.0);
  CHECK(est.site == 32);
  CHECK(est.failed == 0);
}

TEST_CASE("Poisson law of large numbers check") {
  SUBCASE("frozen clock") {
    const auto rep = poisson_lln_check(2.0, {1}, 1.0, 10, 1, 1.0, ClockKind::Zero);
    CHECK(rep.windows.at(0).max_sup == 0.0);
    CHECK(rep.windows.at(0).exceedances == 0);
  }
  SUBCASE("compensated sums are centered") {
    std::vector<int> windows;
    for (int i = 1; i <= 10; ++i) windows.push_back(i * i);
    for (auto kind : {ClockKind::Identity, ClockKind::Random}) {
      const auto rep = poisson_lln_check(2.0, windows, 1.0, 200, 5, 1.0, kind);
      CHECK(rep.growth == doctest::Approx(2.0).epsilon(0.05));
      for (const auto& w : rep.windows) CHECK(std::fabs(w.final_sum.mean) <= 3 * w.final_sum.se + 1e-12);
    }
  }
  SUBCASE("sup matches a brute-force grid on one window") {
    // the exact sup dominates any grid evaluation of the same path; the cap makes the
    // sum after tau_T a frozen value, so the sup over [0, T] equals the sup over [0, tau_T]
    const auto a = poisson_lln_check(2.0, {50}, 1.0, 30, 9, 1.0);
    const auto b = poisson_lln_check(2.0, {50}, 3.0, 30, 9, 1.0);
    CHECK(a.windows[0].max_sup == b.windows[0].max_sup);
  }
  SUBCASE("inadmissible growth") {
    std::vector<int> windows;
    for (int i = 1; i <= 20; ++i) windows.push_back(i);
    CHECK_THROWS_AS(poisson_lln_check(1.0, windows, 1.0, 5, 1), ModelError);
    CHECK_NOTHROW(poisson_lln_check(1.5, windows, 1.0, 5, 1));
  }
}

TEST_CASE("statistics helpers") {
  SUBCASE("mean and standard error") {
    const std::vector<double> x{1, 2, 3, 4};
    const auto m = mean_se(x);
    CHECK(m.mean == 2.5);
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
    CHECK(sample_sd(x) == doctest::Approx(std::sqrt(5.0 / 3)));
  }
  SUBCASE("KS statistic") {
    // quantile midpoints of Exp(2): the statistic is exactly 1 / (2n)
    std::vector<double> q;
    const int n = 100;
    for (int i = 0; i < n; ++i) q.push_back(-std::log(1.0 - (i + 0.5) / n) / 2.0);
    CHECK(ks_statistic_exponential(q, 2.0) == doctest::Approx(0.5 / n));
    CHECK(ks_statistic_exponential(q, 1.0) > ks_critical_1pct(n));
  }
  SUBCASE("histogram") {
    const std::vector<double> x{0.0, 0.1, 0.5, 0.99, 1.0};
    const auto h = histogram(x, 4);
    REQUIRE(h.size() == 4);
    CHECK(h.front().lo == 0.0);
    CHECK(h.back().hi == 1.0);
    CHECK(h[0].count == 2);
    CHECK(h[2].count == 1);
    CHECK(h[3].count == 2);
    const std::vector<double> same{2.0, 2.0};
    CHECK(histogram(same, 3)[1].count == 2);
  }
}

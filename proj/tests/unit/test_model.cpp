#include <doctest.h>

#include <bit>
#include <cmath>

#include "helpers.hpp"
#include "ionchan/model.hpp"
#include "ionchan/presets.hpp"
#include "ionchan/rng.hpp"

using namespace ionchan;
using testing::constant;

TEST_CASE("toy preset has the two-type, two-configuration structure") {
  const CircleLattice lat(32, 16.0, 1.0);
  const auto spec = testing::toy(lat);
  CHECK(spec.model.types() == 2);
  CHECK(spec.model.configs() == 2);
  CHECK(spec.model.stochastic(0));
  CHECK_FALSE(spec.model.stochastic(1));
  const double v = 0.3;
  CHECK(spec.model.drift(0, 0, v) == doctest::Approx(1 - v));
  CHECK(spec.model.drift(1, 0, v) == doctest::Approx(-v / 10));
  CHECK(spec.model.drift(0, 1, v) == 0.0);
  // closed -> open is alpha, open -> closed is beta
  CHECK(spec.model.rate(0, 1, 0, v) == doctest::Approx(std::exp(10 * (v - 0.5))));
  CHECK(spec.model.rate(0, 0, 1, v) == doctest::Approx(std::exp(-10 * (v - 0.5))));
}

TEST_CASE("toy rate matrix at the symmetry point") {
  const auto spec = testing::toy(CircleLattice(4, 1.0, 1.0));
  const auto A = transition_rates(spec.model, 0.5, 0);
  CHECK(A(0, 0) == doctest::Approx(-1.0));
  CHECK(A(0, 1) == doctest::Approx(1.0));
  CHECK(A(1, 0) == doctest::Approx(1.0));
  CHECK(A(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("two-gate product rate matrix matches the product chain") {
  auto p = TwoGateParams::standard();
  p.alpha = constant(1.0);
  p.beta = constant(2.0);
  p.alpha2 = constant(3.0);
  p.beta2 = constant(5.0);
  const auto spec = make_two_gate(p);
  const auto A = transition_rates(spec.model, 0.0, 0);
  // one-based (1,2) = alpha, (4,2) = beta2
  CHECK(A(0, 1) == 1.0);
  CHECK(A(3, 1) == 5.0);
  const double expected[4][4] = {{-4, 1, 3, 0}, {2, -5, 0, 3}, {5, 0, -6, 1}, {0, 5, 2, -7}};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) CHECK(A(a, b) == expected[a][b]);
}

TEST_CASE("rate matrices have zero row sums and nonnegative off-diagonals") {
  const CircleLattice lat(8, 1.0, 1.0);
  std::vector<ModelSpec> specs;
  specs.push_back(testing::toy(lat));
  specs.push_back(make_two_gate(TwoGateParams::standard()));
  specs.push_back(make_hodgkin_huxley(HodgkinHuxleyParams::textbook()));
  specs.push_back(make_exclusive(ExclusiveParams::standard()));
  specs.push_back(make_macro_density(MacroDensityParams::standard()));
  Rng rng(5);
  for (const auto& s : specs) {
    const auto r = s.model.range();
    for (int trial = 0; trial < 10000; ++trial) {
      const double v = r.min + (r.max - r.min) * rng.uniform();
      for (int i = 0; i < s.model.types(); ++i) {
        const int J = s.model.configs();
        for (int a = 0; a < J; ++a)
          for (int b = 0; b < J; ++b)
            if (a != b && s.model.rate(i, a, b, v) < 0.0) FAIL("negative rate in " << s.model.name());
        if (trial % 100 != 0) continue;
        const auto A = transition_rates(s.model, v, i);
        for (int a = 0; a < J; ++a) {
          double sum = 0.0;
          for (int b = 0; b < J; ++b) sum += A(a, b);
          CHECK(std::fabs(sum) <= 1e-12 * std::max(1.0, -A(a, a)));
        }
      }
    }
  }
}

TEST_CASE("hodgkin-huxley chain lives on the 4-cube") {
  const auto spec = make_hodgkin_huxley(HodgkinHuxleyParams::textbook());
  const auto& m = spec.model;
  CHECK(m.types() == 3);
  CHECK(m.configs() == 16);
  const double v = -60.0;
  const auto p = HodgkinHuxleyParams::textbook();
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < 16; ++a) {
      int degree = 0;
      for (int b = 0; b < 16; ++b) {
        const bool adjacent = std::popcount(static_cast<unsigned>(a ^ b)) == 1;
        CHECK(m.has_rate(i, a, b) == adjacent);
        if (!adjacent) continue;
        ++degree;
        const int d = b - a;
        double want;
        if (i == 1) want = d > 0 ? p.alpha_n(v) : p.beta_n(v);
        else if (d == 8) want = p.alpha_h(v);
        else if (d == -8) want = p.beta_h(v);
        else want = d > 0 ? p.alpha_m(v) : p.beta_m(v);
        CHECK(m.rate(i, a, b, v) == doctest::Approx(want));
      }
      CHECK(degree == 4);
    }
  }
  CHECK(m.outgoing(0, 0).size() == 4);
  CHECK_FALSE(m.stochastic(2));
}

TEST_CASE("drift_rhs stencil and toy reaction") {
  SUBCASE("pure diffusion stencil") {
    const CircleLattice lat(4, 4.0, 1.0);
    ChannelModel m("none", 1, 1);
    SystemState s(4, 1, 1);
    s.V = {0, 1, 0, -1};
    const auto r = drift_rhs(lat, m, s);
    CHECK(r == std::vector<double>{0, -2, 0, 2});
    s.V = {0.7, 0.7, 0.7, 0.7};
    for (double x : drift_rhs(lat, m, s)) CHECK(x == 0.0);
  }
  SUBCASE("toy with every gate open and V = 0") {
    const CircleLattice lat(16, 16.0, 1.0);
    const auto spec = testing::toy(lat);
    SystemState s(16, 2, 2);
    for (double x : drift_rhs(lat, spec.model, s)) CHECK(x == doctest::Approx(1.0));
  }
}

TEST_CASE("initial voltage is the centered bump") {
  const int inv = 4;
  const CircleLattice lat(16 * inv, 16.0, 1.0);
  const auto spec = testing::toy(lat);
  const auto s = sample_initial_state(lat, spec.model, spec.init, std::uint64_t{3});
  for (int k = 0; k < lat.n(); ++k) {
    const double u = (k - (16.0 * inv - 1) / 2) / inv;
    CHECK(s.V[k] == doctest::Approx(std::exp(-u * u)).epsilon(1e-12));
  }
}

TEST_CASE("initial occupancy sampling") {
  const CircleLattice lat(10000, 1.0, 0.0);
  ChannelModel m("binary", 1, 2);
  InitialData init;
  init.v0 = constant(0.0);
  SUBCASE("deterministic category") {
    init.z0 = {constant(0.0), constant(1.0)};
    const auto s = sample_initial_state(lat, m, init, std::uint64_t{1});
    for (int k = 0; k < lat.n(); ++k) CHECK(s.occupancy(k, 0) == 1);
  }
  SUBCASE("binomial fraction") {
    init.z0 = {constant(0.7), constant(0.3)};
    const auto s = sample_initial_state(lat, m, init, std::uint64_t{2});
    CHECK(s.one_hot_valid());
    double frac = 0.0;
    for (int k = 0; k < lat.n(); ++k) frac += s.z(k, 0, 1);
    frac /= lat.n();
    CHECK(std::fabs(frac - 0.3) <= 3 * std::sqrt(0.3 * 0.7 / 1e4));
  }
  SUBCASE("weights must be probabilities") {
    init.z0 = {constant(0.7), constant(0.7)};
    CHECK_THROWS_AS(sample_initial_state(lat, m, init, std::uint64_t{2}), ModelError);
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(CircleLattice(0, 1.0, 1.0), ModelError);
  CHECK_THROWS_AS(CircleLattice(4, -1.0, 1.0), ModelError);
  ChannelModel m("bad", 1, 2);
  m.set_rate(0, 0, 1, constant(-1.0));
  CHECK_THROWS_AS(m.rate(0, 0, 1, 0.0), ModelError);
  CHECK_THROWS_AS(m.set_rate(0, 0, 0, constant(1.0)), ModelError);
  CHECK_THROWS_AS(make_toy(ToyParams::standard()), ModelError);  // no v0 and no lattice
  auto mp = MacroDensityParams::standard();
  mp.p = constant(1.5);
  CHECK_THROWS_AS(make_macro_density(mp), ModelError);
}

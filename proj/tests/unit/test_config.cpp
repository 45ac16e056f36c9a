#include <doctest.h>

#include <string>

#include "ionchan/config.hpp"
#include "ionchan/error.hpp"
#include "ionchan/rng.hpp"

using namespace ionchan;

namespace {

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a config error for:\n" << text);
  return ConfigError("unreachable");
}

}  // namespace

TEST_CASE("minimal converge config") {
  const auto c = parse_config(
      "[run]\nsubcommand = converge\nseed = 1\n"
      "[model]\npreset = toy\n"
      "[experiment]\nn_list = 2..12\nsamples = 10\nT = 15\n");
  CHECK(c.subcommand() == Subcommand::Converge);
  CHECK(c.integer("run.seed") == 1);
  CHECK(c.int_list("experiment.n_list") == std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  CHECK(c.real("experiment.T") == 15.0);
  CHECK_FALSE(c.has("experiment.p"));
  // defaults are resolved
  CHECK(c.text("algorithm.name") == "pet");
  CHECK(c.real("lattice.L") == 16.0);
  CHECK(c.has("model.alpha"));
}

TEST_CASE("range errors name the key") {
  const auto e = config_error("[experiment]\np = 1.5\n");
  CHECK(e.kind() == ConfigError::Value);
  CHECK(e.key() == "experiment.p");
  CHECK(std::string(e.what()).find("experiment.p") != std::string::npos);
  CHECK(config_error("[lattice]\nn = 0\n").key() == "lattice.n");
  CHECK(config_error("[algorithm]\nname = rk4\n").key() == "algorithm.name");
  CHECK(config_error("[lattice]\nD = -1\n").kind() == ConfigError::Value);
}

TEST_CASE("syntax errors carry the line") {
  SUBCASE("unknown key") {
    const auto e = config_error("[run]\nseed = 3\n[lattice]\nspacing = 2\n");
    CHECK(e.kind() == ConfigError::Syntax);
    CHECK(e.line() == 4);
  }
  SUBCASE("no equals sign") {
    CHECK(config_error("# comment\n\n[run]\nseed 3\n").line() == 4);
  }
  SUBCASE("unterminated section") {
    CHECK(config_error("[run\n").line() == 1);
  }
  SUBCASE("duplicate key") {
    CHECK(config_error("[run]\nseed = 1\nseed = 2\n").line() == 3);
  }
  SUBCASE("key outside a section") {
    CHECK(config_error("seed = 1\n").line() == 1);
  }
  SUBCASE("bad expression") {
    CHECK(config_error("[model]\nalpha = exp(v\n").kind() == ConfigError::Value);
  }
}

TEST_CASE("comments, spacing and h") {
  const auto c = parse_config("  [lattice]   # the grid\n h = 0.25 \n\tL=8\n");
  const auto lat = config_lattice(c);
  CHECK(lat.n() == 32);
  CHECK(lat.h() == 0.25);
  CHECK_THROWS_AS(config_lattice(parse_config("[lattice]\nh = 0.3\nL = 1\n")), ConfigError);
}

TEST_CASE("custom preset keys") {
  const auto c = parse_config(
      "[model]\npreset = custom\ntypes = 1\nconfigs = 3\n"
      "rate_1_1_2 = 2\nrate_1_2_3 = v + 1\ndrift_1_3 = 1 - v\nz0_1_1 = 1\n");
  const auto spec = model_factory(c)(config_lattice(c));
  CHECK(spec.model.configs() == 3);
  CHECK(spec.model.rate(0, 0, 1, 0.5) == 2.0);
  CHECK(spec.model.rate(0, 1, 2, 0.5) == 1.5);
  CHECK(spec.model.drift(0, 2, 0.25) == 0.75);
  CHECK(config_error("[model]\npreset = custom\nconfigs = 2\nrate_1_1_3 = 1\n").kind() == ConfigError::Value);
  CHECK(config_error("[model]\npreset = toy\nrate_1_1_2 = 1\n").kind() == ConfigError::Syntax);
}

TEST_CASE("emitted config round-trips") {
  Rng rng(2024);
  const char* presets[] = {"toy", "two-gate-product", "hodgkin-huxley", "exclusive", "macro-density"};
  const char* algs[] = {"pet", "il", "oracle"};
  const char* subs[] = {"simulate", "converge", "algo-error", "poisson-lln"};
  auto real = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  auto fmt = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (int trial = 0; trial < 200; ++trial) {
    std::string text = "[run]\nsubcommand = " + std::string(subs[rng.index(4)]) +
                       "\nseed = " + std::to_string(rng.index(1 << 30)) + "\n";
    text += "[model]\npreset = " + std::string(presets[rng.index(5)]) + "\n";
    text += "[lattice]\n";
    if (rng.bernoulli(0.5)) text += "n = " + std::to_string(1 + rng.index(500)) + "\n";
    else text += "h = 0.125\n";
    text += "L = " + fmt(real(0.5, 40)) + "\nD = " + fmt(real(0, 3)) + "\n";
    text += "[algorithm]\nname = " + std::string(algs[rng.index(3)]) + "\ndt_max = " + fmt(real(1e-4, 0.1)) + "\n";
    text += "[experiment]\n";
    if (rng.bernoulli(0.5)) text += "p = " + fmt(real(0, 0.99)) + "\n";
    text += "n_list = " + std::to_string(2 + rng.index(3)) + ".." + std::to_string(6 + rng.index(10)) + "\n";
    text += "tau_list = " + fmt(real(0.01, 1)) + ", 1/8\n";
    text += "samples = " + std::to_string(1 + rng.index(100)) + "\n";
    text += "[io]\nout = run_" + std::to_string(trial) + "\nresume = " + (rng.bernoulli(0.5) ? "true" : "false") + "\n";
    INFO(text);
    const auto c = parse_config(text);
    const auto emitted = emit_config(c);
    CHECK(parse_config(emitted) == c);
    CHECK(emit_config(parse_config(emitted)) == emitted);
  }
}

TEST_CASE("overrides validate like the file") {
  auto c = parse_config("");
  set_config_value(c, "run.seed", "77");
  CHECK(c.integer("run.seed") == 77);
  CHECK_THROWS_AS(set_config_value(c, "run.workers", "0"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "run.speed", "1"), ConfigError);
  set_config_value(c, "model.preset", "hodgkin-huxley");
  CHECK(c.has("model.g_na"));
  CHECK_FALSE(c.has("model.f"));
}

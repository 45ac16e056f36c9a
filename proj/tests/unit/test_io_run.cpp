#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ionchan/config.hpp"
#include "ionchan/error.hpp"
#include "ionchan/io.hpp"
#include "ionchan/run.hpp"

using namespace ionchan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ionchan_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig config_for(const std::string& text, const fs::path& out) {
  auto c = parse_config(text);
  set_config_value(c, "io.out", out.string());
  return c;
}

RunOptions fixed() {
  RunOptions o;
  o.out_dir_fixed = true;
  return o;
}

}  // namespace

TEST_CASE("atomic writes") {
  const auto dir = scratch("atomic");
  const auto target = dir / "sub" / "file.csv";
  write_file_atomic(target, [](std::ostream& os) { os << "a,b\n1,2\n"; });
  CHECK(slurp(target) == "a,b\n1,2\n");

  SUBCASE("writer throws midway") {
    CHECK_THROWS_AS(write_file_atomic(target,
                                      [](std::ostream& os) {
                                        os << "partial";
                                        throw IoError("disk full");
                                      }),
                    IoError);
    CHECK(slurp(target) == "a,b\n1,2\n");
  }
  SUBCASE("stream goes bad") {
    const auto fresh = dir / "fresh.csv";
    CHECK_THROWS_AS(write_file_atomic(fresh,
                                      [](std::ostream& os) {
                                        os << "x";
                                        os.setstate(std::ios::badbit);
                                      }),
                    IoError);
    CHECK_FALSE(fs::exists(fresh));
  }
  // no temporaries are left behind
  int entries = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) ++entries;
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("simulate is byte-identical for a fixed seed") {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  const std::string text =
      "[run]\nsubcommand = simulate\nseed = 9\n[lattice]\nn = 32\n[experiment]\nT = 2\n[io]\ntrajectory_format = both\n";
  const auto ra = run(config_for(text, a), fixed());
  const auto rb = run(config_for(text, b), fixed());
  CHECK(ra.exit_code == 0);
  for (const char* f : {"trajectory.csv", "events.csv", "trajectory.bin"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(fs::exists(a / "resolved.cfg"));
  CHECK(fs::exists(a / "summary.json"));
  // the resolved config reproduces the run
  const auto c = parse_config(slurp(a / "resolved.cfg"));
  CHECK(c.integer("run.seed") == 9);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("corrector-check on defaults has no violations") {
  const auto dir = scratch("corr");
  const auto r = run(config_for("[run]\nsubcommand = corrector-check\n", dir), fixed());
  CHECK(r.exit_code == 0);
  CHECK(r.violations == 0);
  CHECK(r.rows == 9);
  fs::remove_all(dir);
}

TEST_CASE("exit codes and hard errors") {
  const auto dir = scratch("exit");
  SUBCASE("missing subcommand") {
    CHECK_THROWS_AS(run(config_for("", dir), fixed()), ConfigError);
  }
  SUBCASE("flagged violations give exit 1") {
    // a clock running to 1000 makes the fluctuations dwarf the threshold of the small windows
    const auto r = run(config_for("[run]\nsubcommand = poisson-lln\n[experiment]\nwindows = 1,4,9\ngamma = 0.6\n"
                                  "T = 1000\ntau_T = 1000\ntrials = 5\n",
                                  dir),
                       fixed());
    CHECK(r.violations > 0);
    CHECK(r.exit_code == 1);
  }
  SUBCASE("failed sweep rows count as violations") {
    // the declared voltage range misses the resting state, where closing is fastest
    const auto r = run(config_for("[run]\nsubcommand = converge\n[model]\nbeta = exp(-20*(v-0.5))\nv_min = 0.5\n"
                                  "[experiment]\nT = 3\nn_list = 2\nsamples = 2\nswap_draws = 0\nmf_dt = 0.00002\n",
                                  dir),
                       fixed());
    const auto records = slurp(dir / "records.csv");
    CHECK(records.find("rate bound violated") != std::string::npos);
    CHECK(records.find("compartment") != std::string::npos);
    CHECK(r.violations == 2);
    CHECK(r.exit_code == 1);
  }
  fs::remove_all(dir);
}

TEST_CASE("output directory override") {
  const auto file_dir = scratch("from_file"), env_dir = scratch("from_env");
  const auto c = config_for("[run]\nsubcommand = corrector-check\n[experiment]\ncorrector_n = 16\n", file_dir);
  ::setenv("IONCHAN_OUT_DIR", env_dir.string().c_str(), 1);
  const auto r = run(c);
  CHECK(r.out_dir == env_dir.string());
  CHECK(fs::exists(env_dir / "corrector.csv"));
  CHECK_FALSE(fs::exists(file_dir));
  // an explicit directory wins over the environment
  const auto r2 = run(c, fixed());
  CHECK(r2.out_dir == file_dir.string());
  ::unsetenv("IONCHAN_OUT_DIR");
  fs::remove_all(file_dir);
  fs::remove_all(env_dir);
}

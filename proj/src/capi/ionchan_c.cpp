#include "ionchan/ionchan.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <fstream>
#include <ostream>
#include <sstream>
#include <streambuf>

#include "ionchan/averaging.hpp"
#include "ionchan/config.hpp"
#include "ionchan/error.hpp"
#include "ionchan/io.hpp"
#include "ionchan/run.hpp"
#include "ionchan/stoch.hpp"

struct ionch_config {
  ionchan::RunConfig config;
  bool out_fixed = false;
};

struct ionch_model {
  ionchan::CircleLattice lattice;
  ionchan::ModelSpec spec;
};

struct ionch_trajectory {
  ionchan::Trajectory traj;
};

namespace {

thread_local std::string last_error;

ionch_status fail(ionch_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Maps whatever the core threw to a status code.
template <class F>
ionch_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const ionchan::ConfigError& e) {
    return fail(e.kind() == ionchan::ConfigError::Value ? IONCH_RANGE : IONCH_PARSE, e.what());
  } catch (const ionchan::BoundViolation& e) {
    return fail(IONCH_BOUND, e.what());
  } catch (const ionchan::IntegrationError& e) {
    return fail(IONCH_INTEGRATION, e.what());
  } catch (const ionchan::ModelError& e) {
    return fail(IONCH_MODEL, e.what());
  } catch (const ionchan::IoError& e) {
    return fail(IONCH_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IONCH_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IONCH_INTERNAL, e.what());
  }
}

#define IONCH_REQUIRE(cond, what) \
  if (!(cond)) return fail(IONCH_INVALID_ARG, what)

void copy_text(char* dst, std::size_t cap, const std::string& src) {
  const std::size_t n = std::min(cap - 1, src.size());
  std::memcpy(dst, src.data(), n);
  dst[n] = '\0';
}

// Line-buffered stream that forwards each line to a C callback.
class CallbackBuf : public std::streambuf {
 public:
  CallbackBuf(ionch_log_fn fn, void* user) : fn_(fn), user_(user) {}

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return ch;
    if (ch == '\n') {
      fn_(line_.c_str(), user_);
      line_.clear();
    } else {
      line_.push_back(static_cast<char>(ch));
    }
    return ch;
  }

 private:
  ionch_log_fn fn_;
  void* user_;
  std::string line_;
};

}  // namespace

extern "C" {

const char* ionch_version(void) { return "1.0.0"; }

const char* ionch_status_name(ionch_status s) {
  switch (s) {
    case IONCH_OK: return "ok";
    case IONCH_INVALID_ARG: return "invalid argument";
    case IONCH_PARSE: return "parse error";
    case IONCH_RANGE: return "range error";
    case IONCH_MODEL: return "model error";
    case IONCH_BOUND: return "rate bound violation";
    case IONCH_INTEGRATION: return "integration error";
    case IONCH_IO: return "i/o error";
    case IONCH_VIOLATION: return "invariant violation";
    case IONCH_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* ionch_last_error(void) { return last_error.c_str(); }

ionch_status ionch_config_parse(const char* text, ionch_config** out) {
  IONCH_REQUIRE(text && out, "null argument");
  return guarded([&] {
    *out = new ionch_config{ionchan::parse_config(text)};
    return IONCH_OK;
  });
}

ionch_status ionch_config_load(const char* path, ionch_config** out) {
  IONCH_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new ionch_config{ionchan::load_config(path)};
    return IONCH_OK;
  });
}

ionch_status ionch_config_set(ionch_config* c, const char* path, const char* value) {
  IONCH_REQUIRE(c && path && value, "null argument");
  return guarded([&] {
    ionchan::set_config_value(c->config, path, value);
    return IONCH_OK;
  });
}

ionch_status ionch_config_set_subcommand(ionch_config* c, const char* name) {
  IONCH_REQUIRE(c && name, "null argument");
  if (!ionchan::parse_subcommand(name)) return fail(IONCH_INVALID_ARG, std::string("unknown subcommand: ") + name);
  return ionch_config_set(c, "run.subcommand", name);
}

ionch_status ionch_config_set_seed(ionch_config* c, uint64_t seed) {
  IONCH_REQUIRE(c, "null argument");
  return ionch_config_set(c, "run.seed", std::to_string(seed).c_str());
}

ionch_status ionch_config_set_workers(ionch_config* c, int workers) {
  IONCH_REQUIRE(c, "null argument");
  return ionch_config_set(c, "run.workers", std::to_string(workers).c_str());
}

ionch_status ionch_config_set_out_dir(ionch_config* c, const char* dir) {
  IONCH_REQUIRE(c && dir && *dir, "null or empty directory");
  const auto s = ionch_config_set(c, "io.out", dir);
  if (s == IONCH_OK) c->out_fixed = true;
  return s;
}

ionch_status ionch_config_emit(const ionch_config* c, char* buf, size_t capacity, size_t* needed) {
  IONCH_REQUIRE(c, "null argument");
  IONCH_REQUIRE(buf || capacity == 0, "null buffer with nonzero capacity");
  return guarded([&] {
    const auto text = ionchan::emit_config(c->config);
    if (needed) *needed = text.size() + 1;
    if (capacity > 0) copy_text(buf, capacity, text);
    return IONCH_OK;
  });
}

void ionch_config_free(ionch_config* c) { delete c; }

ionch_status ionch_run(const ionch_config* c, ionch_log_fn log, void* user, ionch_run_summary* summary) {
  IONCH_REQUIRE(c, "null argument");
  return guarded([&] {
    std::unique_ptr<CallbackBuf> buf;
    std::unique_ptr<std::ostream> os;
    ionchan::RunOptions opt;
    opt.out_dir_fixed = c->out_fixed;
    if (log) {
      buf = std::make_unique<CallbackBuf>(log, user);
      os = std::make_unique<std::ostream>(buf.get());
      opt.log = os.get();
    }
    const auto r = ionchan::run(c->config, opt);
    if (summary) {
      summary->exit_code = r.exit_code;
      summary->rows = r.rows;
      summary->violations = r.violations;
      summary->has_slope = r.slope.has_value();
      summary->slope = r.slope.value_or(NAN);
      copy_text(summary->line, sizeof summary->line, r.summary);
      copy_text(summary->out_dir, sizeof summary->out_dir, r.out_dir);
    }
    if (r.exit_code != 0) return fail(IONCH_VIOLATION, r.summary);
    return IONCH_OK;
  });
}

ionch_status ionch_model_create(const ionch_config* c, ionch_model** out) {
  IONCH_REQUIRE(c && out, "null argument");
  return guarded([&] {
    auto lattice = ionchan::config_lattice(c->config);
    auto spec = ionchan::model_factory(c->config)(lattice);
    *out = new ionch_model{lattice, std::move(spec)};
    return IONCH_OK;
  });
}

int ionch_model_sites(const ionch_model* m) { return m ? m->lattice.n() : 0; }
int ionch_model_types(const ionch_model* m) { return m ? m->spec.model.types() : 0; }
int ionch_model_configs(const ionch_model* m) { return m ? m->spec.model.configs() : 0; }

ionch_status ionch_model_rate_bound(const ionch_model* m, double* Lambda) {
  IONCH_REQUIRE(m && Lambda, "null argument");
  return guarded([&] {
    *Lambda = ionchan::rate_bound(m->spec.model, m->lattice.n()).Lambda;
    return IONCH_OK;
  });
}

void ionch_model_free(ionch_model* m) { delete m; }

ionch_status ionch_simulate(const ionch_model* m, const char* algorithm, double T, double step, uint64_t seed,
                            ionch_trajectory** out) {
  IONCH_REQUIRE(m && algorithm && out, "null argument");
  IONCH_REQUIRE(T >= 0.0 && std::isfinite(T), "T must be finite and nonnegative");
  IONCH_REQUIRE(step > 0.0 && std::isfinite(step), "step must be positive");
  IONCH_REQUIRE(!std::strcmp(algorithm, "pet") || !std::strcmp(algorithm, "il") || !std::strcmp(algorithm, "oracle"),
                "algorithm must be pet, il or oracle");
  return guarded([&] {
    const auto alg = ionchan::parse_algorithm(algorithm);
    ionchan::SimOptions opt;
    if (alg == ionchan::Algorithm::Pet) opt.dt_max = step;
    else if (alg == ionchan::Algorithm::Il) opt.tau = step, opt.dt_max = std::min(opt.dt_max, step);
    else opt.dt = step;
    ionchan::Rng init(seed, 0);
    auto state = ionchan::sample_initial_state(m->lattice, m->spec.model, m->spec.init, init);
    ionchan::Rng rng(seed, 1);
    ionchan::Recorder rec;
    ionchan::simulate(alg, m->lattice, m->spec.model, state, T, rng, opt, rec);
    *out = new ionch_trajectory{std::move(rec.trajectory())};
    return IONCH_OK;
  });
}

size_t ionch_trajectory_rows(const ionch_trajectory* t) { return t ? t->traj.rows() : 0; }
size_t ionch_trajectory_events(const ionch_trajectory* t) { return t ? t->traj.events.size() : 0; }
double ionch_trajectory_time(const ionch_trajectory* t, size_t row) {
  return t && row < t->traj.rows() ? t->traj.times[row] : NAN;
}

ionch_status ionch_trajectory_voltage(const ionch_trajectory* t, size_t row, double* out) {
  IONCH_REQUIRE(t && out, "null argument");
  IONCH_REQUIRE(row < t->traj.rows(), "row out of range");
  const auto v = t->traj.voltage(row);
  std::copy(v.begin(), v.end(), out);
  return IONCH_OK;
}

ionch_status ionch_trajectory_write_csv(const ionch_trajectory* t, const char* path) {
  IONCH_REQUIRE(t && path, "null argument");
  return guarded([&] {
    ionchan::write_file_atomic(path, [&](std::ostream& os) { t->traj.write_csv(os); });
    return IONCH_OK;
  });
}

void ionch_trajectory_free(ionch_trajectory* t) { delete t; }

ionch_status ionch_window_size(double h, double p, int* N) {
  IONCH_REQUIRE(N, "null argument");
  return guarded([&] {
    *N = ionchan::window_size(h, p);
    return IONCH_OK;
  });
}

ionch_status ionch_corrector_ceilings(int N, double D, double out[3]) {
  IONCH_REQUIRE(out, "null argument");
  IONCH_REQUIRE(N >= 1 && N % 2 == 1, "window size must be odd and positive");
  IONCH_REQUIRE(D > 0.0, "diffusivity must be positive");
  const auto c = ionchan::corrector_ceilings(N, D);
  out[0] = c.l1;
  out[1] = c.diff;
  out[2] = c.jump;
  return IONCH_OK;
}

ionch_status ionch_heat_kernel(double t, double x, double y, double D, double L, double* out) {
  IONCH_REQUIRE(out, "null argument");
  IONCH_REQUIRE(t > 0.0 && D > 0.0 && L > 0.0, "t, D and L must be positive");
  return guarded([&] {
    *out = ionchan::heat_kernel(t, x, y, D, L);
    return IONCH_OK;
  });
}

}  // extern "C"

#include "ionchan/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include "ionchan/error.hpp"
#include "ionchan/expr.hpp"
#include "ionchan/presets.hpp"

namespace ionchan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Type { Int, Real, Text, Choice, Bool, IntList, RealList, ExprV, ExprX };

struct KeySpec {
  std::string path;
  Type type;
  std::optional<std::string> def;  // absent: optional key without default
  double lo = -kInf;
  double hi = kInf;
  bool hi_open = false;  // value must be < hi instead of <= hi
  bool lo_open = false;
  std::vector<std::string> choices;
};

KeySpec key(std::string path, Type type, std::optional<std::string> def, double lo = -kInf, double hi = kInf) {
  return {std::move(path), type, std::move(def), lo, hi, false, false, {}};
}

KeySpec positive(std::string path, Type type, std::optional<std::string> def) {
  auto k = key(std::move(path), type, std::move(def), 0.0);
  k.lo_open = true;
  return k;
}

KeySpec choice(std::string path, std::string def, std::vector<std::string> choices) {
  KeySpec k = key(std::move(path), Type::Choice, std::move(def));
  k.choices = std::move(choices);
  return k;
}

std::string squares(int count) {
  std::string s;
  for (int i = 1; i <= count; ++i) s += (i > 1 ? "," : "") + std::to_string(i * i);
  return s;
}

const std::vector<KeySpec>& common_keys() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    std::vector<std::string> subs{""};
    for (auto s : subcommand_names()) subs.emplace_back(s);
    k.push_back(choice("run.subcommand", "", subs));
    k.push_back(key("run.seed", Type::Int, "1", 0.0));
    k.push_back(key("run.workers", Type::Int, "1", 1.0, 1024.0));
    k.push_back(choice("model.preset", "toy",
                       {"toy", "two-gate-product", "hodgkin-huxley", "exclusive", "macro-density", "custom"}));
    k.push_back(key("lattice.n", Type::Int, "64", 1.0, 1e7));
    k.push_back(positive("lattice.h", Type::Real, std::nullopt));
    k.push_back(positive("lattice.L", Type::Real, "16"));
    k.push_back(key("lattice.D", Type::Real, "1", 0.0));
    k.push_back(choice("algorithm.name", "pet", {"pet", "il", "oracle"}));
    k.push_back(positive("algorithm.dt_max", Type::Real, "0.01"));
    k.push_back(positive("algorithm.tau", Type::Real, "0.125"));
    k.push_back(positive("algorithm.dt", Type::Real, "0.0001"));
    k.push_back(choice("algorithm.voltage", "dense", {"dense", "exact"}));
    k.push_back(key("algorithm.margin", Type::Real, "0.1", 0.0));
    k.push_back(key("algorithm.dt_record", Type::Real, "0", 0.0));
    k.push_back(positive("experiment.T", Type::Real, "15"));
    k.push_back(key("experiment.n_list", Type::IntList, "2..12", 1.0, 1e6));
    k.push_back(key("experiment.samples", Type::Int, "10", 1.0, 1e9));
    KeySpec p = key("experiment.p", Type::Real, std::nullopt, 0.0, 1.0);
    p.hi_open = true;
    k.push_back(p);
    k.push_back(positive("experiment.mf_dt", Type::Real, "0.001"));
    k.push_back(key("experiment.swap_draws", Type::Int, "10000", 0.0, 1e9));
    k.push_back(key("experiment.bins", Type::Int, "40", 1.0, 1e6));
    k.push_back(positive("experiment.h", Type::Real, "0.25"));
    k.push_back(positive("experiment.tau_list", Type::RealList, "0.25,0.125"));
    k.push_back(key("experiment.bootstrap", Type::Int, "200", 0.0, 1e7));
    k.push_back(positive("experiment.gamma", Type::Real, "2"));
    k.push_back(key("experiment.windows", Type::IntList, squares(40), 1.0, 1e8));
    k.push_back(key("experiment.tau_T", Type::Real, "1", 0.0));
    k.push_back(key("experiment.trials", Type::Int, "100", 1.0, 1e9));
    k.push_back(choice("experiment.clocks", "identity", {"identity", "random", "zero"}));
    k.push_back(key("experiment.corrector_n", Type::IntList, "16,64,256", 1.0, 1e7));
    KeySpec cp = key("experiment.corrector_p", Type::RealList, "0,1/3,0.5", 0.0, 1.0);
    cp.hi_open = true;
    k.push_back(cp);
    k.push_back(key("experiment.corrector_L", Type::Real, "1", 0.0));
    k.push_back(key("experiment.clamp_v", Type::Real, "-50"));
    k.push_back(key("experiment.runs", Type::Int, "10000", 1.0, 1e9));
    k.push_back(positive("experiment.hh_T", Type::Real, "60"));
    k.push_back(choice("io.trajectory_format", "csv", {"csv", "binary", "both", "none"}));
    k.push_back(key("io.out", Type::Text, "out"));
    k.push_back(key("io.resume", Type::Bool, "false"));
    return k;
  }();
  return keys;
}

std::vector<KeySpec> preset_keys(const std::string& preset) {
  std::vector<KeySpec> k;
  auto expr_v = [&](const char* name, const char* def) { k.push_back(key(std::string("model.") + name, Type::ExprV, def)); };
  auto expr_x = [&](const char* name, std::optional<std::string> def) {
    k.push_back(key(std::string("model.") + name, Type::ExprX, std::move(def)));
  };
  auto real = [&](const char* name, const char* def) { k.push_back(key(std::string("model.") + name, Type::Real, def)); };
  const char* a = "exp(10*(v-0.5))";
  const char* b = "exp(-10*(v-0.5))";
  if (preset == "toy") {
    expr_v("alpha", a);
    expr_v("beta", b);
    expr_v("f", "1-v");
    expr_v("g", "v/10");
    expr_x("v0", "exp(-(x-(L-h)/2)^2)");
    expr_x("open_probability", std::nullopt);
    real("v_min", "0");
    real("v_max", "1");
  } else if (preset == "two-gate-product") {
    expr_v("alpha", a);
    expr_v("beta", b);
    expr_v("alpha2", a);
    expr_v("beta2", b);
    expr_v("f", "1-v");
    expr_x("q1", "0.5");
    expr_x("q2", "0.5");
    expr_x("v0", "0");
    real("v_min", "0");
    real("v_max", "1");
  } else if (preset == "hodgkin-huxley") {
    expr_v("alpha_m", "0.1*vtrap(-(v+40),10)");
    expr_v("beta_m", "4*exp(-(v+65)/18)");
    expr_v("alpha_h", "0.07*exp(-(v+65)/20)");
    expr_v("beta_h", "1/(1+exp(-(v+35)/10))");
    expr_v("alpha_n", "0.01*vtrap(-(v+55),10)");
    expr_v("beta_n", "0.125*exp(-(v+65)/80)");
    real("g_na", "120");
    real("g_k", "36");
    real("g_l", "0.3");
    real("e_na", "50");
    real("e_k", "-77");
    real("e_l", "-54.387");
    expr_x("v0", "-65");
    real("v_min", "-100");
    real("v_max", "60");
  } else if (preset == "exclusive") {
    expr_v("alpha1", a);
    expr_v("beta1", b);
    expr_v("alpha2", a);
    expr_v("beta2", b);
    expr_v("f", "1-v");
    expr_v("g", "v/10");
    k.push_back(key("model.p_first", Type::Real, "0.5", 0.0, 1.0));
    expr_x("v0", "0");
    real("v_min", "0");
    real("v_max", "1");
  } else if (preset == "macro-density") {
    expr_v("alpha", a);
    expr_v("beta", b);
    expr_v("f", "1-v");
    expr_x("p", "0.8");
    expr_x("q", "0.5");
    expr_x("v0", "0");
    real("v_min", "0");
    real("v_max", "1");
  } else if (preset == "custom") {
    k.push_back(key("model.types", Type::Int, "1", 1.0, 64.0));
    k.push_back(key("model.configs", Type::Int, "2", 1.0, 64.0));
    expr_x("v0", "0");
    real("v_min", "0");
    real("v_max", "1");
  }
  return k;
}

// drift_I_J, rate_I_A_B, z0_I_J (one-based) of the custom preset
const std::regex& custom_key_pattern() {
  static const std::regex re(R"(model\.(drift|z0)_(\d+)_(\d+)|model\.rate_(\d+)_(\d+)_(\d+))");
  return re;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double eval_number(const std::string& text, const std::string& path) {
  try {
    const auto e = Expression::parse(text, {});
    const double v = e();
    if (!std::isfinite(v)) throw ConfigError("value of " + path + " is not finite", 0, path, ConfigError::Value);
    return v;
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what(), 0, path, ConfigError::Value);
  }
}

void check_range(const KeySpec& spec, double v) {
  const bool low = spec.lo_open ? v > spec.lo : v >= spec.lo;
  const bool high = spec.hi_open ? v < spec.hi : v <= spec.hi;
  if (low && high) return;
  std::string range = std::string(spec.lo_open ? "(" : "[") + (std::isinf(spec.lo) ? "-inf" : fmt_real(spec.lo)) + ", " +
                      (std::isinf(spec.hi) ? "inf" : fmt_real(spec.hi)) + (spec.hi_open ? ")" : "]");
  throw ConfigError(spec.path + " = " + fmt_real(v) + " is out of range " + range, 0, spec.path, ConfigError::Value);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string canonical(const KeySpec& spec, const std::string& raw) {
  const std::string v = trim(raw);
  switch (spec.type) {
    case Type::Text:
      return v;
    case Type::Choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end()) {
        std::string opts;
        for (const auto& c : spec.choices)
          if (!c.empty()) opts += (opts.empty() ? "" : ", ") + c;
        throw ConfigError(spec.path + " = '" + v + "' is not one of: " + opts, 0, spec.path, ConfigError::Value);
      }
      return v;
    case Type::Bool:
      if (v == "true" || v == "yes" || v == "1") return "true";
      if (v == "false" || v == "no" || v == "0") return "false";
      throw ConfigError(spec.path + " expects true or false", 0, spec.path, ConfigError::Value);
    case Type::Int: {
      const double x = eval_number(v, spec.path);
      if (x != std::floor(x) || std::fabs(x) > 9e15) throw ConfigError(spec.path + " must be an integer", 0, spec.path, ConfigError::Value);
      check_range(spec, x);
      return std::to_string(static_cast<long long>(x));
    }
    case Type::Real: {
      const double x = eval_number(v, spec.path);
      check_range(spec, x);
      return fmt_real(x);
    }
    case Type::IntList: {
      std::string out;
      for (const auto& tok : split_list(v)) {
        const auto dots = tok.find("..");
        long long lo, hi;
        try {
          std::size_t used = 0;
          if (dots == std::string::npos) {
            lo = hi = std::stoll(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
          } else {
            lo = std::stoll(trim(tok.substr(0, dots)));
            hi = std::stoll(trim(tok.substr(dots + 2)));
          }
        } catch (const std::exception&) {
          throw ConfigError(spec.path + ": '" + tok + "' is not an integer or a range a..b", 0, spec.path, ConfigError::Value);
        }
        if (hi < lo) throw ConfigError(spec.path + ": empty range '" + tok + "'", 0, spec.path, ConfigError::Value);
        if (hi - lo > 1000000) throw ConfigError(spec.path + ": range '" + tok + "' is too long", 0, spec.path, ConfigError::Value);
        for (long long q = lo; q <= hi; ++q) {
          check_range(spec, static_cast<double>(q));
          out += (out.empty() ? "" : ",") + std::to_string(q);
        }
      }
      if (out.empty()) throw ConfigError(spec.path + " must list at least one value", 0, spec.path, ConfigError::Value);
      return out;
    }
    case Type::RealList: {
      std::string out;
      for (const auto& tok : split_list(v)) {
        const double x = eval_number(tok, spec.path);
        check_range(spec, x);
        out += (out.empty() ? "" : ",") + fmt_real(x);
      }
      if (out.empty()) throw ConfigError(spec.path + " must list at least one value", 0, spec.path, ConfigError::Value);
      return out;
    }
    case Type::ExprV:
    case Type::ExprX:
      try {
        if (spec.type == Type::ExprV) Expression::parse(v, {"v"});
        else Expression::parse(v, {"x"}, {{"L", 1.0}, {"h", 1.0}});
      } catch (const ConfigError& e) {
        throw ConfigError(spec.path + ": " + e.what(), 0, spec.path, ConfigError::Value);
      }
      return v;
  }
  return v;
}

std::optional<KeySpec> find_spec(const std::string& preset, const std::string& path) {
  for (const auto& s : common_keys())
    if (s.path == path) return s;
  for (const auto& s : preset_keys(preset))
    if (s.path == path) return s;
  if (preset == "custom") {
    std::smatch m;
    if (std::regex_match(path, m, custom_key_pattern())) {
      if (m[1].matched) return key(path, m[1] == "drift" ? Type::ExprV : Type::ExprX, std::nullopt);
      return key(path, Type::ExprV, std::nullopt);
    }
  }
  return std::nullopt;
}

// Custom-preset index checks need types/configs, so they run after all keys are in.
void check_custom_indices(const RunConfig& c) {
  if (c.text("model.preset") != "custom") return;
  const auto I = c.integer("model.types"), J = c.integer("model.configs");
  for (const auto& [path, value] : c.values) {
    std::smatch m;
    if (!std::regex_match(path, m, custom_key_pattern())) continue;
    std::vector<long long> idx;
    for (std::size_t g = 2; g < m.size(); ++g)
      if (m[g].matched) idx.push_back(std::stoll(m[g]));
    bool ok = idx[0] >= 1 && idx[0] <= I;
    for (std::size_t q = 1; q < idx.size(); ++q) ok = ok && idx[q] >= 1 && idx[q] <= J;
    if (m[4].matched && idx[1] == idx[2]) ok = false;
    if (!ok) throw ConfigError(path + " refers to a type or configuration outside the model", 0, path, ConfigError::Value);
  }
}

void fill_defaults(RunConfig& c) {
  for (const auto& s : common_keys())
    if (s.def && !c.has(s.path)) c.values[s.path] = canonical(s, *s.def);
  for (const auto& s : preset_keys(c.text("model.preset")))
    if (s.def && !c.has(s.path)) c.values[s.path] = canonical(s, *s.def);
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string_view>& subcommand_names() {
  static const std::vector<std::string_view> names{"simulate",        "mean-field",  "converge", "algo-error",
                                                   "corrector-check", "poisson-lln", "hh-demo"};
  return names;
}

const char* subcommand_name(Subcommand s) { return subcommand_names()[static_cast<int>(s)].data(); }

std::optional<Subcommand> parse_subcommand(std::string_view name) {
  const auto& names = subcommand_names();
  for (std::size_t q = 0; q < names.size(); ++q)
    if (names[q] == name) return static_cast<Subcommand>(q);
  return std::nullopt;
}

const std::string& RunConfig::text(const std::string& path) const {
  auto it = values.find(path);
  if (it == values.end()) throw ConfigError("missing configuration value " + path, 0, path, ConfigError::Value);
  return it->second;
}

double RunConfig::real(const std::string& path) const { return std::stod(text(path)); }
std::int64_t RunConfig::integer(const std::string& path) const { return std::stoll(text(path)); }
bool RunConfig::flag(const std::string& path) const { return text(path) == "true"; }

std::vector<int> RunConfig::int_list(const std::string& path) const {
  std::vector<int> out;
  for (const auto& t : split_list(text(path))) out.push_back(std::stoi(t));
  return out;
}

std::vector<double> RunConfig::real_list(const std::string& path) const {
  std::vector<double> out;
  for (const auto& t : split_list(text(path))) out.push_back(std::stod(t));
  return out;
}

std::optional<Subcommand> RunConfig::subcommand() const {
  auto it = values.find("run.subcommand");
  if (it == values.end() || it->second.empty()) return std::nullopt;
  return parse_subcommand(it->second);
}

RunConfig parse_config(std::string_view text) {
  static const std::vector<std::string> sections{"run", "model", "lattice", "algorithm", "experiment", "io"};
  struct Raw {
    std::string value;
    int line;
  };
  std::map<std::string, Raw> raw;
  std::string section;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string line(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header '" + line + "'", lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError("unknown section [" + section + "]", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", lineno);
    if (section.empty()) throw ConfigError("key outside of any [section]", lineno);
    std::string k = trim(line.substr(0, eq));
    std::replace(k.begin(), k.end(), '-', '_');
    if (k.empty()) throw ConfigError("missing key before '='", lineno);
    const std::string path = section + "." + k;
    if (raw.count(path)) throw ConfigError("duplicate key " + path, lineno, path);
    raw[path] = {trim(line.substr(eq + 1)), lineno};
  }

  RunConfig c;
  std::string preset = "toy";
  if (auto it = raw.find("model.preset"); it != raw.end()) preset = it->second.value;
  for (const auto& [path, r] : raw) {
    const auto spec = find_spec(preset, path);
    if (!spec) throw ConfigError("unknown key " + path + (path.starts_with("model.") ? " for preset '" + preset + "'" : ""), r.line, path);
    try {
      c.values[path] = canonical(*spec, r.value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), r.line, path, e.kind());
    }
  }
  fill_defaults(c);
  try {
    check_custom_indices(c);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), raw.count(e.key()) ? raw.at(e.key()).line : 0, e.key(), e.kind());
  }
  if (c.real("model.v_max") < c.real("model.v_min"))
    throw ConfigError("model.v_max must not be below model.v_min", 0, "model.v_max", ConfigError::Value);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> config_keys(const RunConfig& c) {
  std::vector<std::string> out;
  for (const auto& s : common_keys()) out.push_back(s.path);
  // preset keys go right after model.preset so each section stays contiguous
  auto at = std::find(out.begin(), out.end(), std::string("model.preset"));
  at = at == out.end() ? out.end() : at + 1;
  for (const auto& s : preset_keys(c.text("model.preset"))) at = out.insert(at, s.path) + 1;
  for (const auto& [path, v] : c.values)
    if (std::find(out.begin(), out.end(), path) == out.end()) out.push_back(path);
  return out;
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  std::string current;
  // extra keys (custom preset entries) must not reopen an earlier section
  auto keys = config_keys(c);
  std::vector<std::string> order;
  for (const auto& path : keys)
    if (auto sec = path.substr(0, path.find('.')); std::find(order.begin(), order.end(), sec) == order.end())
      order.push_back(sec);
  auto rank = [&](const std::string& path) {
    return std::find(order.begin(), order.end(), path.substr(0, path.find('.'))) - order.begin();
  };
  std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
  for (const auto& path : keys) {
    auto it = c.values.find(path);
    if (it == c.values.end()) continue;
    const auto dot = path.find('.');
    const std::string section = path.substr(0, dot);
    if (section != current) {
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
      current = section;
    }
    out += path.substr(dot + 1) + " = " + it->second + "\n";
  }
  return out;
}

void set_config_value(RunConfig& c, const std::string& path, const std::string& value) {
  const std::string preset = path == "model.preset" ? value : c.text("model.preset");
  const auto spec = find_spec(preset, path);
  if (!spec) throw ConfigError("unknown key " + path, 0, path);
  c.values[path] = canonical(*spec, value);
  if (path == "model.preset") {
    // drop model keys of the previous preset, then install the new defaults
    std::erase_if(c.values, [](const auto& kv) { return kv.first.starts_with("model.") && kv.first != "model.preset"; });
    fill_defaults(c);
  }
}

CircleLattice config_lattice(const RunConfig& c) {
  const double L = c.real("lattice.L"), D = c.real("lattice.D");
  if (c.has("lattice.h")) {
    const double h = c.real("lattice.h"), count = L / h;
    if (std::fabs(count - std::round(count)) > 1e-9 * count)
      throw ConfigError("lattice.h must divide lattice.L into whole compartments", 0, "lattice.h", ConfigError::Value);
    return CircleLattice::from_spacing(h, L, D);
  }
  return CircleLattice(static_cast<int>(c.integer("lattice.n")), L, D);
}

SimOptions config_sim_options(const RunConfig& c) {
  SimOptions o;
  o.dt_max = c.real("algorithm.dt_max");
  o.tau = c.real("algorithm.tau");
  o.dt = c.real("algorithm.dt");
  o.dt_record = c.real("algorithm.dt_record");
  o.margin = c.real("algorithm.margin");
  o.voltage = c.text("algorithm.voltage") == "exact" ? VoltageEval::Exact : VoltageEval::Dense;
  return o;
}

namespace {

ScalarFn fn_v(const RunConfig& c, const std::string& name) {
  const std::string path = "model." + name;
  if (!c.has(path)) return nullptr;
  auto e = Expression::parse(c.text(path), {"v"});
  return [e](double v) { return e(v); };
}

ScalarFn fn_x(const RunConfig& c, const std::string& name, const CircleLattice& lattice) {
  const std::string path = "model." + name;
  if (!c.has(path)) return nullptr;
  auto e = Expression::parse(c.text(path), {"x"}, {{"L", lattice.L()}, {"h", lattice.h()}});
  return [e](double x) { return e(x); };
}

ModelSpec build_custom(const RunConfig& c, const CircleLattice& lattice) {
  const int I = static_cast<int>(c.integer("model.types")), J = static_cast<int>(c.integer("model.configs"));
  ChannelModel m("custom", I, J);
  InitialData init;
  init.v0 = fn_x(c, "v0", lattice);
  init.z0.assign(static_cast<std::size_t>(I) * J, nullptr);
  for (const auto& [path, value] : c.values) {
    std::smatch g;
    if (!std::regex_match(path, g, custom_key_pattern())) continue;
    const std::string name = path.substr(6);
    if (g[1].matched) {
      const int i = std::stoi(g[2]) - 1, j = std::stoi(g[3]) - 1;
      if (g[1] == "drift") m.set_drift(i, j, fn_v(c, name));
      else init.z0[static_cast<std::size_t>(i) * J + j] = fn_x(c, name, lattice);
    } else {
      m.set_rate(std::stoi(g[4]) - 1, std::stoi(g[5]) - 1, std::stoi(g[6]) - 1, fn_v(c, name));
    }
  }
  // types without any z0 entry start in configuration 1
  for (int i = 0; i < I; ++i) {
    bool set = false;
    for (int j = 0; j < J; ++j) set = set || static_cast<bool>(init.z0[static_cast<std::size_t>(i) * J + j]);
    if (!set) init.z0[static_cast<std::size_t>(i) * J] = [](double) { return 1.0; };
  }
  m.set_range({c.real("model.v_min"), c.real("model.v_max")});
  return {std::move(m), std::move(init)};
}

}  // namespace

ModelFactory model_factory(const RunConfig& c) {
  const std::string preset = c.text("model.preset");
  const VoltageRange range{c.real("model.v_min"), c.real("model.v_max")};
  // parse once up front so configuration errors surface before any run starts
  const CircleLattice probe(2, 1.0, 1.0);
  for (const auto& path : config_keys(c)) {
    if (!path.starts_with("model.") || !c.has(path)) continue;
    auto spec = find_spec(preset, path);
    if (spec && spec->type == Type::ExprV) fn_v(c, path.substr(6));
    if (spec && spec->type == Type::ExprX) fn_x(c, path.substr(6), probe);
  }
  return [c, preset, range](const CircleLattice& lattice) -> ModelSpec {
    if (preset == "toy") {
      ToyParams p;
      p.alpha = fn_v(c, "alpha");
      p.beta = fn_v(c, "beta");
      p.f = fn_v(c, "f");
      p.g = fn_v(c, "g");
      p.v0 = fn_x(c, "v0", lattice);
      p.open_probability = fn_x(c, "open_probability", lattice);
      p.range = range;
      return make_toy(p);
    }
    if (preset == "two-gate-product") {
      TwoGateParams p;
      p.alpha = fn_v(c, "alpha");
      p.beta = fn_v(c, "beta");
      p.alpha2 = fn_v(c, "alpha2");
      p.beta2 = fn_v(c, "beta2");
      p.f = fn_v(c, "f");
      p.q1 = fn_x(c, "q1", lattice);
      p.q2 = fn_x(c, "q2", lattice);
      p.v0 = fn_x(c, "v0", lattice);
      p.range = range;
      return make_two_gate(p);
    }
    if (preset == "hodgkin-huxley") {
      HodgkinHuxleyParams p;
      p.alpha_m = fn_v(c, "alpha_m");
      p.beta_m = fn_v(c, "beta_m");
      p.alpha_h = fn_v(c, "alpha_h");
      p.beta_h = fn_v(c, "beta_h");
      p.alpha_n = fn_v(c, "alpha_n");
      p.beta_n = fn_v(c, "beta_n");
      p.g_na = c.real("model.g_na");
      p.g_k = c.real("model.g_k");
      p.g_l = c.real("model.g_l");
      p.e_na = c.real("model.e_na");
      p.e_k = c.real("model.e_k");
      p.e_l = c.real("model.e_l");
      p.v0 = fn_x(c, "v0", lattice);
      p.range = range;
      return make_hodgkin_huxley(p);
    }
    if (preset == "exclusive") {
      ExclusiveParams p;
      p.alpha1 = fn_v(c, "alpha1");
      p.beta1 = fn_v(c, "beta1");
      p.alpha2 = fn_v(c, "alpha2");
      p.beta2 = fn_v(c, "beta2");
      p.f = fn_v(c, "f");
      p.g = fn_v(c, "g");
      p.p = c.real("model.p_first");
      p.v0 = fn_x(c, "v0", lattice);
      p.range = range;
      return make_exclusive(p);
    }
    if (preset == "macro-density") {
      MacroDensityParams p;
      p.alpha = fn_v(c, "alpha");
      p.beta = fn_v(c, "beta");
      p.f = fn_v(c, "f");
      p.p = fn_x(c, "p", lattice);
      p.q = fn_x(c, "q", lattice);
      p.v0 = fn_x(c, "v0", lattice);
      p.L = lattice.L();
      p.range = range;
      return make_macro_density(p);
    }
    return build_custom(c, lattice);
  };
}

}  // namespace ionchan

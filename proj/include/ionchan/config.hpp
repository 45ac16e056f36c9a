#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ionchan/experiments.hpp"

namespace ionchan {

enum class Subcommand { Simulate, MeanField, Converge, AlgoError, CorrectorCheck, PoissonLln, HhDemo };

const char* subcommand_name(Subcommand s);
std::optional<Subcommand> parse_subcommand(std::string_view name);
const std::vector<std::string_view>& subcommand_names();

/// Resolved run configuration. Every known key of the chosen preset is present
/// in `values` (defaults included) under its "section.key" path, in canonical
/// text form; optional keys without a default are absent until set.
struct RunConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& path) const { return values.count(path) != 0; }
  const std::string& text(const std::string& path) const;
  double real(const std::string& path) const;
  std::int64_t integer(const std::string& path) const;
  bool flag(const std::string& path) const;
  std::vector<int> int_list(const std::string& path) const;
  std::vector<double> real_list(const std::string& path) const;
  std::optional<Subcommand> subcommand() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Line-oriented `key = value` text with [section] headers and # comments.
/// Throws ConfigError carrying the line number (parse errors) or the key path
/// (range errors).
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Canonical text with every resolved value; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

/// Validates and stores one value (used for command-line overrides).
void set_config_value(RunConfig& config, const std::string& path, const std::string& value);

/// Known key paths for the config's current preset, in emission order.
std::vector<std::string> config_keys(const RunConfig& config);

/// Builds the model described by the [model] section for a given lattice.
ModelFactory model_factory(const RunConfig& config);

/// Lattice from [lattice]: n, or h when given.
CircleLattice config_lattice(const RunConfig& config);

SimOptions config_sim_options(const RunConfig& config);

}  // namespace ionchan

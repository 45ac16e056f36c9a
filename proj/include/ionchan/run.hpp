#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ionchan/config.hpp"

namespace ionchan {

struct RunResult {
  int exit_code = 0;
  std::string summary;  // the one-line summary printed at the end
  std::int64_t rows = 0;
  std::int64_t violations = 0;
  std::optional<double> slope;
  std::string out_dir;
  std::vector<std::string> files;
};

struct RunOptions {
  bool out_dir_fixed = false;  // --out given: ignore IONCHAN_OUT_DIR
  std::ostream* log = nullptr;  // progress lines; null for silence
};

/// Dispatches the configured subcommand, writes its outputs atomically into
/// the output directory and returns the summary. Exit code is 0 iff nothing
/// was flagged; hard errors are thrown.
RunResult run(const RunConfig& config, const RunOptions& options = {});

}  // namespace ionchan

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>

namespace ionchan {

/// Writes through a temporary sibling file and renames it into place, so a
/// failure (including an exception thrown by `writer`) never leaves a partial
/// file at `path`.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

}  // namespace ionchan

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kbound/types.hpp"

namespace kbound {

/// Reads a JSON Lines dataset. Image paths are resolved against the file's directory.
/// Throws DatasetError naming the 1-based line number on malformed input or duplicate ids.
std::vector<QueryRecord> load_dataset(const std::filesystem::path& path);

/// Writes records in the same JSON Lines schema; image paths are written relative to `path`.
void write_dataset(const std::filesystem::path& path, const std::vector<QueryRecord>& records);

/// Tags every record eval or heldout by a seeded shuffle. round(fraction * n) records become
/// heldout; record order is preserved.
std::vector<QueryRecord> assign_splits(std::vector<QueryRecord> records, double heldout_fraction,
                                       std::uint64_t seed);

}  // namespace kbound

#pragma once

#include <filesystem>
#include <optional>

#include "dnncov/coverage.hpp"

namespace dnncov {

/// Binary coverage snapshot, layout in docs/coverage_snapshot.md.
void save_snapshot(const CoverageState& state, const std::filesystem::path& path);

/// Reads a snapshot. When `expected` is given the stored registry fingerprint
/// must match it (kInput otherwise).
CoverageState load_snapshot(const std::filesystem::path& path,
                            const std::optional<TripletRegistry>& expected = std::nullopt);

}  // namespace dnncov

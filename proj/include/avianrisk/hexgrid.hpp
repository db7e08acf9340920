#pragma once

// Minimal H3 subset: point -> cell and cell -> parent, conforming to the
// public H3 index specification. Validated against reference-implementation
// test vectors in tests/data/h3_cells.json. Everything beyond this subset
// (neighbors, boundaries, cell -> point) is deliberately out of scope.

#include <cstdint>
#include <string>
#include <string_view>

namespace avianrisk::hexgrid {

inline constexpr std::uint64_t kInvalidCell = 0;

// Index the point (degrees, WGS84) at the given resolution in [0, 15].
// Throws std::invalid_argument on an out-of-range resolution.
std::uint64_t lat_lng_to_cell(double lat_deg, double lon_deg, int res);

// Coarser-resolution ancestor of a cell. parent_res must not exceed the
// cell's own resolution.
std::uint64_t cell_to_parent(std::uint64_t cell, int parent_res);

// Resolution stored in the index (0-15). Does not validate the rest.
int cell_resolution(std::uint64_t cell) noexcept;

// Full structural validity check per the H3 index specification.
bool is_valid_cell(std::uint64_t cell) noexcept;

// Canonical lowercase-hex form without leading zeros, e.g. "84f0c45ffffffff".
std::string cell_to_string(std::uint64_t cell);

// Parses the hex form; returns kInvalidCell if the string is not valid hex.
std::uint64_t cell_from_string(std::string_view s) noexcept;

} // namespace avianrisk::hexgrid

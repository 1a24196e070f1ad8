#pragma once

#include <string>

#include "lba/params.hpp"

// Weights container: magic "LBAW", u16 format version, u32 entry count,
// then per entry u32 name length + name bytes, u8 dtype tag (1 = float64),
// u8 rank, rank x u32 little-endian dims, raw little-endian values.
// Round trips are bit-exact and preserve entry order.

namespace lba::weightsio {

inline constexpr std::uint16_t kVersion = 1;

void save_weights(const ParamStore& ps, const std::string& path);
ParamStore load_weights(const std::string& path);

} // namespace lba::weightsio

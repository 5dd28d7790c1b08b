#pragma once

#include <cstdint>
#include <string>

#include "cpnet/layers.hpp"

namespace cpnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Flat binary container: magic "CPNT", version u32, parameter count u64,
// then per parameter (in store registration order): name length u32, UTF-8
// name bytes, rank u32, extents u64 each, values as little-endian f64.
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParamStore& store);

// Loads into an existing store: every stored parameter must already be
// registered with a matching shape (architecture comes from config, values
// from the file).
void load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace cpnet

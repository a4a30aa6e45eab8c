#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "granorm/param_store.hpp"

namespace granorm {

/// Binary parameter file, little-endian:
///   "GNSP" | u32 version (1) | u32 count |
///   count x ( u32 name_len | name | u32 rank | u32 dims[rank] | f32 data[] )
/// Values are narrowed to f32 on write and widened to f64 on read.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& store);
ParamStore decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// Rounds every value to the nearest f32, i.e. what a save/load cycle yields.
void round_to_f32(ParamStore& store);

}  // namespace granorm

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "rsteer/activation.hpp"

namespace rsteer {

// "RSD1" activation dump layout, all integers little-endian:
//
//   header : magic "RSD1" | version u16 | dtype u8 | hidden_dim u32
//            | model_id (u32 length + UTF-8 bytes) | record_count u64
//   record : query_id (u32 length + bytes) | label u8 | layer u16
//            | position i32 | hidden_dim x f32
inline constexpr std::string_view kDumpMagic = "RSD1";
inline constexpr std::uint16_t kDumpVersion = 1;
inline constexpr std::uint8_t kDumpDtypeF32 = 0;

std::uint64_t dump_header_size(std::string_view model_id);
std::uint64_t dump_record_size(std::string_view query_id, std::uint32_t hidden_dim);

/// Writes `set` and returns the number of bytes written. The set is validated
/// before the file is opened.
std::uint64_t write_dump(const ActivationSet& set, const std::filesystem::path& path);

/// Errors: BadMagic, UnsupportedVersion, TruncatedFile, DimensionMismatch
/// (trailing bytes or zero hidden_dim with records), InvariantViolation.
ActivationSet read_dump(const std::filesystem::path& path);

}  // namespace rsteer

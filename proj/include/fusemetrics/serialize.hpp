#pragma once

// Flat parameter container shared by the probe ("IPRB") and surrogate
// ("EVNT") artifacts:
//
//   offset 0   4 bytes  magic
//   offset 4   u32 LE   format version
//   offset 8   u32 LE   layer count
//   offset 12  u32 LE   number of float values that follow
//   offset 16  f32 LE   values, in the owning network's canonical order

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fusemetrics {

struct ParamFile {
  std::string magic;
  std::uint32_t version = 0;
  std::uint32_t layer_count = 0;
  std::vector<double> values;
};

inline constexpr std::size_t kParamHeaderBytes = 16;

std::vector<unsigned char> encode_param_file(const ParamFile& file);
ParamFile decode_param_file(std::span<const unsigned char> bytes, std::string_view expected_magic);

void write_param_file(const std::filesystem::path& path, const ParamFile& file);
ParamFile read_param_file(const std::filesystem::path& path, std::string_view expected_magic);

}  // namespace fusemetrics

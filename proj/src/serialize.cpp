#include "fusemetrics/serialize.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fusemetrics/error.hpp"

namespace fusemetrics {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const unsigned char> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<unsigned char> encode_param_file(const ParamFile& file) {
  if (file.magic.size() != 4) {
    throw Error(ErrorCode::InvalidArgument, "parameter file magic must be 4 bytes");
  }
  std::vector<unsigned char> out(file.magic.begin(), file.magic.end());
  put_u32(out, file.version);
  put_u32(out, file.layer_count);
  put_u32(out, static_cast<std::uint32_t>(file.values.size()));
  out.reserve(kParamHeaderBytes + 4 * file.values.size());
  for (double v : file.values) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::NonFiniteLoss, "refusing to serialize a non-finite parameter");
    }
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

ParamFile decode_param_file(std::span<const unsigned char> bytes, std::string_view expected_magic) {
  if (bytes.size() < kParamHeaderBytes) {
    throw Error(ErrorCode::FormatError, "parameter file shorter than its header");
  }
  ParamFile file;
  file.magic.assign(bytes.begin(), bytes.begin() + 4);
  if (file.magic != expected_magic) {
    throw Error(ErrorCode::FormatError, "bad magic '" + file.magic + "', expected '" +
                                            std::string(expected_magic) + "'");
  }
  file.version = get_u32(bytes, 4);
  file.layer_count = get_u32(bytes, 8);
  const std::uint32_t count = get_u32(bytes, 12);
  if (bytes.size() != kParamHeaderBytes + 4ull * count) {
    throw Error(ErrorCode::FormatError, "parameter file size does not match its header");
  }
  file.values.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    file.values[i] = std::bit_cast<float>(get_u32(bytes, kParamHeaderBytes + 4ull * i));
  }
  return file;
}

void write_param_file(const std::filesystem::path& path, const ParamFile& file) {
  const auto bytes = encode_param_file(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ParamFile read_param_file(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_param_file(bytes, expected_magic);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace fusemetrics

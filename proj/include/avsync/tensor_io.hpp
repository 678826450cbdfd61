#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace avsync {

// Dense f32 tensor as stored on disk.
//
// File layout ("AVT1" container), all little-endian:
//   magic "AVT1" | u8 rank | rank x u32 dimension sizes | f32 values, row-major
struct FloatTensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> values;

  std::size_t element_count() const;
  bool operator==(const FloatTensor&) const = default;
};

std::vector<std::uint8_t> encode_tensor(const FloatTensor& tensor);
FloatTensor decode_tensor(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace avsync

#include "avsync/tensor_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "avsync/errors.hpp"

namespace avsync {
namespace {

constexpr char kMagic[4] = {'A', 'V', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::size_t FloatTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(const FloatTensor& tensor) {
  if (tensor.shape.size() > 255) throw FormatError("tensor rank exceeds 255");
  if (tensor.element_count() != tensor.values.size()) {
    throw FormatError("tensor value count does not match its shape");
  }
  std::vector<std::uint8_t> out;
  out.reserve(5 + 4 * tensor.shape.size() + 4 * tensor.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(tensor.shape.size()));
  for (auto d : tensor.shape) put_u32(out, d);
  for (float v : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FloatTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("missing AVT1 magic");
  }
  FloatTensor t;
  const std::size_t rank = bytes[4];
  std::size_t offset = 5;
  if (bytes.size() < offset + 4 * rank) throw FormatError("truncated tensor header");
  t.shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i, offset += 4) t.shape[i] = get_u32(bytes.data() + offset);
  const std::size_t n = t.element_count();
  if (bytes.size() != offset + 4 * n) {
    throw FormatError("tensor payload is " + std::to_string(bytes.size() - offset) +
                      " bytes, header implies " + std::to_string(4 * n));
  }
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i, offset += 4) {
    t.values[i] = std::bit_cast<float>(get_u32(bytes.data() + offset));
  }
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed in chunks for large buffers.
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - done, 1u << 30);
    crc = crc32(crc, bytes.data() + done, static_cast<uInt>(chunk));
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace avsync

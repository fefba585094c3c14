#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace lsgd {

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

/// An unsigned-byte IDX tensor: row-major payload with big-endian dims.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::uint32_t magic() const { return 0x00000800u | static_cast<std::uint32_t>(dims.size()); }
  std::size_t element_count() const;
  bool operator==(const IdxTensor&) const = default;
};

/// Reads an IDX file. Files ending in ".gz" are decompressed transparently.
/// Throws FormatError on an unsupported magic number or when the payload
/// length differs from the size the header declares.
IdxTensor read_idx(const std::filesystem::path& path);

/// Like read_idx, but the magic number must equal `expected_magic`.
IdxTensor read_idx(const std::filesystem::path& path, std::uint32_t expected_magic);

/// Decodes an in-memory IDX image.
IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);

/// Writes `tensor`; gzip-compressed when the path ends in ".gz".
void write_idx(const std::filesystem::path& path, const IdxTensor& tensor);

}  // namespace lsgd

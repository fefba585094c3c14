#include "lsgd/idx.hpp"

#include "lsgd/errors.hpp"

#include <zlib.h>

#include <array>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

namespace lsgd {
namespace {

bool is_gzip_path(const std::filesystem::path& path) { return path.extension() == ".gz"; }

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

using GzFile = std::unique_ptr<std::remove_pointer_t<gzFile>, decltype(&gzclose)>;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  if (is_gzip_path(path)) {
    GzFile f(gzopen(path.c_str(), "rb"), &gzclose);
    if (!f) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::array<std::uint8_t, 1 << 16> chunk{};
    for (;;) {
      const int got = gzread(f.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
      if (got < 0) throw FormatError("corrupt gzip stream in " + path.string());
      if (got == 0) break;
      bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + got);
    }
    return bytes;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::size_t IdxTensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("IDX file shorter than its magic number");
  const std::uint32_t magic = read_be32(bytes.data());
  const std::uint32_t ndims = magic & 0xffu;
  // Only the unsigned-byte element type (0x08) is supported.
  if ((magic & 0xffffff00u) != 0x00000800u || ndims == 0) {
    throw FormatError("bad IDX magic " + hex(magic));
  }
  const std::size_t header = 4 + 4 * std::size_t{ndims};
  if (bytes.size() < header) throw FormatError("IDX header truncated");
  IdxTensor t;
  t.dims.reserve(ndims);
  for (std::uint32_t i = 0; i < ndims; ++i) t.dims.push_back(read_be32(bytes.data() + 4 + 4 * i));
  const std::size_t declared = t.element_count();
  const std::size_t present = bytes.size() - header;
  if (declared != present) {
    throw FormatError("IDX payload size mismatch: header declares " + std::to_string(declared) +
                      " bytes, file holds " + std::to_string(present));
  }
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return t;
}

IdxTensor read_idx(const std::filesystem::path& path) { return parse_idx(read_bytes(path)); }

IdxTensor read_idx(const std::filesystem::path& path, std::uint32_t expected_magic) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  if (bytes.size() >= 4 && read_be32(bytes.data()) != expected_magic) {
    throw FormatError("bad IDX magic " + hex(read_be32(bytes.data())) + " in " + path.string() +
                      " (expected " + hex(expected_magic) + ")");
  }
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > 255) {
    throw ArgumentError("IDX tensors need between 1 and 255 dimensions");
  }
  if (tensor.element_count() != tensor.data.size()) {
    throw DimensionError("IDX tensor payload does not match its dimensions");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * tensor.dims.size() + tensor.data.size());
  append_be32(out, tensor.magic());
  for (std::uint32_t d : tensor.dims) append_be32(out, d);
  out.insert(out.end(), tensor.data.begin(), tensor.data.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxTensor& tensor) {
  const std::vector<std::uint8_t> bytes = encode_idx(tensor);
  if (is_gzip_path(path)) {
    GzFile f(gzopen(path.c_str(), "wb"), &gzclose);
    if (!f) throw FormatError("cannot create " + path.string());
    if (gzwrite(f.get(), bytes.data(), static_cast<unsigned>(bytes.size())) !=
        static_cast<int>(bytes.size())) {
      throw FormatError("short write to " + path.string());
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

}  // namespace lsgd

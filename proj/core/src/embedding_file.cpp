#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "binary_io.hpp"
#include "unicat/errors.hpp"
#include "unicat/io.hpp"

namespace unicat {

using detail::ByteReader;
using detail::ByteWriter;

namespace {
constexpr std::string_view kMagic = "UCEB";
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4 + 4;  // magic, version, N, D, name length
}  // namespace

std::string encode_embedding_file(const EmbeddingFile& file) {
  const std::size_t n = file.features.rows();
  const std::size_t d = file.features.cols();
  if (file.ids.size() != n || file.view_ids.size() != n) {
    throw ShapeError("embedding file: ids/view_ids not aligned with feature rows");
  }
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kEmbeddingFileVersion);
  w.u64(n);
  w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(file.modality.size()));
  w.bytes(file.modality);
  for (std::size_t r = 0; r < n; ++r) {
    w.u64(file.ids[r]);
    w.u32(file.view_ids[r]);
    for (double v : file.features.row(r)) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw NumericError(fmt::format("embedding file: row {} not representable as float32", r));
      }
      w.f32(f);
    }
  }
  return w.take();
}

EmbeddingFile decode_embedding_file(std::string_view bytes) {
  ByteReader r(bytes, "embedding file");
  if (bytes.size() < 4 || r.bytes(4) != kMagic) {
    throw FormatError("embedding file: bad magic (expected UCEB)");
  }
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingFileVersion) {
    throw FormatError(fmt::format("embedding file: unsupported version {}", version));
  }
  const std::uint64_t n = r.u64();
  const std::uint32_t d = r.u32();
  const std::uint32_t name_len = r.u32();
  EmbeddingFile file;
  file.modality = std::string(r.bytes(name_len));
  const std::uint64_t record = 8 + 4 + 4ull * d;
  const std::uint64_t expected = kHeaderBytes + name_len;
  if (n > (std::numeric_limits<std::uint64_t>::max() - expected) / record ||
      expected + n * record != bytes.size()) {
    throw FormatError(fmt::format(
        "embedding file: N = {}, D = {} implies {} bytes of records but {} remain", n, d,
        n * record, bytes.size() - expected));
  }
  file.features = Matrix(n, d);
  file.ids.resize(n);
  file.view_ids.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    file.ids[i] = r.u64();
    file.view_ids[i] = r.u32();
    for (double& v : file.features.row(i)) v = r.f32();
  }
  require_finite(file.features, "embedding file");
  return file;
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingFile& file) {
  write_file(path, encode_embedding_file(file));
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  try {
    return decode_embedding_file(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

EmbeddingSet to_embedding_set(const EmbeddingFile& file, Split tag) {
  EmbeddingSet s;
  s.features = file.features;
  s.ids = file.ids;
  s.view_ids = file.view_ids;
  s.tag = tag;
  return s;
}

}  // namespace unicat

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "binary_io.hpp"
#include "unicat/errors.hpp"
#include "unicat/io.hpp"

namespace unicat {

using detail::ByteReader;
using detail::ByteWriter;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}' for reading", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

namespace {

constexpr std::string_view kMagic = "UCCK";

std::uint32_t strategy_code(Strategy s) {
  switch (s) {
    case Strategy::FusionAvg: return 0;
    case Strategy::FusionConcat: return 1;
    case Strategy::UniCat: return 2;
  }
  return 0;
}

void write_head(ByteWriter& w, const Head& h) {
  const auto dim = static_cast<std::uint32_t>(h.neck.dim());
  w.u32(dim);
  w.u32(static_cast<std::uint32_t>(h.num_classes()));
  w.f64(h.neck.eps);
  w.f64(h.neck.momentum);
  for (double v : h.neck.gamma) w.f64(v);
  for (double v : h.neck.running_mean) w.f64(v);
  for (double v : h.neck.running_var) w.f64(v);
  for (double v : h.classifier.data()) w.f64(v);
}

std::vector<double> read_doubles(ByteReader& r, std::size_t n) {
  if (r.remaining() / 8 < n) throw FormatError("checkpoint: array length exceeds file size");
  std::vector<double> v(n);
  for (double& x : v) x = r.f64();
  return v;
}

Head read_head(ByteReader& r) {
  Head h;
  const std::size_t dim = r.u32();
  const std::size_t classes = r.u32();
  h.neck.eps = r.f64();
  h.neck.momentum = r.f64();
  h.neck.gamma = read_doubles(r, dim);
  h.neck.running_mean = read_doubles(r, dim);
  h.neck.running_var = read_doubles(r, dim);
  for (double v : h.neck.running_var) {
    if (!(v > 0.0)) throw FormatError("checkpoint: running variance must be > 0");
  }
  h.classifier = Matrix(classes, dim, read_doubles(r, classes * dim));
  return h;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& model, std::span<const Label> class_ids) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(strategy_code(model.strategy));
  w.u32(static_cast<std::uint32_t>(model.streams.size()));
  w.u32(model.fused ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(class_ids.size()));
  for (Label id : class_ids) w.u64(id);
  for (const auto& s : model.streams) {
    w.u32(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name);
    w.u32(static_cast<std::uint32_t>(s.layers.size()));
    for (const auto& l : s.layers) {
      w.u32(static_cast<std::uint32_t>(l.weight.rows()));
      w.u32(static_cast<std::uint32_t>(l.weight.cols()));
      for (double v : l.weight.data()) w.f64(v);
      for (double v : l.bias) w.f64(v);
    }
    write_head(w, s.head);
  }
  if (model.fused) write_head(w, *model.fused);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.bytes(4) != kMagic) throw FormatError("checkpoint: bad magic (expected UCCK)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(fmt::format("checkpoint: unsupported version {}", version));
  }
  Checkpoint ck;
  const std::uint32_t code = r.u32();
  if (code > 2) throw FormatError(fmt::format("checkpoint: unknown strategy code {}", code));
  ck.model.strategy = code == 0 ? Strategy::FusionAvg
                      : code == 1 ? Strategy::FusionConcat
                                  : Strategy::UniCat;
  const std::uint32_t num_streams = r.u32();
  const std::uint32_t has_fused = r.u32();
  if (has_fused != (has_fused_head(ck.model.strategy) ? 1u : 0u)) {
    throw FormatError("checkpoint: fused-head flag inconsistent with strategy");
  }
  const std::uint32_t num_ids = r.u32();
  if (r.remaining() / 8 < num_ids) throw FormatError("checkpoint: class id table truncated");
  for (std::uint32_t i = 0; i < num_ids; ++i) ck.class_ids.push_back(r.u64());
  for (std::uint32_t s = 0; s < num_streams; ++s) {
    StreamParams p;
    p.name = std::string(r.bytes(r.u32()));
    const std::uint32_t layers = r.u32();
    if (layers == 0) throw FormatError("checkpoint: stream without layers");
    for (std::uint32_t l = 0; l < layers; ++l) {
      const std::size_t out = r.u32();
      const std::size_t in = r.u32();
      Linear lin;
      lin.weight = Matrix(out, in, read_doubles(r, out * in));
      lin.bias = read_doubles(r, out);
      if (!p.layers.empty() && p.layers.back().weight.rows() != in) {
        throw FormatError("checkpoint: layer widths do not chain");
      }
      p.layers.push_back(std::move(lin));
    }
    p.head = read_head(r);
    if (p.head.neck.dim() != p.embed_dim()) throw FormatError("checkpoint: neck width mismatch");
    ck.model.streams.push_back(std::move(p));
  }
  if (has_fused) {
    ck.model.fused = read_head(r);
    if (ck.model.fused->neck.dim() != ck.model.fused_dim()) {
      throw FormatError("checkpoint: fused neck width mismatch");
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(fmt::format("checkpoint: {} trailing bytes", r.remaining()));
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& model,
                      std::span<const Label> class_ids) {
  write_file(path, encode_checkpoint(model, class_ids));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace unicat

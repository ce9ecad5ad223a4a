#include "unicat/fusion.hpp"

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

std::string_view to_string(FusionOperator op) noexcept {
  return op == FusionOperator::Average ? "average" : "concat";
}

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::FusionAvg: return "fusion-avg";
    case Strategy::FusionConcat: return "fusion-concat";
    case Strategy::UniCat: return "unicat";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "fusion-avg") return Strategy::FusionAvg;
  if (name == "fusion-concat") return Strategy::FusionConcat;
  if (name == "unicat") return Strategy::UniCat;
  throw ConfigError(fmt::format("unknown strategy '{}' (expected fusion-avg, fusion-concat, unicat)",
                                name));
}

FusionOperator parse_fusion_operator(std::string_view name) {
  if (name == "average" || name == "avg") return FusionOperator::Average;
  if (name == "concat") return FusionOperator::Concat;
  throw ConfigError(fmt::format("unknown fusion operator '{}' (expected average, concat)", name));
}

FusionOperator fusion_operator(Strategy s) noexcept {
  return s == Strategy::FusionAvg ? FusionOperator::Average : FusionOperator::Concat;
}

bool has_fused_head(Strategy s) noexcept { return s != Strategy::UniCat; }

bool default_normalize_before_fusion(Strategy s) noexcept { return s == Strategy::UniCat; }

Matrix fuse(std::span<const Matrix> streams, FusionOperator op, bool normalize_first) {
  if (streams.empty()) throw ShapeError("fuse: no streams");
  std::vector<Matrix> normalized;
  if (normalize_first) {
    for (const auto& s : streams) normalized.push_back(l2_normalize_rows(s));
    streams = normalized;
  }
  const std::size_t rows = streams.front().rows();
  for (const auto& s : streams) {
    if (s.rows() != rows) throw ShapeError("fuse: streams have different row counts");
  }
  if (op == FusionOperator::Concat) return hconcat(streams);

  const std::size_t dim = streams.front().cols();
  for (const auto& s : streams) {
    if (s.cols() != dim) {
      throw ShapeError(fmt::format("fuse: average needs equal widths, got {} and {}", dim,
                                   s.cols()));
    }
  }
  Matrix out(rows, dim);
  const double inv = 1.0 / static_cast<double>(streams.size());
  for (const auto& s : streams) {
    auto src = s.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  for (double& v : out.data()) v *= inv;
  return out;
}

std::vector<Matrix> fuse_backward(const Matrix& grad_fused, FusionOperator op,
                                  std::span<const std::size_t> stream_dims) {
  std::vector<Matrix> out;
  out.reserve(stream_dims.size());
  if (op == FusionOperator::Concat) {
    std::size_t offset = 0;
    for (std::size_t d : stream_dims) {
      out.push_back(column_block(grad_fused, offset, d));
      offset += d;
    }
    if (offset != grad_fused.cols()) throw ShapeError("fuse_backward: block widths do not sum");
    return out;
  }
  const double inv = 1.0 / static_cast<double>(stream_dims.size());
  for (std::size_t d : stream_dims) {
    if (d != grad_fused.cols()) throw ShapeError("fuse_backward: average width mismatch");
    Matrix g = grad_fused;
    for (double& v : g.data()) v *= inv;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace unicat

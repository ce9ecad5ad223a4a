#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "unicat/numerics.hpp"

namespace unicat {

enum class FusionOperator { Average, Concat };

enum class Strategy { FusionAvg, FusionConcat, UniCat };

std::string_view to_string(FusionOperator op) noexcept;
std::string_view to_string(Strategy s) noexcept;
// Accepts "fusion-avg", "fusion-concat", "unicat" (case-sensitive).
Strategy parse_strategy(std::string_view name);
FusionOperator parse_fusion_operator(std::string_view name);

// Operator used to build the multimodal embedding. UniCat concatenates its
// independently trained streams at inference.
FusionOperator fusion_operator(Strategy s) noexcept;
bool has_fused_head(Strategy s) noexcept;
// Inference-time default for per-stream l2 normalisation before fusion.
bool default_normalize_before_fusion(Strategy s) noexcept;

// Concat: row-wise concatenation in stream order. Average: element-wise mean
// (requires equal widths). With normalize_first each stream's rows are scaled
// to unit l2 norm before the operator is applied.
Matrix fuse(std::span<const Matrix> streams, FusionOperator op, bool normalize_first = false);

// Gradient of fuse(op, normalize_first = false) with respect to each stream,
// given the gradient at the fused representation.
std::vector<Matrix> fuse_backward(const Matrix& grad_fused, FusionOperator op,
                                  std::span<const std::size_t> stream_dims);

}  // namespace unicat

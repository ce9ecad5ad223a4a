#pragma once

#include <cstdint>
#include <vector>

#include "unicat/numerics.hpp"
#include "unicat/synthdata.hpp"

namespace unicat {

// One embedding per row, with the identity and view labels of its sample.
struct EmbeddingSet {
  Matrix features;
  std::vector<Label> ids;
  std::vector<std::uint32_t> view_ids;
  Split tag = Split::Gallery;
};

// Row-count alignment and no zero-norm rows; throws DataError / EvaluationError.
void validate(const EmbeddingSet& set);

}  // namespace unicat

#pragma once

#include <cstdint>

#include "unicat/metrics.hpp"
#include "unicat/model.hpp"
#include "unicat/synthdata.hpp"

namespace unicat {

struct EvalOptions {
  CmcOptions cmc;
  InferenceOptions inference;
};

// Query/gallery retrieval with the strategy's multimodal embedding.
RetrievalReport eval_multimodal(const ModelParams& model, const MultimodalDataset& ds,
                                const EvalOptions& options = {});

// Query/gallery retrieval with one stream's post-BN feature.
RetrievalReport eval_unimodal(const ModelParams& model, const MultimodalDataset& ds,
                              std::size_t stream_index, const EvalOptions& options = {});

// Train samples re-split into query/gallery per identity (same protocol as
// the test split, RNG derived from `seed`), evaluated with one stream.
RetrievalReport eval_trainset(const ModelParams& model, const MultimodalDataset& ds,
                              std::size_t stream_index, std::size_t views_as_query,
                              std::uint64_t seed, const EvalOptions& options = {});

}  // namespace unicat

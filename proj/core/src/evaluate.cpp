#include "unicat/evaluate.hpp"

namespace unicat {

namespace {

RetrievalReport run(const ModelParams& model, const MultimodalDataset& ds, EmbedTarget target,
                    const EvalOptions& options) {
  const EmbeddingSet q = embed_dataset(model, ds, Split::Query, target, options.inference);
  const EmbeddingSet g = embed_dataset(model, ds, Split::Gallery, target, options.inference);
  return evaluate_retrieval(q, g, options.cmc);
}

}  // namespace

RetrievalReport eval_multimodal(const ModelParams& model, const MultimodalDataset& ds,
                                const EvalOptions& options) {
  return run(model, ds, EmbedTarget::multimodal(), options);
}

RetrievalReport eval_unimodal(const ModelParams& model, const MultimodalDataset& ds,
                              std::size_t stream_index, const EvalOptions& options) {
  return run(model, ds, EmbedTarget::stream(stream_index), options);
}

RetrievalReport eval_trainset(const ModelParams& model, const MultimodalDataset& ds,
                              std::size_t stream_index, std::size_t views_as_query,
                              std::uint64_t seed, const EvalOptions& options) {
  Rng rng = split(seed, "eval/trainset-split");
  const MultimodalDataset train_view = trainset_as_retrieval(ds, views_as_query, rng);
  return eval_unimodal(model, train_view, stream_index, options);
}

}  // namespace unicat

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unicat/embedding.hpp"
#include "unicat/numerics.hpp"

namespace unicat {

// D[i][j] = 1 - <q_i, g_j> / (|q_i| |g_j|), clamped to [0, 2]. Throws
// EvaluationError on a zero-norm row.
Matrix cosine_distance(const Matrix& query, const Matrix& gallery);
Matrix cosine_distance(const EmbeddingSet& query, const EmbeddingSet& gallery);

struct CmcOptions {
  // Drop gallery entries sharing both id and view with the query.
  bool exclude_same_view = false;
  std::size_t max_rank = 50;
};

struct RetrievalReport {
  double mAP = 0.0;
  std::vector<double> cmc;  // cmc[k-1] = fraction of scored queries matched within rank k
  double rank1 = 0.0;
  // AP of each scored query, aligned with scored_queries (query row indices).
  std::vector<double> per_query_ap;
  std::vector<std::size_t> scored_queries;
  std::size_t num_queries = 0;
  std::size_t num_skipped_queries = 0;
};

// Ranks each query's gallery by ascending distance (ties to the lower gallery
// index). AP = (1/R) Σ_{match ranks k} (#matches ≤ k)/k. Queries with no
// relevant gallery entry are skipped and counted; throws EvaluationError if
// every query is skipped.
RetrievalReport cmc_map(const Matrix& distances, std::span<const Label> query_ids,
                        std::span<const Label> gallery_ids,
                        std::span<const std::uint32_t> query_views,
                        std::span<const std::uint32_t> gallery_views, const CmcOptions& options);

// cosine_distance + cmc_map.
RetrievalReport evaluate_retrieval(const EmbeddingSet& query, const EmbeddingSet& gallery,
                                   const CmcOptions& options = {});

}  // namespace unicat

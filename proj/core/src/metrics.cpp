#include "unicat/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

Matrix cosine_distance(const Matrix& query, const Matrix& gallery) {
  if (query.cols() != gallery.cols()) {
    throw ShapeError(fmt::format("cosine_distance: query dim {} vs gallery dim {}", query.cols(),
                                 gallery.cols()));
  }
  auto norms = [](const Matrix& m, const char* which) {
    std::vector<double> n(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      n[r] = l2_norm(m.row(r));
      if (n[r] == 0.0) {
        throw EvaluationError(fmt::format("cosine_distance: {} row {} has zero norm", which, r));
      }
    }
    return n;
  };
  const auto qn = norms(query, "query");
  const auto gn = norms(gallery, "gallery");
  Matrix d(query.rows(), gallery.rows());
  for (std::size_t i = 0; i < query.rows(); ++i) {
    const auto qi = query.row(i);
    for (std::size_t j = 0; j < gallery.rows(); ++j) {
      const double v = 1.0 - dot(qi, gallery.row(j)) / (qn[i] * gn[j]);
      d(i, j) = std::clamp(v, 0.0, 2.0);
    }
  }
  return d;
}

Matrix cosine_distance(const EmbeddingSet& query, const EmbeddingSet& gallery) {
  return cosine_distance(query.features, gallery.features);
}

RetrievalReport cmc_map(const Matrix& distances, std::span<const Label> query_ids,
                        std::span<const Label> gallery_ids,
                        std::span<const std::uint32_t> query_views,
                        std::span<const std::uint32_t> gallery_views, const CmcOptions& options) {
  const std::size_t nq = distances.rows();
  const std::size_t ng = distances.cols();
  if (query_ids.size() != nq || query_views.size() != nq || gallery_ids.size() != ng ||
      gallery_views.size() != ng) {
    throw ShapeError("cmc_map: label arrays do not match the distance matrix");
  }
  if (options.max_rank == 0) throw ConfigError("cmc_map: max_rank must be >= 1");

  RetrievalReport rep;
  rep.num_queries = nq;
  std::vector<std::size_t> first_match_counts(options.max_rank, 0);
  std::vector<std::size_t> order(ng);
  double ap_sum = 0.0;

  for (std::size_t q = 0; q < nq; ++q) {
    const auto row = distances.row(q);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return row[a] < row[b] || (row[a] == row[b] && a < b);
    });
    std::size_t rank = 0;
    std::size_t hits = 0;
    std::size_t first = 0;
    double precision_sum = 0.0;
    for (std::size_t g : order) {
      const bool same_id = gallery_ids[g] == query_ids[q];
      if (options.exclude_same_view && same_id && gallery_views[g] == query_views[q]) continue;
      ++rank;
      if (!same_id) continue;
      ++hits;
      if (first == 0) first = rank;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
    if (hits == 0) {
      ++rep.num_skipped_queries;
      continue;
    }
    const double ap = precision_sum / static_cast<double>(hits);
    rep.per_query_ap.push_back(ap);
    rep.scored_queries.push_back(q);
    ap_sum += ap;
    if (first <= options.max_rank) ++first_match_counts[first - 1];
  }

  const std::size_t scored = rep.scored_queries.size();
  if (scored == 0) throw EvaluationError("cmc_map: no query has a relevant gallery entry");
  rep.mAP = ap_sum / static_cast<double>(scored);
  rep.cmc.resize(options.max_rank);
  std::size_t cumulative = 0;
  for (std::size_t k = 0; k < options.max_rank; ++k) {
    cumulative += first_match_counts[k];
    rep.cmc[k] = static_cast<double>(cumulative) / static_cast<double>(scored);
  }
  rep.rank1 = rep.cmc[0];
  return rep;
}

RetrievalReport evaluate_retrieval(const EmbeddingSet& query, const EmbeddingSet& gallery,
                                   const CmcOptions& options) {
  const Matrix d = cosine_distance(query, gallery);
  return cmc_map(d, query.ids, gallery.ids, query.view_ids, gallery.view_ids, options);
}

}  // namespace unicat

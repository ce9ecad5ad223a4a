#pragma once

// Literal, slow reference implementations used as test oracles. None of
// them calls into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows matmul(const Rows& a, const Rows& b) {
  const std::size_t n = a.size();
  const std::size_t k = b.size();
  const std::size_t m = k == 0 ? 0 : b[0].size();
  Rows c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b[t][j];
      c[i][j] = s;
    }
  return c;
}

inline double euclidean(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

inline double cosine_distance(const std::vector<double>& x, const std::vector<double>& y) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xy += x[k] * y[k];
    xx += x[k] * x[k];
    yy += y[k] * y[k];
  }
  return 1.0 - xy / (std::sqrt(xx) * std::sqrt(yy));
}

struct TripletOracle {
  double loss = 0.0;
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

// Enumerates every (p, n) pair per anchor and keeps the one with the largest
// d(a,p) - d(a,n); ties resolve to the lowest p, then the lowest n.
inline TripletOracle batch_hard(const Rows& z, const std::vector<std::size_t>& y, double alpha) {
  const std::size_t n = z.size();
  TripletOracle out;
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bp = n, bn = n;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || y[p] != y[a]) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (y[q] == y[a]) continue;
        const double v = euclidean(z[a], z[p]) - euclidean(z[a], z[q]);
        if (v > best) {
          best = v;
          bp = p;
          bn = q;
        }
      }
    }
    out.positive.push_back(bp);
    out.negative.push_back(bn);
    total += std::log1p(std::exp(best + alpha));
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

inline double cross_entropy(const Rows& logits, const std::vector<std::size_t>& y) {
  double total = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const double mx = *std::max_element(logits[r].begin(), logits[r].end());
    double s = 0.0;
    for (double v : logits[r]) s += std::exp(v - mx);
    total += -(logits[r][y[r]] - mx - std::log(s));
  }
  return total / static_cast<double>(logits.size());
}

struct RetrievalOracle {
  double mAP = 0.0;
  std::vector<double> cmc;
  std::vector<double> ap;
  std::size_t skipped = 0;
};

// Per query: stable-sort gallery indices by distance, then apply the AP and
// CMC definitions verbatim.
inline RetrievalOracle retrieval(const Rows& dist, const std::vector<std::uint64_t>& qid,
                                 const std::vector<std::uint64_t>& gid,
                                 const std::vector<std::uint32_t>& qview,
                                 const std::vector<std::uint32_t>& gview, bool exclude_same_view,
                                 std::size_t max_rank) {
  RetrievalOracle out;
  out.cmc.assign(max_rank, 0.0);
  std::size_t scored = 0;
  for (std::size_t q = 0; q < dist.size(); ++q) {
    std::vector<std::size_t> order;
    for (std::size_t g = 0; g < gid.size(); ++g) {
      if (exclude_same_view && gid[g] == qid[q] && gview[g] == qview[q]) continue;
      order.push_back(g);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return dist[q][i] < dist[q][j]; });
    std::vector<int> rel;
    for (std::size_t g : order) rel.push_back(gid[g] == qid[q] ? 1 : 0);
    const int total_rel = std::accumulate(rel.begin(), rel.end(), 0);
    if (total_rel == 0) {
      ++out.skipped;
      continue;
    }
    ++scored;
    double ap = 0.0;
    int hits = 0;
    std::size_t first = rel.size();
    for (std::size_t k = 0; k < rel.size(); ++k) {
      if (rel[k] == 1) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        if (first == rel.size()) first = k;
      }
    }
    ap /= total_rel;
    out.ap.push_back(ap);
    out.mAP += ap;
    for (std::size_t k = first; k < max_rank; ++k) out.cmc[k] += 1.0;
  }
  if (scored > 0) {
    out.mAP /= static_cast<double>(scored);
    for (double& c : out.cmc) c /= static_cast<double>(scored);
  }
  return out;
}

// Reference xoshiro256** and splitmix64, transcribed from the published
// algorithms.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Xoshiro256ss {
  std::uint64_t s[4];
  explicit Xoshiro256ss(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& v : s) v = splitmix64(x);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

}  // namespace oracle

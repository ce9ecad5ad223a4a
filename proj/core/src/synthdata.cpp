#include "unicat/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Query: return "query";
    case Split::Gallery: return "gallery";
  }
  return "?";
}

std::vector<std::size_t> MultimodalDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

void validate(const SynthConfig& cfg) {
  if (cfg.modalities.empty()) throw ConfigError("synth: at least one modality required");
  if (cfg.latent_dim == 0) throw ConfigError("synth: latent_dim must be >= 1");
  if (cfg.ids_train < 2) throw ConfigError("synth: ids_train must be >= 2");
  if (cfg.ids_test < 2) throw ConfigError("synth: ids_test must be >= 2");
  if (cfg.views_per_id < 2) throw ConfigError("synth: views_per_id must be >= 2");
  if (cfg.query_views == 0 || cfg.query_views >= cfg.views_per_id) {
    throw ConfigError("synth: query_views must be in [1, views_per_id)");
  }
  if (!std::isfinite(cfg.view_jitter) || cfg.view_jitter < 0.0) {
    throw ConfigError("synth: view_jitter must be finite and >= 0");
  }
  std::set<std::string> names;
  for (const auto& m : cfg.modalities) {
    if (m.name.empty()) throw ConfigError("synth: modality name must be non-empty");
    if (!names.insert(m.name).second) {
      throw ConfigError(fmt::format("synth: duplicate modality name '{}'", m.name));
    }
    if (m.obs_dim < cfg.latent_dim) {
      throw ConfigError(fmt::format("synth: modality '{}' obs_dim {} < latent_dim {}", m.name,
                                    m.obs_dim, cfg.latent_dim));
    }
    if (!std::isfinite(m.signal_scale) || !std::isfinite(m.noise_sigma) ||
        !std::isfinite(m.spurious_strength)) {
      throw ConfigError(fmt::format("synth: modality '{}' has a non-finite scale", m.name));
    }
    if (m.noise_sigma < 0.0 || m.spurious_strength < 0.0) {
      throw ConfigError(fmt::format("synth: modality '{}' has a negative noise/spurious scale",
                                    m.name));
    }
  }
}

SynthConfig clean_preset(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  // 200 train ids keep per-stream training from saturating within 200 epochs.
  cfg.ids_train = 200;
  for (const char* name : {"rgb", "nir", "tir"}) {
    ModalitySpec m;
    m.name = name;
    cfg.modalities.push_back(m);
  }
  return cfg;
}

SynthConfig weak_link_preset(std::uint64_t seed) {
  SynthConfig cfg = clean_preset(seed);
  auto& weak = cfg.modalities[1];
  // Per-coordinate SNR of one on the identity signal, plus 32 weak spurious
  // coordinates: individually faint, jointly enough to memorise train ids.
  weak.signal_scale = 3.0;
  weak.noise_sigma = 3.0;
  weak.spurious_dim = 32;
  weak.spurious_strength = 0.3;
  return cfg;
}

namespace {

// obs_dim x latent_dim with orthonormal columns (modified Gram-Schmidt on a
// Gaussian draw).
Matrix orthonormal_map(Rng& rng, std::size_t obs_dim, std::size_t latent_dim) {
  Matrix a = rng_normal(rng, obs_dim, latent_dim);
  for (std::size_t j = 0; j < latent_dim; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t r = 0; r < obs_dim; ++r) proj += a(r, j) * a(r, k);
      for (std::size_t r = 0; r < obs_dim; ++r) a(r, j) -= proj * a(r, k);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < obs_dim; ++r) norm += a(r, j) * a(r, j);
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw NumericError("synth: degenerate random map");
    for (std::size_t r = 0; r < obs_dim; ++r) a(r, j) /= norm;
  }
  return a;
}

}  // namespace

MultimodalDataset generate(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t num_ids = cfg.ids_train + cfg.ids_test;
  const std::size_t n = num_ids * cfg.views_per_id;
  const std::size_t latent = cfg.latent_dim;

  MultimodalDataset ds;
  ds.ids.reserve(n);
  ds.view_ids.reserve(n);
  ds.split.reserve(n);
  for (std::size_t id = 0; id < num_ids; ++id) {
    for (std::size_t v = 0; v < cfg.views_per_id; ++v) {
      ds.ids.push_back(id);
      ds.view_ids.push_back(static_cast<std::uint32_t>(v));
      ds.split.push_back(id < cfg.ids_train ? Split::Train : Split::Gallery);
    }
  }

  Rng latent_rng = split(cfg.seed, "synth/latent");
  Rng jitter_rng = split(cfg.seed, "synth/jitter");
  const Matrix identity_latent = rng_normal(latent_rng, num_ids, latent);
  // Per-capture latent: identity code plus view jitter, shared by modalities.
  Matrix capture_latent(n, latent);
  for (std::size_t r = 0; r < n; ++r) {
    const auto u = identity_latent.row(ds.ids[r]);
    auto dst = capture_latent.row(r);
    for (std::size_t k = 0; k < latent; ++k) dst[k] = u[k] + cfg.view_jitter * jitter_rng.normal();
  }

  for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
    const ModalitySpec& spec = cfg.modalities[m];
    Rng map_rng = split(cfg.seed, fmt::format("synth/map/{}", m));
    Rng noise_rng = split(cfg.seed, fmt::format("synth/noise/{}", m));
    Rng spurious_rng = split(cfg.seed, fmt::format("synth/spurious/{}", m));

    const Matrix map = orthonormal_map(map_rng, spec.obs_dim, latent);
    Matrix x = matmul_bt(capture_latent, map);  // rows: A (u + delta)
    for (double& v : x.data()) v = spec.signal_scale * v + spec.noise_sigma * noise_rng.normal();

    if (spec.spurious_dim > 0) {
      const std::size_t sd = spec.spurious_dim;
      const Matrix codes = rng_normal(spurious_rng, cfg.ids_train, sd);
      // Test captures get fresh draws with the train marginal variance.
      const double test_scale = std::sqrt(1.0 + cfg.view_jitter * cfg.view_jitter);
      Matrix spurious(n, sd);
      for (std::size_t r = 0; r < n; ++r) {
        auto dst = spurious.row(r);
        const bool train = ds.ids[r] < cfg.ids_train;
        for (std::size_t k = 0; k < sd; ++k) {
          const double s = train ? codes(ds.ids[r], k) + cfg.view_jitter * spurious_rng.normal()
                                 : test_scale * spurious_rng.normal();
          dst[k] = spec.spurious_strength * s;
        }
      }
      const Matrix blocks[] = {std::move(x), std::move(spurious)};
      x = hconcat(blocks);
    }
    ds.modality_names.push_back(spec.name);
    ds.features.push_back(std::move(x));
  }
  return ds;
}

void validate(const MultimodalDataset& ds) {
  const std::size_t n = ds.ids.size();
  if (ds.view_ids.size() != n || ds.split.size() != n) {
    throw DataError("dataset: label arrays have different lengths");
  }
  if (ds.features.empty()) throw DataError("dataset: no modalities");
  if (ds.modality_names.size() != ds.features.size()) {
    throw DataError("dataset: modality name count does not match feature matrices");
  }
  for (std::size_t m = 0; m < ds.features.size(); ++m) {
    if (ds.features[m].rows() != n) {
      throw DataError(fmt::format("dataset: modality '{}' has {} rows, expected {}",
                                  ds.modality_names[m], ds.features[m].rows(), n));
    }
  }
  std::set<Label> train_ids, query_ids, gallery_ids;
  for (std::size_t i = 0; i < n; ++i) {
    switch (ds.split[i]) {
      case Split::Train: train_ids.insert(ds.ids[i]); break;
      case Split::Query: query_ids.insert(ds.ids[i]); break;
      case Split::Gallery: gallery_ids.insert(ds.ids[i]); break;
    }
  }
  for (Label id : train_ids) {
    if (query_ids.count(id) || gallery_ids.count(id)) {
      throw DataError(fmt::format("dataset: id {} appears in both train and test splits", id));
    }
  }
  for (Label id : query_ids) {
    if (!gallery_ids.count(id)) {
      throw DataError(fmt::format("dataset: query id {} has no gallery sample", id));
    }
  }
}

namespace {

// Groups the rows of `rows` by identity (ascending id, rows in order) and
// tags `views_as_query` of each group as queries.
void tag_query_gallery(MultimodalDataset& ds, const std::vector<std::size_t>& rows,
                       std::size_t views_as_query, Rng& rng) {
  std::map<Label, std::vector<std::size_t>> by_id;
  for (std::size_t r : rows) by_id[ds.ids[r]].push_back(r);
  for (auto& [id, members] : by_id) {
    if (members.size() <= views_as_query) {
      throw BatchError(fmt::format("split: id {} has {} views, need more than {}", id,
                                   members.size(), views_as_query));
    }
    // Partial Fisher-Yates: the first views_as_query positions are queries.
    for (std::size_t k = 0; k < views_as_query; ++k) {
      const std::size_t j = k + rng.uniform_index(members.size() - k);
      std::swap(members[k], members[j]);
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      ds.split[members[k]] = k < views_as_query ? Split::Query : Split::Gallery;
    }
  }
}

}  // namespace

MultimodalDataset split_query_gallery(const MultimodalDataset& ds, std::size_t views_as_query,
                                      Rng& rng) {
  if (views_as_query == 0) throw BatchError("split: views_as_query must be >= 1");
  MultimodalDataset out = ds;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < ds.num_samples(); ++i)
    if (ds.split[i] != Split::Train) test_rows.push_back(i);
  tag_query_gallery(out, test_rows, views_as_query, rng);
  return out;
}

MultimodalDataset make_dataset(const SynthConfig& cfg) {
  Rng rng = split(cfg.seed, "synth/query-gallery");
  return split_query_gallery(generate(cfg), cfg.query_views, rng);
}

MultimodalDataset replicate_modality(const MultimodalDataset& ds, std::size_t modality_index,
                                     std::size_t copies) {
  if (modality_index >= ds.num_modalities()) {
    throw IndexError(fmt::format("replicate_modality: index {} but dataset has {} modalities",
                                 modality_index, ds.num_modalities()));
  }
  if (copies < 2) throw ConfigError("replicate_modality: copies must be >= 2");
  MultimodalDataset out;
  out.ids = ds.ids;
  out.view_ids = ds.view_ids;
  out.split = ds.split;
  for (std::size_t k = 0; k < copies; ++k) {
    out.modality_names.push_back(fmt::format("{}#{}", ds.modality_names[modality_index], k));
    out.features.push_back(ds.features[modality_index]);
  }
  return out;
}

MultimodalDataset select_modalities(const MultimodalDataset& ds,
                                    std::span<const std::size_t> modality_indices) {
  MultimodalDataset out;
  out.ids = ds.ids;
  out.view_ids = ds.view_ids;
  out.split = ds.split;
  for (std::size_t m : modality_indices) {
    if (m >= ds.num_modalities()) {
      throw IndexError(fmt::format("select_modalities: index {} out of {}", m,
                                   ds.num_modalities()));
    }
    out.modality_names.push_back(ds.modality_names[m]);
    out.features.push_back(ds.features[m]);
  }
  return out;
}

MultimodalDataset select_samples(const MultimodalDataset& ds, std::span<const std::size_t> rows) {
  MultimodalDataset out;
  out.modality_names = ds.modality_names;
  for (const auto& f : ds.features) out.features.push_back(select_rows(f, rows));
  for (std::size_t r : rows) {
    out.ids.push_back(ds.ids[r]);
    out.view_ids.push_back(ds.view_ids[r]);
    out.split.push_back(ds.split[r]);
  }
  return out;
}

MultimodalDataset carve_validation(const MultimodalDataset& ds, double fraction,
                                   std::size_t views_as_query, Rng& rng) {
  std::vector<Label> train_ids;
  for (std::size_t r : ds.indices(Split::Train)) train_ids.push_back(ds.ids[r]);
  std::sort(train_ids.begin(), train_ids.end());
  train_ids.erase(std::unique(train_ids.begin(), train_ids.end()), train_ids.end());
  const auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train_ids.size())));
  if (held < 2 || train_ids.size() - held < 2) {
    throw ConfigError(fmt::format("carve_validation: cannot hold out {} of {} train ids", held,
                                  train_ids.size()));
  }
  for (std::size_t k = 0; k < held; ++k) {
    const std::size_t j = k + rng.uniform_index(train_ids.size() - k);
    std::swap(train_ids[k], train_ids[j]);
  }
  const std::set<Label> held_ids(train_ids.begin(), train_ids.begin() + static_cast<std::ptrdiff_t>(held));

  std::vector<std::size_t> keep = ds.indices(Split::Train);
  MultimodalDataset out = select_samples(ds, keep);
  std::vector<std::size_t> local_held;
  for (std::size_t i = 0; i < out.num_samples(); ++i)
    if (held_ids.count(out.ids[i])) local_held.push_back(i);
  tag_query_gallery(out, local_held, views_as_query, rng);
  return out;
}

MultimodalDataset trainset_as_retrieval(const MultimodalDataset& ds, std::size_t views_as_query,
                                        Rng& rng) {
  MultimodalDataset out = select_samples(ds, ds.indices(Split::Train));
  std::vector<std::size_t> all(out.num_samples());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  tag_query_gallery(out, all, views_as_query, rng);
  return out;
}

}  // namespace unicat

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unicat/numerics.hpp"
#include "unicat/rng.hpp"

namespace unicat {

using Label = std::uint64_t;

enum class Split : std::uint8_t { Train, Query, Gallery };

const char* to_string(Split s) noexcept;

struct ModalitySpec {
  std::string name;
  std::size_t obs_dim = 32;
  double signal_scale = 1.0;
  double noise_sigma = 0.5;
  std::size_t spurious_dim = 0;
  double spurious_strength = 0.0;
};

struct SynthConfig {
  std::vector<ModalitySpec> modalities;
  std::size_t latent_dim = 16;
  std::size_t ids_train = 100;
  std::size_t ids_test = 100;
  std::size_t views_per_id = 8;
  double view_jitter = 0.6;
  // Views per test identity tagged as queries by make_dataset().
  std::size_t query_views = 2;
  std::uint64_t seed = 1;
};

// Throws ConfigError describing the first violated invariant.
void validate(const SynthConfig& cfg);

// Three equally informative, moderately noisy streams.
SynthConfig clean_preset(std::uint64_t seed = 1);
// Two clean streams plus one weak stream: high noise and identity-coded
// spurious coordinates that carry no identity information on test ids.
SynthConfig weak_link_preset(std::uint64_t seed = 1);

// Coincidental samples: row r of every features[i] describes the same
// (id, view) capture.
struct MultimodalDataset {
  std::vector<std::string> modality_names;
  std::vector<Matrix> features;
  std::vector<Label> ids;
  std::vector<std::uint32_t> view_ids;
  std::vector<Split> split;

  std::size_t num_samples() const noexcept { return ids.size(); }
  std::size_t num_modalities() const noexcept { return features.size(); }
  std::vector<std::size_t> indices(Split s) const;
};

// Checks row alignment, train/test id disjointness and query ⊆ gallery ids.
void validate(const MultimodalDataset& ds);

// Train samples first (ids 0..ids_train-1), then test samples tagged
// Gallery, each identity contributing views 0..views_per_id-1 in order.
MultimodalDataset generate(const SynthConfig& cfg);

// Re-tags the non-train samples: per test identity, `views_as_query` views
// chosen by `rng` become queries, the rest gallery.
MultimodalDataset split_query_gallery(const MultimodalDataset& ds, std::size_t views_as_query,
                                      Rng& rng);

// generate() followed by split_query_gallery() with the config's query_views
// and an RNG derived from the config seed.
MultimodalDataset make_dataset(const SynthConfig& cfg);

// `copies` identical streams of one modality, named "<name>#<k>".
MultimodalDataset replicate_modality(const MultimodalDataset& ds, std::size_t modality_index,
                                     std::size_t copies);

MultimodalDataset select_modalities(const MultimodalDataset& ds,
                                    std::span<const std::size_t> modality_indices);
MultimodalDataset select_samples(const MultimodalDataset& ds, std::span<const std::size_t> rows);

// Holds out ceil(fraction * train ids) training identities (chosen by rng)
// and turns their samples into a query/gallery split. The returned dataset
// keeps the remaining train samples and only the held-out evaluation ids.
MultimodalDataset carve_validation(const MultimodalDataset& ds, double fraction,
                                   std::size_t views_as_query, Rng& rng);

// Train samples only, re-tagged into query/gallery per identity with the
// same protocol as the test split.
MultimodalDataset trainset_as_retrieval(const MultimodalDataset& ds, std::size_t views_as_query,
                                        Rng& rng);

}  // namespace unicat

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unicat/embedding.hpp"
#include "unicat/model.hpp"

namespace unicat {

// Whole-file helpers; throw DataError on I/O failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// ---- Model checkpoints ("UCCK", see docs/FORMATS.md) ----

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams model;
  std::vector<Label> class_ids;
};

std::string encode_checkpoint(const ModelParams& model, std::span<const Label> class_ids);
Checkpoint decode_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path& path, const ModelParams& model,
                      std::span<const Label> class_ids);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// ---- Embedding files ("UCEB", see docs/FORMATS.md) ----
// Features are stored as 32-bit floats and widened to double on read.

inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

struct EmbeddingFile {
  std::string modality;
  Matrix features;
  std::vector<Label> ids;
  std::vector<std::uint32_t> view_ids;
};

std::string encode_embedding_file(const EmbeddingFile& file);
EmbeddingFile decode_embedding_file(std::string_view bytes);
void write_embedding_file(const std::filesystem::path& path, const EmbeddingFile& file);
EmbeddingFile read_embedding_file(const std::filesystem::path& path);

EmbeddingSet to_embedding_set(const EmbeddingFile& file, Split tag);

}  // namespace unicat

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/random.hpp"
#include "unicat/errors.hpp"
#include "unicat/io.hpp"
#include "unicat/model.hpp"

using namespace unicat;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.hidden = {6, 5};
  a.embed_dim = 4;
  return a;
}

// Per-neuron forward pass written out with scalar loops.
std::vector<std::vector<double>> naive_mlp(const StreamParams& s, const Matrix& x) {
  auto h = testgen::rows(x);
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const Linear& lin = s.layers[l];
    std::vector<std::vector<double>> next(h.size(), std::vector<double>(lin.weight.rows()));
    for (std::size_t r = 0; r < h.size(); ++r)
      for (std::size_t o = 0; o < lin.weight.rows(); ++o) {
        double acc = lin.bias[o];
        for (std::size_t i = 0; i < lin.weight.cols(); ++i) acc += lin.weight(o, i) * h[r][i];
        next[r][o] = (l + 1 < s.layers.size()) ? std::max(acc, 0.0) : acc;
      }
    h = std::move(next);
  }
  return h;
}

}  // namespace

TEST(Model, ForwardMatchesScalarReference) {
  testgen::Gen g(41);
  Rng rng(1);
  const StreamParams s = init_stream("a", 7, small_arch(), 3, rng);
  const Matrix x = g.matrix(9, 7);
  const StreamOutput out = forward(s, x, Mode::Eval);
  const auto ref = naive_mlp(s, x);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.z(r, c), ref[r][c], 1e-12);
  EXPECT_EQ(out.head.logits.rows(), 9u);
  EXPECT_EQ(out.head.logits.cols(), 3u);
}

TEST(Model, TrainModeBatchNormIsStandardised) {
  testgen::Gen g(42);
  Rng rng(2);
  const StreamParams s = init_stream("a", 5, small_arch(), 0, rng);
  const StreamOutput out = forward(s, g.matrix(16, 5, 3.0), Mode::Train);
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < 16; ++r) mean += out.head.z_bn(r, c);
    mean /= 16.0;
    for (std::size_t r = 0; r < 16; ++r) sq += std::pow(out.head.z_bn(r, c) - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    // γ = 1 at init; eps keeps the variance just below one.
    EXPECT_NEAR(sq / 16.0, out.head.batch_var[c] / (out.head.batch_var[c] + 1e-5), 1e-10);
  }
}

TEST(Model, NeckHasNoShift) {
  // A constant column normalises to exactly zero in train mode.
  Head head;
  head.neck.gamma = {2.0};
  head.neck.running_mean = {0.0};
  head.neck.running_var = {1.0};
  const HeadOutput out = head_forward(head, Matrix(4, 1, 3.0), Mode::Train);
  for (double v : out.z_bn.data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, EvalModeUsesRunningStatistics) {
  Head head;
  head.neck.gamma = {2.0};
  head.neck.running_mean = {1.0};
  head.neck.running_var = {4.0 - 1e-5};
  const HeadOutput out = head_forward(head, Matrix::from_rows({{5.0}}), Mode::Eval);
  EXPECT_NEAR(out.z_bn(0, 0), 2.0 * (5.0 - 1.0) / 2.0, 1e-12);
}

TEST(Model, RunningVarianceUsesUnbiasedEstimate) {
  Head head;
  head.neck.gamma = {1.0};
  head.neck.running_mean = {0.0};
  head.neck.running_var = {1.0};
  head.neck.momentum = 0.5;
  const HeadOutput out = head_forward(head, Matrix::from_rows({{0.0}, {2.0}}), Mode::Train);
  EXPECT_DOUBLE_EQ(out.batch_var[0], 1.0);
  commit_batch_stats(head.neck, out);
  EXPECT_DOUBLE_EQ(head.neck.running_mean[0], 0.5);
  EXPECT_DOUBLE_EQ(head.neck.running_var[0], 0.5 * 1.0 + 0.5 * 2.0);
}

TEST(Model, TrainModeNeedsTwoSamples) {
  Rng rng(3);
  const StreamParams s = init_stream("a", 3, small_arch(), 2, rng);
  EXPECT_THROW(forward(s, Matrix(1, 3), Mode::Train), BatchError);
}

TEST(Model, KaimingInitStatistics) {
  ArchConfig arch;
  arch.hidden = {400};
  arch.embed_dim = 8;
  Rng rng(4);
  const StreamParams s = init_stream("a", 200, arch, 10, rng);
  const Matrix& w = s.layers[0].weight;
  double mean = 0.0, sq = 0.0;
  for (double v : w.data()) mean += v;
  mean /= static_cast<double>(w.size());
  for (double v : w.data()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 0.002);
  EXPECT_NEAR(sq / static_cast<double>(w.size()), 2.0 / 200.0, 0.0005);
  for (double b : s.layers[0].bias) EXPECT_EQ(b, 0.0);
  for (double gm : s.head.neck.gamma) EXPECT_EQ(gm, 1.0);
}

TEST(Model, StreamInitDependsOnNameAndSeedOnly) {
  const std::vector<std::string> two{"rgb", "nir"}, one{"nir"};
  const std::vector<std::size_t> dims2{5, 6}, dims1{6};
  const ModelParams a = init_model(Strategy::UniCat, two, dims2, small_arch(), 4, 9);
  const ModelParams b = init_model(Strategy::UniCat, one, dims1, small_arch(), 4, 9);
  EXPECT_EQ(a.streams[1].layers[0].weight, b.streams[0].layers[0].weight);
  EXPECT_EQ(a.streams[1].head.classifier, b.streams[0].head.classifier);
}

TEST(Model, FusionStreamsCarryStatisticsOnlyHeads) {
  const std::vector<std::string> names{"a", "b"};
  const std::vector<std::size_t> dims{3, 4};
  const ModelParams avg = init_model(Strategy::FusionAvg, names, dims, small_arch(), 5, 1);
  const ModelParams cat = init_model(Strategy::FusionConcat, names, dims, small_arch(), 5, 1);
  const ModelParams uni = init_model(Strategy::UniCat, names, dims, small_arch(), 5, 1);
  for (const auto& s : avg.streams) EXPECT_EQ(s.head.num_classes(), 0u);
  ASSERT_TRUE(avg.fused && cat.fused);
  EXPECT_EQ(avg.fused->neck.dim(), 4u);
  EXPECT_EQ(cat.fused->neck.dim(), 8u);
  EXPECT_EQ(cat.fused->num_classes(), 5u);
  EXPECT_FALSE(uni.fused);
  for (const auto& s : uni.streams) EXPECT_EQ(s.head.num_classes(), 5u);
}

TEST(Model, ParameterAndGradientViewsAlign) {
  const std::vector<std::string> names{"a", "b"};
  const std::vector<std::size_t> dims{3, 4};
  for (Strategy st : {Strategy::UniCat, Strategy::FusionAvg, Strategy::FusionConcat}) {
    ModelParams m = init_model(st, names, dims, small_arch(), 5, 1);
    ModelGrads g = zero_grads(m);
    const auto pv = parameter_views(m);
    const auto gv = gradient_views(g);
    ASSERT_EQ(pv.size(), gv.size());
    for (std::size_t k = 0; k < pv.size(); ++k) EXPECT_EQ(pv[k].size(), gv[k].size());
  }
}

TEST(Model, CheckpointRoundTripIsExact) {
  testgen::Gen g(43);
  const std::vector<std::string> names{"rgb", "nir", "tir"};
  const std::vector<std::size_t> dims{3, 4, 5};
  for (Strategy st : {Strategy::UniCat, Strategy::FusionAvg, Strategy::FusionConcat}) {
    ModelParams m = init_model(st, names, dims, small_arch(), 6, 2);
    for (auto v : parameter_views(m))
      for (double& x : v) x = g.gauss();
    const std::vector<Label> ids{10, 11, 12, 13, 14, 15};
    const Checkpoint c = decode_checkpoint(encode_checkpoint(m, ids));
    EXPECT_EQ(c.class_ids, ids);
    EXPECT_EQ(c.model.strategy, st);
    EXPECT_EQ(encode_checkpoint(c.model, c.class_ids), encode_checkpoint(m, ids));
    ModelParams copy = c.model;
    auto a = parameter_views(m), b = parameter_views(copy);
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_TRUE(std::equal(a[k].begin(), a[k].end(), b[k].begin()));
  }
}

TEST(Model, CorruptCheckpointRejected) {
  const std::vector<std::string> names{"a"};
  const std::vector<std::size_t> dims{3};
  const ModelParams m = init_model(Strategy::UniCat, names, dims, small_arch(), 2, 1);
  std::string bytes = encode_checkpoint(m, std::vector<Label>{0, 1});
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), FormatError);
}

TEST(Model, EmbedDatasetUniCatIsConcatOfNormalisedStreams) {
  SynthConfig cfg = clean_preset(3);
  cfg.ids_train = 4;
  cfg.ids_test = 3;
  cfg.views_per_id = 3;
  cfg.query_views = 1;
  const MultimodalDataset ds = make_dataset(cfg);
  const std::vector<std::string> names = ds.modality_names;
  std::vector<std::size_t> dims;
  for (const auto& f : ds.features) dims.push_back(f.cols());
  const ModelParams m = init_model(Strategy::UniCat, names, dims, small_arch(), 4, 1);
  const EmbeddingSet all = embed_dataset(m, ds, Split::Gallery, EmbedTarget::multimodal());
  ASSERT_EQ(all.features.cols(), 12u);
  for (std::size_t i = 0; i < 3; ++i) {
    const EmbeddingSet one = embed_dataset(m, ds, Split::Gallery, EmbedTarget::stream(i));
    const Matrix block = column_block(all.features, 4 * i, 4);
    const Matrix expected = l2_normalize_rows(one.features);
    for (std::size_t k = 0; k < block.size(); ++k)
      EXPECT_NEAR(block.data()[k], expected.data()[k], 1e-15);
  }
  EXPECT_EQ(all.ids.size(), ds.indices(Split::Gallery).size());
}

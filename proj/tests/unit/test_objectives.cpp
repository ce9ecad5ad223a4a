#include <gtest/gtest.h>

#include <cmath>

#include "support/gradcases.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"
#include "unicat/errors.hpp"
#include "unicat/fusion.hpp"
#include "unicat/objectives.hpp"

using namespace unicat;

namespace {

double triplet_value(const Matrix& z, const std::vector<std::size_t>& y, double alpha) {
  return triplet_loss(z, y, alpha).loss;
}

}  // namespace

TEST(Triplet, SymmetricSquareGivesLnTwo) {
  const Matrix z = Matrix::from_rows({{0, 0}, {2, 0}, {0, 2}, {2, 2}});
  const std::vector<std::size_t> y{0, 0, 1, 1};
  EXPECT_NEAR(triplet_value(z, y, 0.0), std::log(2.0), 1e-15);
}

TEST(Triplet, SaturatedEasyCase) {
  const Matrix z = Matrix::from_rows({{0, 0}, {0, 0}, {20, 0}, {20, 0}});
  const std::vector<std::size_t> y{0, 0, 1, 1};
  const TripletResult r = triplet_loss(z, y, 0.0);
  EXPECT_NEAR(r.loss, std::log1p(std::exp(-20.0)), 1e-20);
  EXPECT_NEAR(r.loss, 2.06e-9, 1e-11);
}

TEST(Triplet, MatchesExhaustiveOracle) {
  testgen::Gen g(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t P = g.size(2, 4), K = g.size(2, 4), D = g.size(1, 8);
    const Matrix z = g.matrix(P * K, D);
    const auto y = g.pk_labels(P, K);
    const double alpha = g.real(0.0, 0.5);
    const TripletResult r = triplet_loss(z, y, alpha);
    const auto ref = oracle::batch_hard(testgen::rows(z), y, alpha);
    ASSERT_EQ(r.selection.positive, ref.positive);
    ASSERT_EQ(r.selection.negative, ref.negative);
    ASSERT_NEAR(r.loss, ref.loss, 1e-12);
  }
}

TEST(Triplet, TiesGoToLowestIndex) {
  // Both positives at distance 1, both negatives at distance 2.
  const Matrix z = Matrix::from_rows({{0, 0}, {1, 0}, {-1, 0}, {0, 2}, {0, -2}});
  const std::vector<std::size_t> y{0, 0, 0, 1, 1};
  const TripletResult r = triplet_loss(z, y, 0.0);
  EXPECT_EQ(r.selection.positive[0], 1u);
  EXPECT_EQ(r.selection.negative[0], 3u);
}

TEST(Triplet, PositiveAndIncreasingInMargin) {
  testgen::Gen g(22);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix z = g.matrix(8, 3);
    const auto y = g.pk_labels(4, 2);
    const double a = triplet_value(z, y, 0.1);
    EXPECT_GT(triplet_value(z, y, 0.0), 0.0);
    EXPECT_GT(a, triplet_value(z, y, 0.0));
  }
}

TEST(Triplet, SelectionInvariantUnderRotation) {
  testgen::Gen g(23);
  const Matrix z = g.matrix(12, 2);
  const auto y = g.pk_labels(4, 3);
  const double t = 0.7;
  const Matrix rot = Matrix::from_rows({{std::cos(t), -std::sin(t)}, {std::sin(t), std::cos(t)}});
  const auto a = triplet_loss(z, y, 0.0).selection;
  const auto b = triplet_loss(matmul(z, rot), y, 0.0).selection;
  EXPECT_EQ(a.positive, b.positive);
  EXPECT_EQ(a.negative, b.negative);
}

TEST(Triplet, GradientMatchesFiniteDifferences) {
  testgen::Gen g(24);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix z = g.matrix(12, 4);
    const auto y = g.pk_labels(4, 3);
    const TripletResult r = triplet_loss(z, y, 0.2);
    std::vector<double> x(z.data().begin(), z.data().end());
    auto f = [&](std::span<const double> p) {
      Matrix m(z.rows(), z.cols(), std::vector<double>(p.begin(), p.end()));
      return triplet_value(m, y, 0.2);
    };
    EXPECT_LT(finite_diff_check(f, x, r.grad.data()).max_rel_error, 1e-5);
  }
}

TEST(Triplet, InfeasibleBatchThrows) {
  const Matrix z = Matrix::from_rows({{0}, {1}});
  EXPECT_THROW(triplet_loss(z, std::vector<std::size_t>{0, 1}, 0.0), BatchError);
  EXPECT_THROW(triplet_loss(z, std::vector<std::size_t>{0, 0}, 0.0), BatchError);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const Matrix logits(3, 10, 0.25);
  const std::vector<std::size_t> y{0, 4, 9};
  EXPECT_NEAR(cross_entropy(logits, y).loss, std::log(10.0), 1e-14);
}

TEST(CrossEntropy, SaturatedCorrectClass) {
  Matrix logits(1, 4, 0.0);
  logits(0, 2) = 50.0;
  EXPECT_LT(cross_entropy(logits, std::vector<std::size_t>{2}).loss, 1e-20);
}

TEST(CrossEntropy, MatchesDirectDefinition) {
  testgen::Gen g(25);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t B = g.size(1, 10), C = g.size(2, 8);
    const Matrix logits = g.matrix(B, C, 3.0);
    std::vector<std::size_t> y;
    for (std::size_t b = 0; b < B; ++b) y.push_back(g.size(0, C - 1));
    EXPECT_NEAR(cross_entropy(logits, y).loss, oracle::cross_entropy(testgen::rows(logits), y),
                1e-12);
  }
}

TEST(CrossEntropy, ShiftInvariantPerRow) {
  testgen::Gen g(26);
  const Matrix logits = g.matrix(5, 6);
  Matrix shifted = logits;
  for (std::size_t r = 0; r < 5; ++r)
    for (double& v : shifted.row(r)) v += 3.0 * static_cast<double>(r) - 4.0;
  const std::vector<std::size_t> y{0, 1, 2, 3, 4};
  EXPECT_NEAR(cross_entropy(logits, y).loss, cross_entropy(shifted, y).loss, 1e-12);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  testgen::Gen g(27);
  const Matrix logits = g.matrix(6, 5);
  const std::vector<std::size_t> y{0, 1, 2, 3, 4, 0};
  const auto r = cross_entropy(logits, y);
  std::vector<double> x(logits.data().begin(), logits.data().end());
  auto f = [&](std::span<const double> p) {
    return cross_entropy(Matrix(6, 5, std::vector<double>(p.begin(), p.end())), y).loss;
  };
  EXPECT_LT(finite_diff_check(f, x, r.grad.data()).max_rel_error, 1e-5);
}

TEST(CrossEntropy, OutOfRangeLabelThrows) {
  EXPECT_THROW(cross_entropy(Matrix(1, 3), std::vector<std::size_t>{3}), DataError);
}

TEST(CombinedLoss, LambdaZeroEqualsTriplet) {
  testgen::Gen g(28);
  const Matrix z = g.matrix(8, 3);
  const auto y = g.pk_labels(4, 2);
  LossConfig cfg;
  cfg.lambda = 0.0;
  const auto c = combined_loss(z, g.matrix(8, 4), y, cfg);
  const auto t = triplet_loss(z, y, 0.0);
  EXPECT_EQ(c.loss, t.loss);
  EXPECT_EQ(c.grad_z, t.grad);
  EXPECT_TRUE(c.grad_logits.empty());
}

TEST(CombinedLoss, DefaultLambdaIsOne) { EXPECT_EQ(LossConfig{}.lambda, 1.0); }

TEST(CombinedLoss, NegativeLambdaRejected) {
  LossConfig cfg;
  cfg.lambda = -1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Fuse, Definitions) {
  const Matrix a = Matrix::from_rows({{1, 0}});
  const Matrix b = Matrix::from_rows({{0, 1}});
  const Matrix ab[] = {a, b};
  EXPECT_EQ(fuse(ab, FusionOperator::Concat), Matrix::from_rows({{1, 0, 0, 1}}));
  const Matrix vv[] = {a, a};
  EXPECT_EQ(fuse(vv, FusionOperator::Average), a);
  const Matrix one[] = {Matrix::from_rows({{2, -3}})};
  EXPECT_EQ(fuse(one, FusionOperator::Average), one[0]);
  EXPECT_EQ(fuse(one, FusionOperator::Concat), one[0]);
}

TEST(Fuse, AverageBackwardIsOneOverM) {
  testgen::Gen g(29);
  const Matrix grad = g.matrix(4, 3);
  const std::vector<std::size_t> dims{3, 3, 3};
  for (const Matrix& part : fuse_backward(grad, FusionOperator::Average, dims))
    for (std::size_t k = 0; k < grad.size(); ++k)
      EXPECT_EQ(part.data()[k], grad.data()[k] * (1.0 / 3.0));
}

TEST(Fuse, ConcatBackwardSlicesBlocks) {
  testgen::Gen g(30);
  const Matrix grad = g.matrix(4, 5);
  const std::vector<std::size_t> dims{2, 3};
  const auto parts = fuse_backward(grad, FusionOperator::Concat, dims);
  EXPECT_EQ(parts[0], column_block(grad, 0, 2));
  EXPECT_EQ(parts[1], column_block(grad, 2, 3));
}

TEST(StrategyLoss, SingleStreamStrategiesAgreeWithIdenticalHeads) {
  testgen::Gen g(31);
  const std::vector<std::string> names{"solo"};
  const std::vector<std::size_t> dims{4};
  ArchConfig arch;
  arch.hidden = {5};
  arch.embed_dim = 3;
  const auto y = g.pk_labels(3, 2);
  const std::vector<Matrix> x{g.matrix(6, 4)};
  std::vector<double> losses;
  ModelParams uni = init_model(Strategy::UniCat, names, dims, arch, 3, 5);
  for (Strategy s : {Strategy::FusionAvg, Strategy::FusionConcat, Strategy::UniCat}) {
    ModelParams m = init_model(s, names, dims, arch, 3, 5);
    m.streams[0].layers = uni.streams[0].layers;
    if (m.fused) m.fused = uni.streams[0].head;
    losses.push_back(evaluate_objective(m, x, y, LossConfig{}).loss);
  }
  EXPECT_EQ(losses[0], losses[2]);
  EXPECT_EQ(losses[1], losses[2]);
}

TEST(StrategyLoss, UniCatIsSumOfLocalLosses) {
  testgen::Gen g(32);
  const std::vector<std::string> names{"a", "b"};
  const std::vector<std::size_t> dims{4, 4};
  const auto y = g.pk_labels(3, 2);
  ModelParams m = init_model(Strategy::UniCat, names, dims, ArchConfig{}, 3, 9);
  m.streams[1].layers = m.streams[0].layers;
  m.streams[1].head = m.streams[0].head;
  const Matrix x = g.matrix(6, 4);
  const std::vector<Matrix> both{x, x};
  const double two = evaluate_objective(m, both, y, LossConfig{}).loss;
  ModelParams single = m;
  single.streams.pop_back();
  const std::vector<Matrix> one{x};
  const double s = evaluate_objective(single, one, y, LossConfig{}).loss;
  EXPECT_EQ(two, 2.0 * s);

  // Removing a stream removes exactly its own local loss.
  ModelParams diff = init_model(Strategy::UniCat, names, dims, ArchConfig{}, 3, 10);
  const std::vector<Matrix> xs{g.matrix(6, 4), g.matrix(6, 4)};
  ObjectiveResult full = evaluate_objective(diff, xs, y, LossConfig{});
  const StrategyLoss sl =
      strategy_loss(full.stream_outputs, nullptr, nullptr, y, Strategy::UniCat, LossConfig{});
  EXPECT_NEAR(full.loss - sl.stream_losses[1], sl.stream_losses[0], 1e-12);
}

TEST(StrategyLoss, FusionWithoutHeadRejected) {
  std::vector<StreamOutput> none;
  EXPECT_THROW(strategy_loss(none, nullptr, nullptr, std::vector<std::size_t>{}, Strategy::FusionAvg,
                             LossConfig{}),
               ConfigError);
}

TEST(Objective, ConcatGradientBlocksMatchFusedGradient) {
  testgen::Gen g(33);
  const std::vector<std::string> names{"a", "b"};
  const std::vector<std::size_t> dims{3, 5};
  ModelParams m = init_model(Strategy::FusionConcat, names, dims, ArchConfig{}, 4, 3);
  const auto y = g.pk_labels(4, 2);
  const std::vector<Matrix> xs{g.matrix(8, 3), g.matrix(8, 5)};
  ObjectiveResult r = evaluate_objective(m, xs, y, LossConfig{});
  const Matrix& at_fuse = r.grads.fused->input;
  std::vector<std::size_t> embed{m.streams[0].embed_dim(), m.streams[1].embed_dim()};
  const auto parts = fuse_backward(at_fuse, FusionOperator::Concat, embed);
  // Each stream's last-layer bias gradient is the column sum of its block.
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& bias = r.grads.streams[s].layers.back().bias;
    for (std::size_t j = 0; j < bias.size(); ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < parts[s].rows(); ++i) col += parts[s](i, j);
      EXPECT_NEAR(bias[j], col, 1e-12);
    }
  }
}

TEST(Objective, DoesNotMutateModel) {
  testgen::Gen g(34);
  const std::vector<std::string> names{"a"};
  const std::vector<std::size_t> dims{3};
  const ModelParams m = init_model(Strategy::UniCat, names, dims, ArchConfig{}, 3, 3);
  const ModelParams before = m;
  const std::vector<Matrix> xs{g.matrix(6, 3)};
  evaluate_objective(m, xs, g.pk_labels(3, 2), LossConfig{});
  EXPECT_EQ(m.streams[0].head.neck.running_mean, before.streams[0].head.neck.running_mean);
}

TEST(Objective, FullObjectiveGradientOnRandomConfigurations) {
  testgen::Gen g(35);
  for (int trial = 0; trial < 30; ++trial) {
    const testgen::GradCase c = testgen::well_conditioned_case(g, 1000 + trial, 1e-4);
    const GradCheckReport r = testgen::check_grad_case(c);
    EXPECT_LT(r.max_rel_error, 1e-5) << c.label << " worst coordinate " << r.worst_coordinate;
  }
}

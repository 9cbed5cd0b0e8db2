#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace sdl;

namespace {

struct Blobs {
  Matrix F;
  std::vector<int> y;
};

Blobs blobs(int classes, int per_class, int dim, double spread, Rng& rng) {
  const Matrix centers = 4.0 * oracle::random_unit_columns(dim, classes, rng);
  Blobs b;
  b.F.resize(dim, classes * per_class);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      Vector v = centers.col(c);
      for (int m = 0; m < dim; ++m) v(m) += spread * rng.normal();
      b.F.col(c * per_class + i) = v;
      b.y.push_back(c + 1);
    }
  return b;
}

}  // namespace

TEST(BinarySvm, TwoPointSeparable) {
  Matrix F(1, 2);
  F << 1.0, -1.0;
  const auto m = train_binary(F, {1, -1}, 100.0);
  EXPECT_GT(m.w(0), 0.0);
  EXPECT_GT(m.decision(F.col(0)), 0.0);
  EXPECT_LT(m.decision(F.col(1)), 0.0);
  EXPECT_TRUE(m.certified);
}

TEST(BinarySvm, TinyCShrinksWeights) {
  Rng rng(1);
  const auto b = blobs(2, 10, 3, 0.5, rng);
  std::vector<int> y;
  for (int v : b.y) y.push_back(v == 1 ? 1 : -1);
  // With C -> 0 the optimum satisfies |w| <= C sum |f_i|.
  const double c = 1e-6;
  const auto m = train_binary(b.F, y, c);
  EXPECT_LE(m.w.norm(), c * b.F.colwise().norm().sum() + 1e-12);
  EXPECT_LT(m.w.norm(), 1e-4);
}

TEST(BinarySvm, SeparableSetHasTinyHinge) {
  // 20 points with margin: x1 >= 1 for +1 and x1 <= -1 for -1.
  Rng rng(2);
  Matrix F(2, 20);
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const int s = i < 10 ? 1 : -1;
    F(0, i) = s * rng.uniform(1.0, 3.0);
    F(1, i) = rng.uniform(-2.0, 2.0);
    y.push_back(s);
  }
  SvmOptions opt;
  opt.gap_tol = 1e-8;
  opt.max_epochs = 20000;
  const auto m = train_binary(F, y, 100.0, opt);
  double hinge = 0.0;
  for (int i = 0; i < 20; ++i) hinge += std::max(0.0, 1.0 - y[i] * m.decision(F.col(i)));
  EXPECT_LT(hinge, 1e-3);
}

TEST(BinarySvm, DualityGapCertificate) {
  Rng rng(3);
  const auto b = blobs(2, 30, 5, 2.0, rng);
  std::vector<int> y;
  for (int v : b.y) y.push_back(v == 1 ? 1 : -1);
  const auto m = train_binary(b.F, y, 1.0);
  ASSERT_TRUE(m.certified);
  EXPECT_LE(m.primal - m.dual, 1e-4 * m.primal);
  EXPECT_GE(m.primal - m.dual, -1e-9 * m.primal);
}

TEST(BinarySvm, DegenerateAndInvalidInput) {
  Matrix F = Matrix::Ones(2, 3);
  try {
    train_binary(F, {1, 1, 1}, 1.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "degenerate binary problem");
  }
  EXPECT_THROW(train_binary(F, {1, 0, -1}, 1.0), Error);
  EXPECT_THROW(train_binary(F, {1, -1, -1}, 0.0), Error);
  F(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train_binary(F, {1, -1, -1}, 1.0), Error);
}

TEST(BinarySvm, DeterministicGivenSeed) {
  Rng rng(4);
  const auto b = blobs(2, 15, 4, 1.5, rng);
  std::vector<int> y;
  for (int v : b.y) y.push_back(v == 1 ? 1 : -1);
  SvmOptions opt;
  opt.seed = 9;
  const auto m1 = train_binary(b.F, y, 1.0, opt);
  const auto m2 = train_binary(b.F, y, 1.0, opt);
  EXPECT_EQ((m1.w - m2.w).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(m1.b, m2.b);
}

TEST(OneVsAll, TwoClassesAgreeWithBinary) {
  Rng rng(5);
  const auto b = blobs(2, 20, 3, 1.0, rng);
  const auto model = train_ova(b.F, b.y, 2, 1.0);
  std::vector<int> bin;
  for (int v : b.y) bin.push_back(v == 1 ? 1 : -1);
  SvmOptions opt;
  opt.seed = derive_seed(0, {1});
  const auto m = train_binary(b.F, bin, 1.0, opt);
  const Matrix scores = decision_values(model, b.F);
  for (int i = 0; i < b.F.cols(); ++i) {
    const double d = m.decision(b.F.col(i));
    if (std::abs(d) > 1e-6) EXPECT_EQ(scores(0, i) > 0.0, d > 0.0);
  }
}

TEST(OneVsAll, BlobsTrainAndTest) {
  Rng rng(6);
  const auto train = blobs(3, 40, 6, 0.7, rng);
  const auto model = train_ova(train.F, train.y, 3, 1.0);
  EXPECT_GE(accuracy(train.y, predict(model, train.F)), 0.99);
  Rng rng_test(6);
  auto test = blobs(3, 40, 6, 0.7, rng_test);  // same centers
  Rng noise(60);
  for (int i = 0; i < test.F.cols(); ++i)
    for (int m = 0; m < 6; ++m) test.F(m, i) += 0.3 * noise.normal();
  EXPECT_GE(accuracy(test.y, predict(model, test.F)), 0.95);
}

TEST(OneVsAll, IdenticalFeaturesGiveMajorityRate) {
  const Matrix F = Matrix::Ones(2, 5);
  const std::vector<int> y{1, 1, 1, 2, 3};
  const auto model = train_ova(F, y, 3, 1.0);
  EXPECT_DOUBLE_EQ(accuracy(y, predict(model, F)), 0.6);
}

TEST(OneVsAll, AbsentClassGetsZeroMarginMachine) {
  Rng rng(7);
  const auto b = blobs(2, 10, 3, 0.5, rng);
  const auto model = train_ova(b.F, b.y, 3, 1.0);
  EXPECT_EQ(model.weights.row(2).norm(), 0.0);
  EXPECT_EQ(model.biases(2), -1.0);
  for (int p : predict(model, b.F)) EXPECT_NE(p, 3);
}

TEST(Predict, TiesGoToSmallestClass) {
  Matrix scores(3, 2);
  scores << 0.5, -1.0,
            0.5, 2.0,
            0.1, 2.0;
  EXPECT_EQ(predict_from_scores(scores), (std::vector<int>{1, 2}));
  LinearSvmModel sym;
  sym.weights = Matrix::Zero(2, 1);
  sym.biases = Vector::Zero(2);
  EXPECT_EQ(predict(sym, Matrix::Ones(1, 1)), std::vector<int>{1});
}

TEST(Predict, SinglePointRepredicted) {
  Matrix F(2, 3);
  F << 1.0, -1.0, 0.0,
       0.0, 0.0, 1.0;
  const std::vector<int> y{1, 2, 3};
  const auto model = train_ova(F, y, 3, 100.0);
  EXPECT_EQ(predict(model, F), y);
}

TEST(SelectC, DefaultGridAndSingleValue) {
  const auto g = default_c_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_NEAR(g.front(), 1e-3, 1e-18);
  EXPECT_NEAR(g.back(), 1e2, 1e-12);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(10.0, 5.0 / 9.0), 1e-12);
  Rng rng(8);
  const auto b = blobs(2, 6, 2, 0.5, rng);
  EXPECT_EQ(select_C(b.F, b.y, 2, {0.7}, 2, 1).best_c, 0.7);
}

TEST(SelectC, TiesTowardSmallerC) {
  // Well separated blobs: every C in the grid validates perfectly.
  Rng rng(9);
  const auto b = blobs(3, 10, 4, 0.05, rng);
  const auto sel = select_C(b.F, b.y, 3, {1.0, 10.0, 100.0}, 2, 3);
  EXPECT_EQ(sel.best_c, 1.0);
  for (double a : sel.mean_accuracy) EXPECT_DOUBLE_EQ(a, 1.0);
}

TEST(SelectC, StratifiedHalves) {
  std::vector<int> y;
  for (int c = 1; c <= 3; ++c)
    for (int i = 0; i < 5; ++i) y.push_back(c);
  Rng rng(10);
  const auto s = stratified_half_split(y, 3, rng);
  EXPECT_EQ(s.learn.size() + s.validate.size(), y.size());
  for (int c = 1; c <= 3; ++c) {
    int learn = 0;
    for (auto i : s.learn) learn += y[i] == c;
    EXPECT_EQ(learn, 3);
  }
}

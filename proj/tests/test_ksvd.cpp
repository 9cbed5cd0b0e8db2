#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace sdl;

TEST(Omp, SelectsExactAtom) {
  const Matrix I = Matrix::Identity(4, 4);
  const Vector x = (Vector(4) << 0.0, 3.0, 0.0, -1.0).finished();
  std::vector<int> support;
  const Vector a = omp(x, I, 1, &support);
  ASSERT_EQ(support, std::vector<int>{1});
  EXPECT_DOUBLE_EQ(a(1), 3.0);
  EXPECT_EQ(a(3), 0.0);
  const Vector b = omp(x, I, 2, &support);
  EXPECT_EQ(support, (std::vector<int>{1, 3}));
  EXPECT_NEAR((x - I * b).norm(), 0.0, 1e-14);
}

TEST(Omp, SupportDistinctAndResidualOrthogonal) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix D = oracle::random_unit_columns(8, 12, rng);
    const Vector x = oracle::random_matrix(8, 1, rng).col(0);
    std::vector<int> support;
    const Vector a = omp(x, D, 5, &support);
    EXPECT_EQ(std::set<int>(support.begin(), support.end()).size(), support.size());
    EXPECT_LE(support.size(), 5u);
    const Vector r = x - D * a;
    for (int j : support) EXPECT_NEAR(D.col(j).dot(r), 0.0, 1e-10);
    int nonzero = 0;
    for (int j = 0; j < 12; ++j) nonzero += a(j) != 0.0;
    EXPECT_EQ(nonzero, static_cast<int>(support.size()));
  }
}

TEST(Omp, DuplicateAtomsNeverReselected) {
  Matrix D(3, 3);
  D.col(0) = Vector::Unit(3, 0);
  D.col(1) = Vector::Unit(3, 0);
  D.col(2) = Vector::Unit(3, 1);
  const Vector x = (Vector(3) << 1.0, 0.5, 0.2).finished();
  std::vector<int> support;
  omp(x, D, 3, &support);
  EXPECT_EQ(std::set<int>(support.begin(), support.end()).size(), support.size());
  EXPECT_EQ(omp(Vector::Zero(3), D, 2).norm(), 0.0);
}

TEST(Ksvd, RankOneDataRecoversDirection) {
  Rng rng(2);
  const Vector u = oracle::random_unit_columns(6, 1, rng).col(0);
  Matrix X(6, 10);
  for (int i = 0; i < 10; ++i) X.col(i) = rng.uniform(0.5, 2.0) * (i % 2 ? 1.0 : -1.0) * u;
  KsvdParams p;
  p.seed = 3;
  const auto res = ksvd_class(X, 1, p);
  EXPECT_NEAR(std::abs(res.atoms.col(0).dot(u)), 1.0, 1e-10);
  EXPECT_LT(res.errors.back(), 1e-18 * X.squaredNorm() + 1e-20);
  Eigen::Index idx;
  res.atoms.col(0).cwiseAbs().maxCoeff(&idx);
  EXPECT_GT(res.atoms(idx, 0), 0.0);
}

TEST(Ksvd, ErrorTraceNonIncreasingAndAtomsUnit) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto toy = oracle::toy_problem(1, 12, 30, rng, 0.1);
    KsvdParams p;
    p.seed = trial;
    const auto res = ksvd_class(toy.X, 6, p);
    ASSERT_EQ(res.errors.size(), 10u);
    for (std::size_t i = 1; i < res.errors.size(); ++i) EXPECT_LE(res.errors[i], res.errors[i - 1] * (1 + 1e-12));
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(res.atoms.col(k).norm(), 1.0, 1e-12);
    EXPECT_NEAR(reconstruction_error(toy.X, res.atoms, res.codes), res.errors.back(), 1e-12);
  }
}

TEST(Ksvd, SparsityDefaultAndLimits) {
  EXPECT_EQ(KsvdParams{}.sparsity_for(10), 3);
  EXPECT_EQ(KsvdParams{}.sparsity_for(1), 1);
  EXPECT_EQ(KsvdParams{}.sparsity_for(4), 1);
  KsvdParams p;
  p.sparsity = 5;
  EXPECT_THROW(p.sparsity_for(4), Error);
  EXPECT_THROW(ksvd_class(Matrix::Zero(3, 0), 2, KsvdParams{}), Error);
}

TEST(Ksvd, FewerSignalsThanAtoms) {
  Rng rng(5);
  const Matrix X = oracle::random_matrix(5, 2, rng);
  KsvdParams p;
  p.seed = 1;
  const auto res = ksvd_class(X, 4, p);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(res.atoms.col(k).norm(), 1.0, 1e-12);
  EXPECT_TRUE(res.atoms.allFinite());
}

TEST(InitDictionaries, DeterministicShapesAndFeasible) {
  Rng rng(6);
  const auto toy = oracle::toy_problem(3, 10, 8, rng);
  KsvdParams p;
  p.seed = 42;
  const auto a = init_class_dictionaries(toy.X, toy.y, 3, 4, p, 1);
  const auto b = init_class_dictionaries(toy.X, toy.y, 3, 4, p, 3);
  EXPECT_EQ(a.classes(), 3);
  EXPECT_EQ(a.block_size(), 4);
  EXPECT_EQ(a.dim(), 10);
  EXPECT_EQ((a.atoms() - b.atoms()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((prox_unit_columns(a).atoms() - a.atoms()).cwiseAbs().maxCoeff(), 0.0);
  std::vector<int> missing = toy.y;
  for (int& v : missing)
    if (v == 3) v = 2;
  EXPECT_THROW(init_class_dictionaries(toy.X, missing, 3, 4, p), Error);
}

TEST(InitDictionaries, DisjointSupportsGiveOrthogonalBlocks) {
  // Class 1 lives on coordinates 0..3, class 2 on 4..7.
  Rng rng(7);
  Matrix X = Matrix::Zero(8, 20);
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const int c = i % 2;
    for (int m = 0; m < 4; ++m) X(4 * c + m, i) = rng.normal();
    y.push_back(c + 1);
  }
  KsvdParams p;
  p.seed = 1;
  const auto d = init_class_dictionaries(X, y, 2, 3, p);
  const Matrix s = dictionary_similarity(d);
  EXPECT_LT(s(0, 1), 1e-10);
}

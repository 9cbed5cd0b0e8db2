#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace sdl;

namespace {

HyperParams toy_hyper() {
  HyperParams h;
  h.mu = 1.0;
  h.lambda = 0.1;
  h.gamma1 = 0.1;
  h.gamma2 = 0.1;
  h.atoms_per_class = 3;
  h.iterations = 30;
  h.early_stop = false;
  return h;
}

}  // namespace

TEST(Objective, ZeroCodesAndOrthogonalBlocks) {
  const DictionarySet d(Matrix(Matrix::Identity(4, 4)), 2);
  Rng rng(1);
  const Matrix X = oracle::random_matrix(4, 5, rng);
  const std::vector<int> y{1, 2, 1, 2, 2};
  const auto ob = objective_terms(d, Matrix::Zero(4, 5), X, y, toy_hyper());
  EXPECT_DOUBLE_EQ(ob.J1, X.squaredNorm());
  EXPECT_DOUBLE_EQ(ob.J2, X.squaredNorm());
  EXPECT_EQ(ob.J3, 0.0);
  EXPECT_EQ(ob.J4, 0.0);
  EXPECT_EQ(ob.J5, 0.0);
}

TEST(Objective, IdenticalBlocksCoherence) {
  // Two identical orthonormal blocks of one atom: J5 counts both orders.
  Matrix atoms(3, 2);
  atoms.col(0) = Vector::Unit(3, 0);
  atoms.col(1) = Vector::Unit(3, 0);
  const DictionarySet d(atoms, 1);
  const auto ob = objective_terms(d, Matrix::Zero(2, 1), Matrix::Zero(3, 1), {1}, toy_hyper());
  EXPECT_DOUBLE_EQ(ob.J5, 2.0);
}

TEST(Objective, TermsRecomposeAndMatchDirectSums) {
  Rng rng(2);
  const DictionarySet d(oracle::random_unit_columns(5, 6, rng), 2);
  const Matrix X = oracle::random_matrix(5, 7, rng);
  const Matrix A = oracle::random_matrix(6, 7, rng);
  const std::vector<int> y{1, 2, 3, 1, 2, 3, 1};
  const auto h = toy_hyper();
  const auto ob = objective_terms(d, A, X, y, h);
  EXPECT_NEAR(ob.J, ob.J1 + h.mu * ob.J2 + h.lambda * ob.J3 + h.gamma1 * ob.J4 + h.gamma2 * ob.J5, 1e-12);
  double j2 = 0, j4 = 0, j5 = 0;
  for (int n = 0; n < 7; ++n) {
    const int c = y[n];
    j2 += (X.col(n) - d.atoms().middleCols(2 * (c - 1), 2) * A.col(n).segment(2 * (c - 1), 2)).squaredNorm();
    for (int o = 1; o <= 3; ++o)
      if (o != c) j4 += A.col(n).segment(2 * (o - 1), 2).squaredNorm();
  }
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      if (a != b) j5 += (d.block(a).transpose() * d.block(b)).squaredNorm();
  EXPECT_NEAR(ob.J2, j2, 1e-10);
  EXPECT_NEAR(ob.J4, j4, 1e-10);
  EXPECT_NEAR(ob.J5, j5, 1e-10);
  EXPECT_NEAR(ob.J3, A.cwiseAbs().sum(), 1e-12);
}

TEST(Gradient, ScalarExample) {
  // One class, one atom, one signal with a = 1: dJ1/dd = -2(x - d), no J2.
  Matrix atoms(2, 1);
  atoms << 0.6, 0.0;
  const DictionarySet d(atoms, 1);
  Matrix X(2, 1);
  X << 1.0, 2.0;
  auto h = toy_hyper();
  h.mu = 0.0;
  const Matrix g = grad_dictionary(1, d, Matrix::Ones(1, 1), X, {1}, h);
  EXPECT_NEAR(g(0, 0), -2.0 * 1.0 + 2.0 * 0.6, 1e-14);
  EXPECT_NEAR(g(1, 0), -2.0 * 2.0, 1e-14);
}

TEST(Gradient, ZeroCodesLeaveOnlyCoherence) {
  Rng rng(3);
  const DictionarySet d(oracle::random_unit_columns(4, 4, rng), 2);
  const Matrix X = oracle::random_matrix(4, 3, rng);
  auto h = toy_hyper();
  const Matrix g = grad_dictionary(1, d, Matrix::Zero(4, 3), X, {1, 2, 1}, h);
  const Matrix expect = 4.0 * h.gamma2 * d.block(2) * (d.block(2).transpose() * d.block(1));
  EXPECT_LT((g - expect).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = 2 + static_cast<int>(rng.index(5));
    const int kp = 1 + static_cast<int>(rng.index(3));
    const int classes = 1 + static_cast<int>(rng.index(3));
    const int n = 4 + static_cast<int>(rng.index(5));
    const DictionarySet d(oracle::random_unit_columns(m, kp * classes, rng), kp);
    const Matrix X = oracle::random_matrix(m, n, rng);
    const Matrix A = oracle::random_matrix(kp * classes, n, rng);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) y.push_back(1 + i % classes);
    auto h = toy_hyper();
    h.mu = trial % 2 ? 1.0 : 0.0;
    h.gamma2 = trial % 3 ? 0.3 : 0.0;
    for (int c = 1; c <= classes; ++c) {
      const Matrix g = grad_dictionary(c, d, A, X, y, h);
      const Matrix fd = oracle::fd_block_gradient(c, d, A, X, y, h, 1e-6);
      EXPECT_LT((g - fd).norm() / std::max(fd.norm(), 1e-12), 1e-5) << "trial " << trial << " class " << c;
    }
  }
}

TEST(Gradient, FullGradientStacksBlocks) {
  Rng rng(5);
  const DictionarySet d(oracle::random_unit_columns(6, 9, rng), 3);
  const Matrix X = oracle::random_matrix(6, 10, rng);
  const Matrix A = oracle::random_matrix(9, 10, rng);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) y.push_back(1 + (i * 7) % 3);
  const auto h = toy_hyper();
  const Matrix full = full_gradient(d, A, X, y, h);
  for (int c = 1; c <= 3; ++c) {
    const Matrix g = grad_dictionary(c, d, A, X, y, h);
    EXPECT_LT((full.middleCols(d.block_start(c), 3) - g).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, g.norm()));
  }
}

TEST(Prox, ExamplesAndIdempotence) {
  Matrix m(2, 3);
  m << 3.0, 0.3, 0.0,
       4.0, 0.4, 0.0;
  const Matrix p = prox_unit_columns(m);
  EXPECT_NEAR(p(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(p(1, 0), 0.8, 1e-15);
  EXPECT_EQ(p(0, 1), 0.3);
  EXPECT_EQ(p(1, 1), 0.4);
  EXPECT_EQ(p.col(2).norm(), 0.0);
  EXPECT_EQ((prox_unit_columns(p) - p).cwiseAbs().maxCoeff(), 0.0);
  Rng rng(6);
  const Matrix r = prox_unit_columns(Matrix(5.0 * oracle::random_matrix(4, 20, rng)));
  EXPECT_LE(r.colwise().norm().maxCoeff(), 1.0 + 1e-15);
  m(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(prox_unit_columns(m), Error);
}

TEST(Similarity, ExamplesAndSymmetry) {
  EXPECT_EQ(mean_off_diagonal(dictionary_similarity(DictionarySet(Matrix(Matrix::Identity(4, 4)), 2))), 0.0);
  Rng rng(7);
  const DictionarySet d(oracle::random_unit_columns(5, 8, rng), 2);
  const Matrix s = dictionary_similarity(d);
  EXPECT_EQ((s - s.transpose()).cwiseAbs().maxCoeff(), 0.0);
  for (int c = 1; c <= 4; ++c) EXPECT_NEAR(s(c - 1, c - 1), (d.block(c).transpose() * d.block(c)).norm(), 1e-14);
  Matrix same(3, 2);
  same.col(0) = Vector::Unit(3, 1);
  same.col(1) = Vector::Unit(3, 1);
  const Matrix t = dictionary_similarity(DictionarySet(same, 1));
  EXPECT_DOUBLE_EQ(t(0, 1), 1.0);
}

TEST(Fit, TraceIsMonotoneAndFeasible) {
  Rng rng(8);
  const auto toy = oracle::toy_problem(2, 8, 10, rng);
  const auto h = toy_hyper();
  const DictionarySet d0(oracle::random_unit_columns(8, 6, rng), 3);
  const auto res = fit(toy.X, toy.y, h, d0);
  ASSERT_FALSE(res.trace.records.empty());
  double prev = res.trace.initial_J;
  for (const auto& r : res.trace.records) {
    EXPECT_LE(r.coded_J, prev + 1e-12) << "coding step raised J at iteration " << r.iteration;
    EXPECT_LT(r.objective.J, r.coded_J) << "iteration " << r.iteration;
    EXPECT_NEAR(r.objective.J, r.objective.recomposed(), 1e-12 * std::abs(r.objective.J));
    prev = r.objective.J;
  }
  EXPECT_LE(res.dictionary.max_atom_norm(), 1.0 + 1e-12);
}

TEST(Fit, DefaultsAreAcceptedAndValidated) {
  const HyperParams h;
  EXPECT_EQ(h.iterations, 200);
  EXPECT_DOUBLE_EQ(h.alpha, 0.5);
  EXPECT_DOUBLE_EQ(h.eta0, 1e-3);
  EXPECT_NO_THROW(h.validate());
  HyperParams bad;
  bad.alpha = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = HyperParams{};
  bad.gamma2 = -1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Fit, IncoherenceLowersCrossSimilarity) {
  Rng rng(9);
  const auto toy = oracle::toy_problem(3, 8, 8, rng, 0.2);
  const DictionarySet d0(oracle::random_unit_columns(8, 9, rng), 3);
  auto h = toy_hyper();
  h.gamma2 = 0.0;
  const auto plain = fit(toy.X, toy.y, h, d0);
  h.gamma2 = 0.3;
  const auto incoherent = fit(toy.X, toy.y, h, d0);
  EXPECT_LT(mean_off_diagonal(dictionary_similarity(incoherent.dictionary)),
            mean_off_diagonal(dictionary_similarity(plain.dictionary)));
}

TEST(Fit, DeterministicAcrossJobs) {
  Rng rng(10);
  const auto toy = oracle::toy_problem(2, 6, 9, rng);
  const DictionarySet d0(oracle::random_unit_columns(6, 6, rng), 3);
  auto h = toy_hyper();
  h.iterations = 10;
  const auto a = fit(toy.X, toy.y, h, d0, 1);
  const auto b = fit(toy.X, toy.y, h, d0, 3);
  EXPECT_EQ((a.dictionary.atoms() - b.dictionary.atoms()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Fit, StatusAndErrors) {
  Rng rng(11);
  const auto toy = oracle::toy_problem(2, 6, 5, rng);
  const DictionarySet d0(oracle::random_unit_columns(6, 4, rng), 2);
  auto h = toy_hyper();
  h.atoms_per_class = 2;
  h.iterations = 3;
  const auto res = fit(toy.X, toy.y, h, d0);
  EXPECT_EQ(res.stop_reason, "iteration limit");
  EXPECT_EQ(res.codes.rows(), 4);
  EXPECT_EQ(res.codes.cols(), 10);

  Matrix bad = toy.X;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit(bad, toy.y, h, d0), Error);
  EXPECT_THROW(fit(toy.X.topRows(5), toy.y, h, d0), Error);
  std::vector<int> y = toy.y;
  y[0] = 3;
  EXPECT_THROW(fit(toy.X, y, h, d0), Error);
  const DictionarySet big(Matrix(2.0 * d0.atoms()), 2);
  EXPECT_THROW(fit(toy.X, toy.y, h, big), Error);
}

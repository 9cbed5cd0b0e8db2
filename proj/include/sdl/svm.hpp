#ifndef SDL_SVM_HPP
#define SDL_SVM_HPP

#include "sdl/common.hpp"

namespace sdl {

struct SvmOptions {
  double gap_tol = 1e-4;  // relative duality gap certificate
  int max_epochs = 2000;
  std::uint64_t seed = 0;
};

struct BinarySvm {
  Vector w;
  double b = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  int epochs = 0;
  bool certified = false;

  double decision(const Eigen::Ref<const Vector>& f) const { return w.dot(f) + b; }
};

namespace svm_detail {

// Objective with the bias folded into the regularizer as an extra constant-1
// feature.
inline double primal_objective(const Matrix& F, const std::vector<int>& y, double c,
                               const Vector& w, double b) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < F.cols(); ++i)
    hinge += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * (w.dot(F.col(i)) + b));
  return 0.5 * (w.squaredNorm() + b * b) + c * hinge;
}

}  // namespace svm_detail

/// Hinge-loss linear SVM, one example per column of F, labels +1/-1.
///
/// Dual coordinate descent over the box 0 <= alpha_i <= C in a seeded
/// random order; stops once the relative duality gap is within gap_tol.
/// The primal objective is 0.5 (|w|^2 + b^2) + C sum hinge.
inline BinarySvm train_binary(const Matrix& F, const std::vector<int>& labels, double c_svm,
                              const SvmOptions& opt = {}) {
  require(c_svm > 0.0, "C_svm must be positive");
  require(static_cast<Eigen::Index>(labels.size()) == F.cols(), "label count does not match examples");
  require(F.allFinite(), "non-finite SVM features");
  bool pos = false, neg = false;
  for (int v : labels) {
    require(v == 1 || v == -1, "binary labels must be +1 or -1");
    (v > 0 ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error("degenerate binary problem");

  const auto n = F.cols();
  BinarySvm m;
  m.w = Vector::Zero(F.rows());
  m.b = 0.0;
  Vector alpha = Vector::Zero(n);
  Vector qdiag(n);
  for (Eigen::Index i = 0; i < n; ++i) qdiag(i) = F.col(i).squaredNorm() + 1.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(opt.seed);
  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      const double yi = labels[static_cast<std::size_t>(i)];
      const double grad = yi * (m.w.dot(F.col(i)) + m.b) - 1.0;
      const double a_old = alpha(i);
      const double a_new = std::clamp(a_old - grad / qdiag(i), 0.0, c_svm);
      const double delta = (a_new - a_old) * yi;
      if (delta != 0.0) {
        alpha(i) = a_new;
        m.w.noalias() += delta * F.col(i);
        m.b += delta;
      }
    }
    m.epochs = epoch;
    m.primal = svm_detail::primal_objective(F, labels, c_svm, m.w, m.b);
    m.dual = alpha.sum() - 0.5 * (m.w.squaredNorm() + m.b * m.b);
    if (m.primal - m.dual <= opt.gap_tol * std::max(std::abs(m.primal), 1e-12)) {
      m.certified = true;
      break;
    }
  }
  return m;
}

struct LinearSvmModel {
  Matrix weights;  // C x K, row c-1 is machine c
  Vector biases;   // C
  double c_svm = 1.0;

  int classes() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
};

/// One machine per class, class c against the rest. A class with no
/// positive (or no negative) examples gets a zero-margin machine w = 0,
/// b = -1 (or +1).
inline LinearSvmModel train_ova(const Matrix& F, const std::vector<int>& labels, int classes,
                                double c_svm, const SvmOptions& opt = {}, int jobs = 1) {
  require(classes >= 1, "need at least one class");
  require(static_cast<Eigen::Index>(labels.size()) == F.cols(), "label count does not match examples");
  require(F.cols() >= 1, "no training examples");
  LinearSvmModel model;
  model.c_svm = c_svm;
  model.weights = Matrix::Zero(classes, F.rows());
  model.biases = Vector::Zero(classes);
  parallel_for(static_cast<std::size_t>(classes), jobs, [&](std::size_t ci) {
    const int c = static_cast<int>(ci) + 1;
    std::vector<int> bin(labels.size());
    int npos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      require(labels[i] >= 1 && labels[i] <= classes, "label out of range");
      bin[i] = labels[i] == c ? 1 : -1;
      npos += labels[i] == c;
    }
    const auto row = static_cast<Eigen::Index>(ci);
    if (npos == 0 || npos == static_cast<int>(labels.size())) {
      model.biases(row) = npos == 0 ? -1.0 : 1.0;
      return;
    }
    SvmOptions o = opt;
    o.seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(c)});
    const auto m = train_binary(F, bin, c_svm, o);
    model.weights.row(row) = m.w.transpose();
    model.biases(row) = m.b;
  });
  return model;
}

inline Matrix decision_values(const LinearSvmModel& model, const Matrix& F) {
  require(F.rows() == model.dim(), "feature dimension does not match SVM model");
  return (model.weights * F).colwise() + model.biases;
}

/// argmax over machines; ties go to the smallest class index.
inline std::vector<int> predict_from_scores(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index i = 0; i < scores.cols(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.rows(); ++c)
      if (scores(c, i) > scores(best, i)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return out;
}

inline std::vector<int> predict(const LinearSvmModel& model, const Matrix& F) {
  return predict_from_scores(decision_values(model, F));
}

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  require(truth.size() == pred.size() && !truth.empty(), "accuracy: size mismatch or empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Ten values log-spaced from 1e-3 to 1e2.
inline std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int i = 0; i < 10; ++i) g.push_back(std::pow(10.0, -3.0 + 5.0 * i / 9.0));
  return g;
}

struct HalfSplit {
  std::vector<Eigen::Index> learn;
  std::vector<Eigen::Index> validate;
};

/// Per class, ceil(n_c/2) examples go to the learning half and the rest to
/// validation, after a seeded shuffle.
inline HalfSplit stratified_half_split(const std::vector<int>& labels, int classes, Rng& rng) {
  HalfSplit s;
  for (int c = 1; c <= classes; ++c) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
    rng.shuffle(idx);
    const std::size_t half = (idx.size() + 1) / 2;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < half ? s.learn : s.validate).push_back(idx[i]);
  }
  std::sort(s.learn.begin(), s.learn.end());
  std::sort(s.validate.begin(), s.validate.end());
  return s;
}

inline Matrix select_columns(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
  return out;
}

template <typename T>
std::vector<T> select_items(const std::vector<T>& v, const std::vector<Eigen::Index>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

/// Validation accuracy of every grid value on one learning/validation pair.
inline std::vector<double> c_grid_scores(const Matrix& learn_f, const std::vector<int>& learn_y,
                                         const Matrix& val_f, const std::vector<int>& val_y,
                                         int classes, const std::vector<double>& grid,
                                         const SvmOptions& opt = {}) {
  std::vector<double> acc;
  acc.reserve(grid.size());
  for (double c : grid) {
    const auto model = train_ova(learn_f, learn_y, classes, c, opt);
    acc.push_back(accuracy(val_y, predict(model, val_f)));
  }
  return acc;
}

struct CSelection {
  double best_c = 1.0;
  std::vector<double> grid;
  std::vector<double> mean_accuracy;
};

/// Mean validation accuracy over `resamples` stratified half/half splits for
/// each grid value; the argmax wins, ties toward the smaller C.
inline CSelection select_C(const Matrix& F, const std::vector<int>& labels, int classes,
                           std::vector<double> grid, int resamples, std::uint64_t seed,
                           const SvmOptions& opt = {}) {
  require(!grid.empty(), "C grid is empty");
  require(resamples >= 1, "resample count must be >= 1");
  std::sort(grid.begin(), grid.end());
  CSelection sel;
  sel.grid = grid;
  if (grid.size() == 1) {
    sel.best_c = grid[0];
    sel.mean_accuracy = {std::numeric_limits<double>::quiet_NaN()};
    return sel;
  }
  sel.mean_accuracy.assign(grid.size(), 0.0);
  Rng rng(seed);
  for (int r = 0; r < resamples; ++r) {
    const auto split = stratified_half_split(labels, classes, rng);
    require(!split.learn.empty() && !split.validate.empty(), "too few examples for a validation split");
    const auto acc = c_grid_scores(select_columns(F, split.learn), select_items(labels, split.learn),
                                   select_columns(F, split.validate),
                                   select_items(labels, split.validate), classes, grid, opt);
    for (std::size_t g = 0; g < grid.size(); ++g) sel.mean_accuracy[g] += acc[g] / resamples;
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (sel.mean_accuracy[g] > sel.mean_accuracy[best]) best = g;
  sel.best_c = grid[best];
  return sel;
}

}  // namespace sdl

#endif  // SDL_SVM_HPP

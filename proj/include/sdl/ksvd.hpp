#ifndef SDL_KSVD_HPP
#define SDL_KSVD_HPP

#include "sdl/dictionary_set.hpp"

namespace sdl {

struct KsvdParams {
  int iterations = 10;
  int sparsity = 0;  // max nonzeros per OMP code; 0 means max(1, ceil(K'/4))
  std::uint64_t seed = 0;

  int sparsity_for(int atoms) const {
    const int s = sparsity > 0 ? sparsity : std::max(1, (atoms + 3) / 4);
    require(s <= atoms, "OMP sparsity exceeds the number of atoms");
    return s;
  }
};

/// Orthogonal matching pursuit with a least-squares refit on the active set
/// after every selection. Stops at `sparsity` atoms or residual norm < 1e-10.
inline Vector omp(const Vector& x, const Eigen::Ref<const Matrix>& atoms, int sparsity,
                  std::vector<int>* support_out = nullptr) {
  require(x.size() == atoms.rows(), "omp: dimension mismatch");
  require(sparsity >= 0, "omp: negative sparsity");
  const auto k = atoms.cols();
  Vector code = Vector::Zero(k);
  std::vector<int> support;
  std::vector<char> used(static_cast<std::size_t>(k), 0);
  Vector residual = x;
  while (static_cast<int>(support.size()) < std::min<int>(sparsity, static_cast<int>(k)) &&
         residual.norm() >= 1e-10) {
    const Vector corr = atoms.transpose() * residual;
    int best = -1;
    double best_abs = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (used[j]) continue;
      const double v = std::abs(corr(j));
      if (v > best_abs) {
        best_abs = v;
        best = static_cast<int>(j);
      }
    }
    if (best < 0 || best_abs <= 1e-14) break;
    used[best] = 1;
    support.push_back(best);

    Matrix sub(atoms.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = atoms.col(support[i]);
    const Vector coef = sub.colPivHouseholderQr().solve(x);
    residual = x - sub * coef;
    code.setZero();
    for (std::size_t i = 0; i < support.size(); ++i) code(support[i]) = coef(static_cast<Eigen::Index>(i));
  }
  if (support_out) *support_out = support;
  return code;
}

struct KsvdResult {
  Matrix atoms;                // M x K', unit-norm columns
  std::vector<double> errors;  // sum |x - D a|^2 after each iteration
  Matrix codes;                // K' x n
};

namespace ksvd_detail {

inline Vector random_unit(int m, Rng& rng) {
  Vector v(m);
  double n = 0.0;
  do {
    for (int i = 0; i < m; ++i) v(i) = rng.normal();
    n = v.norm();
  } while (n == 0.0);
  return v / n;
}

// Largest-magnitude entry made positive; coefficients flip with the atom.
inline void fix_sign(Eigen::Ref<Vector> atom, Eigen::Ref<Vector> coef) {
  Eigen::Index idx;
  atom.cwiseAbs().maxCoeff(&idx);
  if (atom(idx) < 0.0) {
    atom = -atom;
    coef = -coef;
  }
}

}  // namespace ksvd_detail

/// Seeded starting atoms: distinct normalized signals, then random unit
/// vectors when the class has fewer usable signals than atoms.
inline Matrix ksvd_initial_atoms(const Matrix& signals, int atoms, Rng& rng) {
  const int m = static_cast<int>(signals.rows());
  std::vector<int> order(static_cast<std::size_t>(signals.cols()));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Matrix d(m, atoms);
  int filled = 0;
  for (int idx : order) {
    if (filled == atoms) break;
    const double n = signals.col(idx).norm();
    if (n <= 1e-12) continue;
    d.col(filled++) = signals.col(idx) / n;
  }
  for (; filled < atoms; ++filled) d.col(filled) = ksvd_detail::random_unit(m, rng);
  return d;
}

inline double reconstruction_error(const Matrix& signals, const Matrix& atoms, const Matrix& codes) {
  return (signals - atoms * codes).squaredNorm();
}

/// K-SVD on the signals of one class (one per column).
///
/// A recomputed OMP code replaces the previous one only when it reconstructs
/// the signal at least as well, so the error trace is non-increasing.
inline KsvdResult ksvd_class(const Matrix& signals, int atoms, const KsvdParams& params) {
  require(signals.cols() >= 1, "ksvd: empty class");
  require(atoms >= 1, "ksvd: need at least one atom");
  require(params.iterations >= 1, "ksvd: iterations must be >= 1");
  require(signals.allFinite(), "ksvd: non-finite signals");
  const int sparsity = params.sparsity_for(atoms);
  const auto n = signals.cols();

  Rng rng(params.seed);
  KsvdResult res;
  res.atoms = ksvd_initial_atoms(signals, atoms, rng);
  res.codes = Matrix::Zero(atoms, n);
  bool have_codes = false;

  for (int it = 0; it < params.iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector fresh = omp(signals.col(i), res.atoms, sparsity);
      if (!have_codes) {
        res.codes.col(i) = fresh;
        continue;
      }
      const double old_err = (signals.col(i) - res.atoms * res.codes.col(i)).squaredNorm();
      const double new_err = (signals.col(i) - res.atoms * fresh).squaredNorm();
      if (new_err <= old_err) res.codes.col(i) = fresh;
    }
    have_codes = true;

    for (int k = 0; k < atoms; ++k) {
      std::vector<Eigen::Index> users;
      for (Eigen::Index i = 0; i < n; ++i)
        if (res.codes(k, i) != 0.0) users.push_back(i);

      if (users.empty()) {
        // Re-seed an unused atom with the worst-reconstructed signal.
        const Vector errs = (signals - res.atoms * res.codes).colwise().squaredNorm().transpose();
        Eigen::Index worst;
        const double worst_err = errs.maxCoeff(&worst);
        if (worst_err > 1e-20) res.atoms.col(k) = (signals - res.atoms * res.codes).col(worst).normalized();
        Vector dummy = Vector::Zero(1);
        ksvd_detail::fix_sign(res.atoms.col(k), dummy);
        continue;
      }

      const auto u = static_cast<Eigen::Index>(users.size());
      Matrix E(signals.rows(), u);
      Vector coef_old(u);
      for (Eigen::Index j = 0; j < u; ++j) {
        const auto i = users[static_cast<std::size_t>(j)];
        coef_old(j) = res.codes(k, i);
        E.col(j) = signals.col(i) - res.atoms * res.codes.col(i) + res.atoms.col(k) * coef_old(j);
      }

      // Power iteration for the dominant left singular vector of E, started
      // at the current atom.
      Vector dir = res.atoms.col(k);
      for (int p = 0; p < 50; ++p) {
        const Vector w = E * (E.transpose() * dir);
        const double wn = w.norm();
        if (wn <= 1e-300) break;
        const Vector nd = w / wn;
        const double change = (nd - dir).norm();
        dir = nd;
        if (change < 1e-10) break;
      }
      Vector coef = E.transpose() * dir;
      ksvd_detail::fix_sign(dir, coef);
      res.atoms.col(k) = dir;
      for (Eigen::Index j = 0; j < u; ++j) res.codes(k, users[static_cast<std::size_t>(j)]) = coef(j);
    }
    res.errors.push_back(reconstruction_error(signals, res.atoms, res.codes));
  }
  return res;
}

/// One K-SVD dictionary per class; X holds one signal per column and every
/// class 1..C must occur in y.
inline DictionarySet init_class_dictionaries(const Matrix& X, const std::vector<int>& y, int classes,
                                             int atoms_per_class, const KsvdParams& params,
                                             int jobs = 1) {
  require(classes >= 1, "need at least one class");
  require(static_cast<Eigen::Index>(y.size()) == X.cols(), "label count does not match signals");
  check_labels(y, classes);
  std::vector<Matrix> blocks(static_cast<std::size_t>(classes));
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(classes));
  for (Eigen::Index n = 0; n < X.cols(); ++n) members[static_cast<std::size_t>(y[n] - 1)].push_back(n);
  for (int c = 0; c < classes; ++c)
    require(!members[c].empty(), "class " + std::to_string(c + 1) + " has no signals");

  parallel_for(static_cast<std::size_t>(classes), jobs, [&](std::size_t c) {
    Matrix sig(X.rows(), static_cast<Eigen::Index>(members[c].size()));
    for (std::size_t i = 0; i < members[c].size(); ++i) sig.col(static_cast<Eigen::Index>(i)) = X.col(members[c][i]);
    KsvdParams p = params;
    p.seed = derive_seed(params.seed, {0x6b737664ULL, static_cast<std::uint64_t>(c + 1)});
    blocks[c] = ksvd_class(sig, atoms_per_class, p).atoms;
  });
  return DictionarySet::from_blocks(blocks);
}

}  // namespace sdl

#endif  // SDL_KSVD_HPP

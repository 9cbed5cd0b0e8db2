#ifndef SDL_DICTIONARY_LEARNING_HPP
#define SDL_DICTIONARY_LEARNING_HPP

#include <limits>
#include <string>

#include "sdl/sparse_coding.hpp"

namespace sdl {

struct HyperParams {
  double mu = 1.0;
  double lambda = 0.1;
  double gamma1 = 0.1;
  double gamma2 = 0.1;
  int atoms_per_class = 10;
  int iterations = 200;
  double alpha = 0.5;
  double eta0 = 1e-3;
  int max_sweeps = 1000;
  double coding_tol = 1e-6;
  int backtrack_cap = 50;
  bool early_stop = true;
  double stall_tol = 1e-7;
  int stall_patience = 5;

  void validate() const {
    require(mu >= 0.0 && lambda >= 0.0 && gamma1 >= 0.0 && gamma2 >= 0.0,
            "objective weights must be non-negative");
    require(atoms_per_class >= 1, "atoms_per_class must be >= 1");
    require(iterations >= 1, "iterations must be >= 1");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(eta0 > 0.0, "eta0 must be positive");
    require(max_sweeps >= 1 && coding_tol > 0.0, "invalid coding tolerances");
    require(backtrack_cap >= 1, "backtrack_cap must be >= 1");
  }

  CodingParams coding() const {
    CodingParams p;
    p.lambda = lambda;
    p.mu = mu;
    p.gamma1 = gamma1;
    p.max_sweeps = max_sweeps;
    p.tol = coding_tol;
    return p;
  }
};

struct ObjectiveBreakdown {
  double J = 0.0;
  double J1 = 0.0;  // global reconstruction
  double J2 = 0.0;  // own-class reconstruction
  double J3 = 0.0;  // l1 of codes
  double J4 = 0.0;  // off-class code energy
  double J5 = 0.0;  // cross-block coherence, both orders
  double mu = 0.0, lambda = 0.0, gamma1 = 0.0, gamma2 = 0.0;

  double recomposed() const { return J1 + mu * J2 + lambda * J3 + gamma1 * J4 + gamma2 * J5; }
};

struct FitRecord {
  int iteration = 0;
  ObjectiveBreakdown objective;  // J(D^t, A^t)
  double coded_J = 0.0;          // J(D^{t-1}, A^t), after the coding step
  double step = 0.0;
  int backtracks = 0;
  double kkt_max = 0.0;
  int unconverged_codes = 0;
};

struct FitTrace {
  std::vector<FitRecord> records;
  double initial_J = std::numeric_limits<double>::quiet_NaN();  // J(D^0, A^1)
};

struct FitResult {
  DictionarySet dictionary;
  Matrix codes;  // K x N, the codes of the last coding step
  FitTrace trace;
  bool converged = false;
  std::string stop_reason;
};

namespace dl_detail {

inline void check_problem(const DictionarySet& d, const Matrix& A, const Matrix& X,
                          const std::vector<int>& y) {
  require(X.rows() == d.dim(), "feature dimension does not match dictionary");
  require(A.rows() == d.total_atoms(), "code length does not match dictionary");
  require(A.cols() == X.cols(), "code count does not match signal count");
  require(static_cast<Eigen::Index>(y.size()) == X.cols(), "label count does not match signal count");
  check_labels(y, d.classes());
}

/// Cross-block coherence: sum over ordered pairs c != c' of |D_c^T D_c'|_F^2.
inline double cross_coherence(const DictionarySet& d) {
  const Matrix gram = d.atoms().transpose() * d.atoms();
  double total = gram.squaredNorm();
  const int kp = d.block_size();
  for (int c = 0; c < d.classes(); ++c) total -= gram.block(c * kp, c * kp, kp, kp).squaredNorm();
  return std::max(total, 0.0);
}

}  // namespace dl_detail

inline ObjectiveBreakdown objective_terms(const DictionarySet& d, const Matrix& A, const Matrix& X,
                                          const std::vector<int>& y, const HyperParams& h) {
  dl_detail::check_problem(d, A, X, y);
  ObjectiveBreakdown ob;
  ob.mu = h.mu;
  ob.lambda = h.lambda;
  ob.gamma1 = h.gamma1;
  ob.gamma2 = h.gamma2;
  ob.J1 = (X - d.atoms() * A).squaredNorm();
  ob.J3 = A.cwiseAbs().sum();
  const int kp = d.block_size();
  for (Eigen::Index n = 0; n < X.cols(); ++n) {
    const int c0 = d.block_start(y[n]);
    const auto own = A.col(n).segment(c0, kp);
    ob.J2 += (X.col(n) - d.block(y[n]) * own).squaredNorm();
    ob.J4 += A.col(n).squaredNorm() - own.squaredNorm();
  }
  ob.J5 = dl_detail::cross_coherence(d);
  ob.J = ob.recomposed();
  return ob;
}

/// Gradient of J1 + mu J2 + gamma2 J5 with respect to block `label`,
/// written term by term with x~_n = x_n - sum_{c != p} D_c a_nc.
inline Matrix grad_dictionary(int label, const DictionarySet& d, const Matrix& A, const Matrix& X,
                              const std::vector<int>& y, const HyperParams& h) {
  dl_detail::check_problem(d, A, X, y);
  const int kp = d.block_size();
  const int p0 = d.block_start(label);
  const auto Dp = d.block(label);
  Matrix g = Matrix::Zero(d.dim(), kp);
  for (Eigen::Index n = 0; n < X.cols(); ++n) {
    const Vector anp = A.col(n).segment(p0, kp);
    Vector x_tilde = X.col(n);
    for (int c = 1; c <= d.classes(); ++c) {
      if (c == label) continue;
      x_tilde -= d.block(c) * A.col(n).segment(d.block_start(c), kp);
    }
    const Vector Dp_a = Dp * anp;
    g += -2.0 * x_tilde * anp.transpose() + 2.0 * Dp_a * anp.transpose();
    if (y[n] == label) g += h.mu * (-2.0 * X.col(n) * anp.transpose() + 2.0 * Dp_a * anp.transpose());
  }
  if (h.gamma2 != 0.0) {
    for (int c = 1; c <= d.classes(); ++c) {
      if (c == label) continue;
      const auto Dc = d.block(c);
      g += h.gamma2 * 4.0 * (Dc * (Dc.transpose() * Dp));
    }
  }
  return g;
}

/// Gradient for all blocks at once (M x K), via the global residual.
/// Equal to stacking grad_dictionary over every class.
inline Matrix full_gradient(const DictionarySet& d, const Matrix& A, const Matrix& X,
                            const std::vector<int>& y, const HyperParams& h) {
  dl_detail::check_problem(d, A, X, y);
  const auto& D = d.atoms();
  const int kp = d.block_size();
  const Matrix residual = X - D * A;
  Matrix g = -2.0 * residual * A.transpose();
  if (h.mu != 0.0) {
    for (int c = 1; c <= d.classes(); ++c) {
      std::vector<Eigen::Index> members;
      for (Eigen::Index n = 0; n < X.cols(); ++n)
        if (y[n] == c) members.push_back(n);
      if (members.empty()) continue;
      const int c0 = d.block_start(c);
      Matrix Xc(X.rows(), static_cast<Eigen::Index>(members.size()));
      Matrix Ac(kp, static_cast<Eigen::Index>(members.size()));
      for (std::size_t i = 0; i < members.size(); ++i) {
        Xc.col(static_cast<Eigen::Index>(i)) = X.col(members[i]);
        Ac.col(static_cast<Eigen::Index>(i)) = A.col(members[i]).segment(c0, kp);
      }
      const Matrix own_residual = Xc - d.block(c) * Ac;
      g.middleCols(c0, kp) += -2.0 * h.mu * own_residual * Ac.transpose();
    }
  }
  if (h.gamma2 != 0.0) {
    const Matrix ddt = D * D.transpose();
    for (int c = 1; c <= d.classes(); ++c) {
      const auto Dc = d.block(c);
      const Matrix others = ddt * Dc - Dc * (Dc.transpose() * Dc);
      g.middleCols(d.block_start(c), kp) += 4.0 * h.gamma2 * others;
    }
  }
  return g;
}

/// Atoms with norm above one are rescaled to unit norm; others are kept.
inline Matrix prox_unit_columns(Matrix atoms) {
  require(atoms.allFinite(), "prox: non-finite dictionary entries");
  for (Eigen::Index k = 0; k < atoms.cols(); ++k) {
    const double n = atoms.col(k).norm();
    if (n > 1.0) atoms.col(k) /= n;
  }
  return atoms;
}

inline DictionarySet prox_unit_columns(const DictionarySet& d) {
  return DictionarySet(prox_unit_columns(d.atoms()), d.block_size());
}

/// S[c][c'] = |D_c^T D_c'|_F.
inline Matrix dictionary_similarity(const DictionarySet& d) {
  const int C = d.classes();
  Matrix s(C, C);
  for (int a = 1; a <= C; ++a)
    for (int b = a; b <= C; ++b) {
      const double v = (d.block(a).transpose() * d.block(b)).norm();
      s(a - 1, b - 1) = v;
      s(b - 1, a - 1) = v;
    }
  return s;
}

inline double mean_off_diagonal(const Matrix& s) {
  const auto C = s.rows();
  if (C < 2) return 0.0;
  return (s.sum() - s.trace()) / static_cast<double>(C * (C - 1));
}

/// Alternating minimization: supervised coding of every signal against
/// D^{t-1}, then one projected gradient step on all blocks with
/// backtracking until J(D^t, A^t) < J(D^{t-1}, A^t).
///
/// X holds one signal per column, y the labels 1..C.
inline FitResult fit(const Matrix& X, const std::vector<int>& y, const HyperParams& h,
                     const DictionarySet& d0, int jobs = 1) {
  h.validate();
  require(X.cols() >= 1, "fit needs at least one signal");
  require(X.allFinite(), "fit: non-finite features");
  require(d0.max_atom_norm() <= 1.0 + 1e-9, "initial dictionary violates the atom norm bound");

  FitResult res;
  res.dictionary = d0;
  res.codes = Matrix::Zero(d0.total_atoms(), X.cols());
  dl_detail::check_problem(d0, res.codes, X, y);
  const CodingParams cp = h.coding();

  int stalled = 0;
  double last_J = std::numeric_limits<double>::quiet_NaN();
  for (int t = 1; t <= h.iterations; ++t) {
    auto& D = res.dictionary;
    std::vector<double> kkt(static_cast<std::size_t>(X.cols()));
    std::vector<char> ok(static_cast<std::size_t>(X.cols()));
    {
      const Coder coder(D);
      parallel_for(static_cast<std::size_t>(X.cols()), jobs, [&](std::size_t n) {
        const auto i = static_cast<Eigen::Index>(n);
        const Vector warm = res.codes.col(i);
        auto r = coder.solve(X.col(i), y[n], cp, &warm);
        res.codes.col(i) = r.code;
        kkt[n] = r.kkt;
        ok[n] = r.converged;
      });
    }
    const auto& A = res.codes;
    const double coded_J = objective_terms(D, A, X, y, h).J;
    if (!std::isfinite(coded_J))
      throw Error("fit: non-finite objective after coding at iteration " + std::to_string(t));
    if (t == 1) res.trace.initial_J = coded_J;

    const Matrix G = full_gradient(D, A, X, y, h);
    double eta = h.eta0;
    bool accepted = false;
    int backtracks = 0;
    DictionarySet next;
    ObjectiveBreakdown next_obj;
    double used_eta = eta;
    for (; backtracks < h.backtrack_cap; ++backtracks) {
      next = DictionarySet(prox_unit_columns(Matrix(D.atoms() - eta * G)), D.block_size());
      next_obj = objective_terms(next, A, X, y, h);
      if (!std::isfinite(next_obj.J))
        throw Error("fit: non-finite objective in line search at iteration " + std::to_string(t));
      used_eta = eta;
      eta *= h.alpha;
      if (next_obj.J < coded_J) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      res.stop_reason = "line search found no descent step";
      break;
    }

    FitRecord rec;
    rec.iteration = t;
    rec.objective = next_obj;
    rec.coded_J = coded_J;
    rec.step = used_eta;
    rec.backtracks = backtracks;
    rec.kkt_max = *std::max_element(kkt.begin(), kkt.end());
    rec.unconverged_codes = static_cast<int>(std::count(ok.begin(), ok.end(), 0));
    res.trace.records.push_back(rec);
    D = std::move(next);

    if (h.early_stop && std::isfinite(last_J)) {
      const double rel = (last_J - next_obj.J) / std::max(std::abs(last_J), 1e-300);
      stalled = rel < h.stall_tol ? stalled + 1 : 0;
      if (stalled >= h.stall_patience) {
        res.converged = true;
        res.stop_reason = "relative decrease stalled";
        break;
      }
    }
    last_J = next_obj.J;
  }
  if (res.stop_reason.empty()) res.stop_reason = "iteration limit";
  return res;
}

}  // namespace sdl

#endif  // SDL_DICTIONARY_LEARNING_HPP

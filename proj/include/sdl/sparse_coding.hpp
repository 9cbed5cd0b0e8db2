#ifndef SDL_SPARSE_CODING_HPP
#define SDL_SPARSE_CODING_HPP

#include "sdl/dictionary_set.hpp"

namespace sdl {

/// Weights of the per-signal coding problem
///   F(a) = |x - Da|^2 + mu |x - D_c a_c|^2 + gamma1 (|a|^2 - |a_c|^2) + lambda |a|_1
/// where c is the signal's class.
struct CodingParams {
  double lambda = 0.1;
  double mu = 1.0;
  double gamma1 = 0.0;
  int max_sweeps = 1000;
  double tol = 1e-6;
  bool record_objective = false;

  void validate() const {
    require(lambda >= 0.0 && mu >= 0.0 && gamma1 >= 0.0, "coding weights must be non-negative");
    require(tol > 0.0, "coding tolerance must be positive");
    require(max_sweeps >= 1, "max_sweeps must be >= 1");
  }
};

/// Label value meaning "no class term" (plain Lasso).
inline constexpr int kNoLabel = 0;

struct CodingResult {
  Vector code;
  bool converged = false;  // false means "tolerance not met"; code is the last iterate
  int sweeps = 0;
  double kkt = 0.0;
  std::vector<double> objective_trace;  // F after each sweep, if requested
};

namespace coding_detail {

struct Block {
  int lo = 0;
  int hi = 0;  // empty when lo == hi
  bool contains(int j) const { return j >= lo && j < hi; }
};

inline Block block_for(const DictionarySet& d, int label) {
  if (label == kNoLabel) return {};
  const int lo = d.block_start(label);
  return {lo, lo + d.block_size()};
}

}  // namespace coding_detail

/// Evaluates F(a) directly from its definition.
inline double coding_objective(const Vector& x, const DictionarySet& d, int label,
                               const CodingParams& p, const Vector& a) {
  const auto blk = coding_detail::block_for(d, label);
  double f = (x - d.atoms() * a).squaredNorm() + p.lambda * a.lpNorm<1>();
  if (label != kNoLabel) {
    const int n = blk.hi - blk.lo;
    const Vector ac = a.segment(blk.lo, n);
    f += p.mu * (x - d.atoms().middleCols(blk.lo, n) * ac).squaredNorm();
    f += p.gamma1 * (a.squaredNorm() - ac.squaredNorm());
  }
  return f;
}

/// Gradient of the smooth part of F, computed directly.
inline Vector coding_smooth_gradient(const Vector& x, const DictionarySet& d, int label,
                                     const CodingParams& p, const Vector& a) {
  const auto& D = d.atoms();
  Vector g = -2.0 * D.transpose() * (x - D * a);
  if (label != kNoLabel) {
    const auto blk = coding_detail::block_for(d, label);
    const int n = blk.hi - blk.lo;
    const auto Dc = D.middleCols(blk.lo, n);
    g.segment(blk.lo, n) -= 2.0 * p.mu * (Dc.transpose() * (x - Dc * a.segment(blk.lo, n)));
    for (int j = 0; j < g.size(); ++j)
      if (!blk.contains(j)) g(j) += 2.0 * p.gamma1 * a(j);
  }
  return g;
}

inline double kkt_from_gradient(const Vector& g, const Vector& a, double lambda) {
  double worst = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    const double v = a(j) == 0.0 ? std::max(0.0, std::abs(g(j)) - lambda)
                                 : std::abs(g(j) + lambda * (a(j) > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

/// Largest violation of the first-order optimality conditions of F at a.
/// Zero iff a is optimal.
inline double kkt_residual(const Vector& x, const DictionarySet& d, const Vector& a, int label,
                           const CodingParams& p) {
  require(x.size() == d.dim() && a.size() == d.total_atoms(), "kkt_residual: dimension mismatch");
  return kkt_from_gradient(coding_smooth_gradient(x, d, label, p, a), a, p.lambda);
}

/// Cyclic coordinate descent on F with exact soft-threshold updates.
///
/// The Gram matrix of the dictionary is computed once at construction, so
/// one Coder should be shared by all signals coded against the same D.
/// Coding is read-only on the Coder and may run concurrently.
class Coder {
 public:
  explicit Coder(const DictionarySet& dict)
      : dict_(&dict), gram_(dict.atoms().transpose() * dict.atoms()) {}

  const DictionarySet& dictionary() const { return *dict_; }

  CodingResult solve(const Vector& x, int label, const CodingParams& params,
                     const Vector* warm_start = nullptr) const {
    params.validate();
    const auto& d = *dict_;
    require(x.size() == d.dim(), "signal length does not match dictionary dimension");
    require(x.allFinite(), "signal has non-finite entries");
    const int k = d.total_atoms();
    const auto blk = coding_detail::block_for(d, label);
    const double mu = label == kNoLabel ? 0.0 : params.mu;
    const double gamma1 = label == kNoLabel ? 0.0 : params.gamma1;
    const double lambda = params.lambda;

    // Smooth part is a^T H a / 2 - b^T a + const.
    Vector b = 2.0 * (d.atoms().transpose() * x);
    if (blk.hi > blk.lo) b.segment(blk.lo, blk.hi - blk.lo) *= (1.0 + mu);

    auto h_diag = [&](int j) {
      double q = 2.0 * gram_(j, j) * (blk.contains(j) ? 1.0 + mu : 1.0);
      if (!blk.contains(j)) q += 2.0 * gamma1;
      return q;
    };
    auto add_column = [&](Vector& g, int j, double delta) {
      g.noalias() += (2.0 * delta) * gram_.col(j);
      if (blk.contains(j)) {
        g.segment(blk.lo, blk.hi - blk.lo) += (2.0 * mu * delta) * gram_.col(j).segment(blk.lo, blk.hi - blk.lo);
      } else {
        g(j) += 2.0 * gamma1 * delta;
      }
    };
    auto exact_gradient = [&](const Vector& a) {
      Vector g = 2.0 * (gram_ * a);
      if (blk.hi > blk.lo) {
        const int n = blk.hi - blk.lo;
        g.segment(blk.lo, n) += 2.0 * mu * (gram_.block(blk.lo, blk.lo, n, n) * a.segment(blk.lo, n));
      }
      for (int j = 0; j < k; ++j)
        if (!blk.contains(j)) g(j) += 2.0 * gamma1 * a(j);
      return Vector(g - b);
    };

    CodingResult res;
    if (warm_start) {
      require(warm_start->size() == k && warm_start->allFinite(), "invalid warm start");
      res.code = *warm_start;
    } else {
      res.code = Vector::Zero(k);
    }
    Vector& a = res.code;
    Vector g = exact_gradient(a);

    CodingParams obj_params = params;
    obj_params.mu = mu;
    obj_params.gamma1 = gamma1;

    res.kkt = kkt_from_gradient(g, a, lambda);
    if (res.kkt <= params.tol) {
      res.converged = true;
      return res;
    }
    for (int sweep = 1; sweep <= params.max_sweeps; ++sweep) {
      for (int j = 0; j < k; ++j) {
        const double q = h_diag(j);
        const double rho = q * a(j) - g(j);
        const double next = q > 0.0 ? soft_threshold(rho, lambda) / q : 0.0;
        const double delta = next - a(j);
        if (delta != 0.0) {
          add_column(g, j, delta);
          a(j) = next;
        }
      }
      res.sweeps = sweep;
      if (params.record_objective)
        res.objective_trace.push_back(coding_objective(x, d, label, obj_params, a));
      if (kkt_from_gradient(g, a, lambda) <= params.tol) {
        g = exact_gradient(a);  // discard accumulated drift before certifying
        res.kkt = kkt_from_gradient(g, a, lambda);
        if (res.kkt <= params.tol) {
          res.converged = true;
          return res;
        }
      }
    }
    g = exact_gradient(a);
    res.kkt = kkt_from_gradient(g, a, lambda);
    res.converged = res.kkt <= params.tol;
    return res;
  }

 private:
  const DictionarySet* dict_;
  Matrix gram_;
};

inline CodingResult code_supervised(const Vector& x, const DictionarySet& d, int label,
                                    const CodingParams& p, const Vector* warm_start = nullptr) {
  require(label >= 1 && label <= d.classes(), "class label out of range");
  return Coder(d).solve(x, label, p, warm_start);
}

inline CodingResult code_unsupervised(const Vector& x, const DictionarySet& d, double lambda,
                                      int max_sweeps = 1000, double tol = 1e-6) {
  CodingParams p;
  p.lambda = lambda;
  p.mu = 0.0;
  p.gamma1 = 0.0;
  p.max_sweeps = max_sweeps;
  p.tol = tol;
  return Coder(d).solve(x, kNoLabel, p);
}

/// Lasso codes for every column of X, one column of the result per signal.
inline Matrix encode_all(const Matrix& X, const DictionarySet& d, double lambda, int jobs = 1,
                         int max_sweeps = 1000, double tol = 1e-6) {
  require(X.rows() == d.dim(), "feature dimension does not match dictionary");
  CodingParams p;
  p.lambda = lambda;
  p.mu = 0.0;
  p.max_sweeps = max_sweeps;
  p.tol = tol;
  const Coder coder(d);
  Matrix codes(d.total_atoms(), X.cols());
  parallel_for(static_cast<std::size_t>(X.cols()), jobs, [&](std::size_t n) {
    const auto i = static_cast<Eigen::Index>(n);
    codes.col(i) = coder.solve(X.col(i), kNoLabel, p).code;
  });
  return codes;
}

}  // namespace sdl

#endif  // SDL_SPARSE_CODING_HPP

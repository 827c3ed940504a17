#pragma once
// Tolerance-aware subspace algebra: nullspaces, intersections, maximal
// invariant subspaces, projectors and the action of the matrix exponential.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "saddleflow/errors.hpp"

namespace saddleflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace detail {

/// max |x_ij|, 0 for an empty object.
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& x) {
  return x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
}

inline bool all_finite(const Mat& M) { return M.allFinite(); }

inline void require_finite(const Mat& M, const char* what) {
  if (!all_finite(M)) throw InputError(std::string(what) + ": non-finite entries");
}

// Singular values padded with zeros to the number of columns, paired with
// the full right singular basis.
struct RightSvd {
  Vec sigma;
  Mat V;
};

inline RightSvd right_svd(const Mat& M) {
  const Index cols = M.cols();
  RightSvd out{Vec::Zero(cols), Mat::Identity(cols, cols)};
  if (M.rows() == 0 || cols == 0) return out;
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  out.sigma.head(s.size()) = s;
  out.V = svd.matrixV();
  return out;
}

}  // namespace detail

/// Default relative rank threshold for an r x c matrix.
inline double default_rank_tol(Index rows, Index cols) {
  return 1e-10 * static_cast<double>(std::max<Index>({rows, cols, 1}));
}

/// Linear subspace of R^d stored through an orthonormal basis (d x k).
/// The zero subspace has an empty (d x 0) basis.
class Subspace {
 public:
  Subspace() = default;

  /// Zero subspace of R^d.
  explicit Subspace(Index ambient_dim) : basis_(ambient_dim, 0) {
    if (ambient_dim <= 0) throw InputError("Subspace: ambient dimension must be positive");
  }

  static Subspace zero(Index ambient_dim) { return Subspace(ambient_dim); }

  static Subspace full(Index ambient_dim) {
    Subspace s(ambient_dim);
    s.basis_ = Mat::Identity(ambient_dim, ambient_dim);
    return s;
  }

  /// Orthonormal basis of the column span of `vectors` (rank-revealing SVD).
  static Subspace span(const Mat& vectors, std::optional<double> rel_tol = std::nullopt) {
    detail::require_finite(vectors, "Subspace::span");
    Subspace s(vectors.rows());
    if (vectors.cols() == 0) return s;
    Eigen::JacobiSVD<Mat> svd(vectors, Eigen::ComputeThinU);
    const Vec& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return s;
    const double tol = rel_tol.value_or(default_rank_tol(vectors.rows(), vectors.cols())) * sv(0);
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    s.basis_ = svd.matrixU().leftCols(rank);
    return s;
  }

  /// Wraps a basis already known to be orthonormal (checked to 1e-10).
  static Subspace from_orthonormal(Mat basis) {
    detail::require_finite(basis, "Subspace::from_orthonormal");
    Subspace s(basis.rows());
    if (basis.cols() > basis.rows()) throw InputError("Subspace: more basis vectors than ambient dimension");
    const Mat gram = basis.transpose() * basis;
    if (detail::max_abs(gram - Mat::Identity(basis.cols(), basis.cols())) > 1e-10)
      throw InputError("Subspace: basis is not orthonormal");
    s.basis_ = std::move(basis);
    return s;
  }

  Index ambient_dim() const { return basis_.rows(); }
  Index dim() const { return basis_.cols(); }
  bool is_zero() const { return dim() == 0; }
  bool is_full() const { return dim() == ambient_dim(); }
  const Mat& basis() const { return basis_; }

  Mat projector() const { return basis_ * basis_.transpose(); }

  Subspace complement() const {
    const Index d = ambient_dim();
    Subspace s(d);
    if (dim() == 0) return full(d);
    if (dim() == d) return s;
    // Columns of the full U beyond k span the orthogonal complement.
    Eigen::JacobiSVD<Mat> svd(basis_, Eigen::ComputeFullU);
    s.basis_ = svd.matrixU().rightCols(d - dim());
    return s;
  }

  Vec project(const Vec& v) const { return basis_ * (basis_.transpose() * v); }

  bool contains(const Vec& v, double tol = 1e-8) const {
    return (v - project(v)).norm() <= tol * std::max(1.0, v.norm());
  }

  /// Subspace ordering through projectors: |(I - P_other) P_this| < tol.
  bool is_subset_of(const Subspace& other, double tol = 1e-8) const {
    if (other.ambient_dim() != ambient_dim()) throw InputError("Subspace: dimension mismatch");
    if (dim() == 0) return true;
    const Mat residual = basis_ - other.basis_ * (other.basis_.transpose() * basis_);
    return residual.norm() < tol;
  }

  bool equals(const Subspace& other, double tol = 1e-8) const;

 private:
  Mat basis_;
};

/// Operator 2-norm distance between orthogonal projectors.
inline double projector_distance(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim() != b.ambient_dim()) throw InputError("projector_distance: dimension mismatch");
  const Mat diff = a.projector() - b.projector();
  if (diff.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool Subspace::equals(const Subspace& other, double tol) const {
  return projector_distance(*this, other) < tol;
}

inline Mat projector(const Subspace& s) { return s.projector(); }

namespace detail {

// Cut-off is rel_tol * max(sigma_max, floor). Callers whose matrix has a
// known natural scale pass it as floor, so a numerically vanishing matrix
// is not measured against its own rounding noise.
inline Subspace nullspace_scaled(const Mat& M, std::optional<double> rel_tol, double floor) {
  require_finite(M, "nullspace");
  const Index cols = M.cols();
  if (cols == 0) throw InputError("nullspace: matrix has no columns");
  const auto svd = right_svd(M);
  const double smax = svd.sigma.size() ? svd.sigma.maxCoeff() : 0.0;
  if (smax == 0.0) return Subspace::full(cols);
  const double cut = rel_tol.value_or(default_rank_tol(M.rows(), cols)) * std::max(smax, floor);
  std::vector<Index> keep;
  for (Index i = 0; i < cols; ++i)
    if (svd.sigma(i) <= cut) keep.push_back(i);
  Mat basis(cols, static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) basis.col(static_cast<Index>(j)) = svd.V.col(keep[j]);
  return Subspace::from_orthonormal(std::move(basis));
}

}  // namespace detail

/// Right nullspace: span of right singular vectors whose singular value is at
/// most rel_tol * sigma_max (the whole space when M vanishes).
inline Subspace nullspace(const Mat& M, std::optional<double> rel_tol = std::nullopt) {
  return detail::nullspace_scaled(M, rel_tol, 0.0);
}

/// S1 ∩ S2 as the nullspace of the stacked complementary projectors.
inline Subspace intersect(const Subspace& a, const Subspace& b, std::optional<double> rel_tol = std::nullopt) {
  if (a.ambient_dim() != b.ambient_dim()) throw InputError("intersect: dimension mismatch");
  const Index d = a.ambient_dim();
  if (a.is_full()) return b;
  if (b.is_full()) return a;
  if (a.is_zero() || b.is_zero()) return Subspace::zero(d);
  Mat stacked(2 * d, d);
  stacked.topRows(d) = Mat::Identity(d, d) - a.projector();
  stacked.bottomRows(d) = Mat::Identity(d, d) - b.projector();
  return detail::nullspace_scaled(stacked, rel_tol, 1.0);
}

/// Diagnostics of the invariant-subspace fixpoint.
struct InvariantTrace {
  std::vector<Index> dims;  ///< dim V_0, dim V_1, ... (last entry is the fixpoint)
  int iterations = 0;
};

/// Largest A-invariant subspace contained in X, through the fixpoint
/// V_0 = X, V_{k+1} = V_k ∩ A^{-1}(V_k). The preimage step never inverts A: it
/// is the nullspace of [(I - P_k) A ; (I - P_k)].
inline Subspace maximal_invariant_subspace(const Mat& A, const Subspace& X, InvariantTrace* trace = nullptr,
                                           std::optional<double> rel_tol = std::nullopt) {
  if (A.rows() != A.cols()) throw InputError("maximal_invariant_subspace: matrix must be square");
  if (A.rows() != X.ambient_dim()) throw InputError("maximal_invariant_subspace: dimension mismatch");
  detail::require_finite(A, "maximal_invariant_subspace");
  const Index d = X.ambient_dim();
  const double scale = A.norm();
  const Mat An = scale > 0 ? Mat(A / scale) : Mat(A);
  Subspace V = X;
  if (trace) {
    trace->dims = {V.dim()};
    trace->iterations = 0;
  }
  for (Index it = 0; it <= d; ++it) {
    if (V.is_zero()) break;
    const Mat Q = Mat::Identity(d, d) - V.projector();
    Mat stacked(2 * d, d);
    stacked.topRows(d) = Q * An;
    stacked.bottomRows(d) = Q;
    Subspace next = detail::nullspace_scaled(stacked, rel_tol, 1.0);
    if (trace) {
      trace->dims.push_back(next.dim());
      ++trace->iterations;
    }
    const bool stalled = next.dim() >= V.dim();
    V = std::move(next);
    if (stalled) break;
  }
  return V;
}

/// e^{tA}
inline Mat matexp(const Mat& A, double t) {
  if (A.rows() != A.cols()) throw InputError("matexp: matrix must be square");
  detail::require_finite(A, "matexp");
  if (A.size() == 0) return A;
  const Mat scaled = t * A;
  return scaled.exp();
}

/// e^{tA} v (scaling and squaring with a Padé approximant).
inline Vec matexp_action(const Mat& A, double t, const Vec& v) {
  if (A.cols() != v.size()) throw InputError("matexp_action: dimension mismatch");
  return matexp(A, t) * v;
}

/// Affine subspace base + span(directions), stored with the base point
/// orthogonal to the directions (the minimum-norm point).
class AffineSubspace {
 public:
  AffineSubspace() = default;

  AffineSubspace(const Vec& point, Subspace directions) : directions_(std::move(directions)) {
    if (point.size() != directions_.ambient_dim()) throw InputError("AffineSubspace: dimension mismatch");
    detail::require_finite(point, "AffineSubspace");
    base_ = point - directions_.project(point);
  }

  static AffineSubspace whole(Index d) { return AffineSubspace(Vec::Zero(d), Subspace::full(d)); }

  const Vec& base_point() const { return base_; }
  const Subspace& directions() const { return directions_; }
  Index ambient_dim() const { return directions_.ambient_dim(); }

  Vec project(const Vec& z) const { return base_ + directions_.project(z - base_); }

  double distance(const Vec& z) const { return (z - project(z)).norm(); }

  bool contains(const Vec& z, double tol = 1e-9) const { return distance(z) <= tol * std::max(1.0, z.norm()); }

 private:
  Vec base_;
  Subspace directions_;
};

}  // namespace saddleflow

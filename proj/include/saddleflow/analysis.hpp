#pragma once
// Classification of the limiting behaviour of the gradient flow: saddle
// location, the saddle set, the oscillation subspace S_linear (plain,
// Lagrangian and projected variants), the kernel condition along candidate
// limit trajectories, conserved quantities and the convergence certificate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "saddleflow/dynamics.hpp"
#include "saddleflow/errors.hpp"
#include "saddleflow/model.hpp"
#include "saddleflow/rng.hpp"
#include "saddleflow/subspace.hpp"

namespace saddleflow {

struct SaddleSearchOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;
  /// Horizon of the flow integration used when Newton stalls.
  double fallback_horizon = 200.0;
  bool allow_fallback = true;
};

namespace detail {

struct NewtonOutcome {
  Vec z;
  bool converged = false;
  NotFoundError::Reason reason = NotFoundError::Reason::Budget;
  double gradient_norm = 0.0;
};

// Damped Newton on g(z) = (phi_x, phi_y) with Armijo backtracking on |g|^2.
inline NewtonOutcome damped_newton(const SaddleProblem& P, Vec z, const SaddleSearchOptions& opts) {
  NewtonOutcome out;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Vec g = P.gradient(z);
    const double f = g.squaredNorm();
    out.gradient_norm = std::sqrt(f);
    if (out.gradient_norm < opts.gradient_tol) {
      out.z = z;
      out.converged = true;
      return out;
    }
    if (it == opts.max_iterations) break;
    const Mat H = P.hessian(z);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(H);
    const Vec step = cod.solve(-g);
    const double slope = 2.0 * g.dot(H * step);
    if (!step.allFinite() || !(slope < 0.0)) {
      out.z = z;
      out.reason = NotFoundError::Reason::SingularStall;
      return out;
    }
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      const Vec trial = z + t * step;
      if (!trial.allFinite()) continue;
      const Vec gt = P.gradient(trial);
      if (gt.allFinite() && gt.squaredNorm() <= f + 1e-4 * t * slope) {
        z = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.z = z;
      out.reason = NotFoundError::Reason::SingularStall;
      return out;
    }
    if (z.norm() > 1e12) {
      out.z = z;
      out.reason = NotFoundError::Reason::Divergence;
      return out;
    }
  }
  out.z = z;
  out.reason = NotFoundError::Reason::Budget;
  return out;
}

}  // namespace detail

/// Point with |(phi_x, phi_y)| below the tolerance, by damped Newton; when
/// Newton stalls, a long flow integration from the guess followed by a
/// Newton polish.
inline Vec find_saddle(const SaddleProblem& P, const Vec& guess, const SaddleSearchOptions& opts = {}) {
  if (guess.size() != P.dim()) throw InputError("find_saddle: guess dimension mismatch");
  if (!guess.allFinite()) throw InputError("find_saddle: guess is not finite");
  auto first = detail::damped_newton(P, guess, opts);
  if (first.converged) return first.z;
  if (opts.allow_fallback) {
    try {
      FlowOptions fo;
      fo.record_steps = false;
      const Trajectory tr = integrate_flow(P, guess, opts.fallback_horizon, fo);
      auto polished = detail::damped_newton(P, tr.final_state(), opts);
      if (polished.converged) return polished.z;
    } catch (const StiffnessError&) {
    } catch (const EvaluationError&) {
    }
  }
  const char* why = first.reason == NotFoundError::Reason::SingularStall ? "Newton stalled on a singular Hessian"
                    : first.reason == NotFoundError::Reason::Divergence  ? "Newton iterates diverged"
                                                                         : "iteration budget exhausted";
  throw NotFoundError(first.reason, std::string("find_saddle: ") + why + " (|gradient| = " +
                                        std::to_string(first.gradient_norm) + ")");
}

enum class Exactness { Exact, LocalOnly };

/// representative + span(directions).
struct SaddleSet {
  Vec representative;
  Subspace directions;
  Exactness exactness = Exactness::Exact;
  bool empty = false;
};

/// Saddle set of a quadratic: min-norm solution of the stationarity system
/// plus the Hessian nullspace. Flagged empty when the system is inconsistent.
inline SaddleSet saddle_set(const QuadraticSaddle& Q) {
  const Index d = Q.dim();
  const Mat H = Q.hessian(Vec::Zero(d));
  Vec rhs(d);
  rhs << -Q.p(), -Q.q();
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(H);
  cod.setThreshold(default_rank_tol(d, d));
  const Vec z = cod.solve(rhs);
  SaddleSet s;
  s.exactness = Exactness::Exact;
  s.directions = nullspace(H);
  const double scale = std::max({1.0, rhs.norm(), H.norm() * z.norm()});
  if (!z.allFinite() || (H * z - rhs).norm() > 1e-9 * scale) {
    s.empty = true;
    s.representative = Vec::Zero(d);
    return s;
  }
  s.representative = z - s.directions.project(z);
  return s;
}

namespace detail {

inline void require_saddle(const SaddleProblem& P, const Vec& zbar, const char* who) {
  if (zbar.size() != P.dim()) throw InputError(std::string(who) + ": saddle dimension mismatch");
  const double r = flow_field(P, zbar).norm();
  if (r > 1e-8 * (1.0 + zbar.norm()))
    throw InputError(std::string(who) + ": point is not a saddle (|flow| = " + std::to_string(r) + ")");
}

}  // namespace detail

/// S_linear at a saddle: the largest A(zbar)-invariant subspace of ker B(zbar),
/// in zbar-centred coordinates.
inline Subspace compute_S_linear(const SaddleProblem& P, const Vec& zbar) {
  detail::require_saddle(P, zbar, "compute_S_linear");
  return maximal_invariant_subspace(matrix_A(P, zbar), nullspace(matrix_B(P, zbar)));
}

struct KernelCheck {
  bool holds = true;
  double worst_residual = 0.0;  ///< max raw residual over samples and r
  double worst_ratio = 0.0;     ///< max residual / (1 + |z(t) - zbar|)
  double r_at_worst = 0.0;
  double t_at_worst = 0.0;
};

/// Residual of z(t) in ker B(r z(t)) ∩ ker(A(r z(t)) - A(zbar)) on the grid
/// r in {0, 1/K, ..., 1}, coordinates shifted so zbar is the origin.
inline KernelCheck check_kernel_condition(const SaddleProblem& P, const Vec& zbar, const Trajectory& candidate,
                                          int r_grid = 16, double tol = 1e-6) {
  if (r_grid < 1) throw InputError("check_kernel_condition: r grid needs at least one interval");
  if (zbar.size() != P.dim()) throw InputError("check_kernel_condition: saddle dimension mismatch");
  KernelCheck out;
  const Mat A0 = matrix_A(P, zbar);
  for (std::size_t k = 0; k < candidate.size(); ++k) {
    const Vec w = candidate.states[k] - zbar;
    if (!w.allFinite()) throw InputError("check_kernel_condition: non-finite candidate state");
    for (int j = 0; j <= r_grid; ++j) {
      const double r = static_cast<double>(j) / r_grid;
      const Vec zr = zbar + r * w;
      const double res =
          std::max((matrix_B(P, zr) * w).norm(), ((matrix_A(P, zr) - A0) * w).norm());
      const double ratio = res / (1.0 + w.norm());
      if (res > out.worst_residual) out.worst_residual = res;
      if (ratio > out.worst_ratio) {
        out.worst_ratio = ratio;
        out.r_at_worst = r;
        out.t_at_worst = candidate.times[k];
      }
    }
  }
  out.holds = out.worst_ratio < tol;
  return out;
}

enum class Verdict { GloballyConvergent, PossiblyOscillatory, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::GloballyConvergent: return "GloballyConvergent";
    case Verdict::PossiblyOscillatory: return "PossiblyOscillatory";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct CertifyOptions {
  int r_grid = 16;
  double kernel_tol = 1e-6;
  /// Random unit candidates drawn from S_linear (on top of its basis vectors)
  /// when the problem is not quadratic.
  int kernel_probes = 8;
  std::uint64_t seed = 1;
};

struct Certificate {
  Verdict verdict = Verdict::Inconclusive;
  Vec saddle;
  Subspace s_linear;
  Subspace oscillation_modes;
  Subspace saddle_directions;
  Exactness exactness = Exactness::LocalOnly;
  double saddle_gradient_norm = 0.0;
  double invariance_residual = 0.0;  ///< |(I - P) A P| for P onto S_linear
  double kernel_residual = 0.0;      ///< |B P|
  int r_grid = 16;
  double kernel_tol = 1e-6;
  int probes_tested = 0;
  int probes_passed = 0;
  double worst_probe_residual = 0.0;
  std::vector<std::string> notes;
};

namespace detail {

/// Part of `s` orthogonal to `sub` (sub is expected to lie inside s).
inline Subspace relative_complement(const Subspace& s, const Subspace& sub) {
  return intersect(s, sub.complement());
}

/// Smallest non-zero angular frequency of a skew matrix restricted to a subspace.
inline double slowest_frequency(const Mat& A, const Subspace& S) {
  if (S.is_zero()) return 0.0;
  const Mat R = S.basis().transpose() * A * S.basis();
  Eigen::SelfAdjointEigenSolver<Mat> es(R.transpose() * R, Eigen::EigenvaluesOnly);
  double best = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double w = std::sqrt(std::max(0.0, es.eigenvalues()(i)));
    if (w > 1e-8 && (best == 0.0 || w < best)) best = w;
  }
  return best;
}

}  // namespace detail

/// Unit-radius linear-flow candidate zbar + e^{tA} v over about one period.
inline Trajectory linear_flow_candidate(const Mat& A, const Vec& zbar, const Vec& v, const Subspace& modes,
                                        std::size_t samples = 64) {
  const double w = detail::slowest_frequency(A, modes);
  const double period = w > 0.0 ? std::min(2.0 * std::numbers::pi / w, 1e3) : 1.0;
  Trajectory tr = linear_limit_flow(A, v, uniform_times(period, samples));
  for (auto& s : tr.states) s += zbar;
  return tr;
}

/// Convergence certificate at the saddle zbar.
inline Certificate certify(const SaddleProblem& P, const Vec& zbar, const CertifyOptions& opts = {}) {
  detail::require_saddle(P, zbar, "certify");
  Certificate c;
  c.saddle = zbar;
  c.r_grid = opts.r_grid;
  c.kernel_tol = opts.kernel_tol;
  c.saddle_gradient_norm = P.gradient(zbar).norm();
  const Mat A = matrix_A(P, zbar), B = matrix_B(P, zbar);
  c.s_linear = maximal_invariant_subspace(A, nullspace(B));
  const Index d = P.dim();
  if (!c.s_linear.is_zero()) {
    const Mat Pr = c.s_linear.projector();
    c.invariance_residual = ((Mat::Identity(d, d) - Pr) * A * Pr).norm();
    c.kernel_residual = (B * Pr).norm();
  }

  if (auto Q = P.as_quadratic()) {
    const SaddleSet ss = saddle_set(*Q);
    c.exactness = Exactness::Exact;
    c.saddle_directions = ss.directions;
    c.oscillation_modes = detail::relative_complement(c.s_linear, ss.directions);
    if (c.oscillation_modes.is_zero()) {
      c.verdict = Verdict::GloballyConvergent;
      c.notes.push_back("quadratic: S_linear lies inside the saddle set, every limit is an equilibrium");
    } else {
      c.verdict = Verdict::PossiblyOscillatory;
      c.notes.push_back("quadratic: S equals S_linear, oscillation modes are non-trivial");
    }
    return c;
  }

  c.exactness = Exactness::LocalOnly;
  c.saddle_directions = nullspace(P.hessian(zbar));
  c.oscillation_modes = detail::relative_complement(c.s_linear, c.saddle_directions);
  if (c.s_linear.is_zero()) {
    c.verdict = Verdict::GloballyConvergent;
    c.notes.push_back("S_linear = {0}: globally convergent by the inclusion S within S_linear");
    return c;
  }
  if (c.oscillation_modes.is_zero()) {
    // Limit solutions obey z' = A(zbar)(z - zbar) with z - zbar in ker A(zbar): all are stationary.
    c.verdict = Verdict::GloballyConvergent;
    c.notes.push_back("S_linear lies in ker A(zbar): every limiting solution is an equilibrium");
    return c;
  }

  // Probe linear-flow candidates in the oscillation modes against the kernel condition.
  std::vector<Vec> candidates;
  const Mat& Mb = c.oscillation_modes.basis();
  for (Index j = 0; j < Mb.cols(); ++j) candidates.push_back(Mb.col(j));
  CounterRng rng(opts.seed, 0xC0DE);
  for (int k = 0; k < opts.kernel_probes; ++k) {
    Vec coef(Mb.cols());
    for (Index j = 0; j < coef.size(); ++j) coef(j) = rng.normal();
    if (coef.norm() == 0.0) continue;
    candidates.push_back(Mb * coef.normalized());
  }
  for (const Vec& v : candidates) {
    const Trajectory cand = linear_flow_candidate(A, zbar, v, c.oscillation_modes);
    const KernelCheck kc = check_kernel_condition(P, zbar, cand, opts.r_grid, opts.kernel_tol);
    ++c.probes_tested;
    if (kc.holds) ++c.probes_passed;
    c.worst_probe_residual = std::max(c.worst_probe_residual, kc.worst_residual);
  }
  if (c.probes_passed > 0) {
    c.verdict = Verdict::PossiblyOscillatory;
    c.notes.push_back("a unit-radius linear-flow candidate satisfies the kernel condition on the r grid");
  } else {
    c.verdict = Verdict::Inconclusive;
    c.notes.push_back("not quadratic: S_linear is non-trivial but the kernel condition rejected all " +
                      std::to_string(c.probes_tested) + " linear-flow probes; S is likely trivial");
  }
  return c;
}

/// Directions along which the utility is affine through xbar.
struct WSubspace {
  AffineSubspace affine;
  bool exact = true;
};

/// W = {x : s -> U(s x + xbar) is linear}. Polynomial utilities: common
/// nullspace of all coefficient matrices of the Hessian polynomial (exact).
/// Callback utilities: common nullspace of Hessians sampled around xbar.
inline WSubspace lagrangian_W_subspace(const LinearConstraintLagrangian& L, const Vec& xbar,
                                       const ProbeOptions& probes = {}) {
  const Index n = L.n();
  if (xbar.size() != n || !xbar.allFinite()) throw InputError("lagrangian_W_subspace: bad primal point");
  std::vector<Mat> blocks;
  WSubspace out;
  if (L.utility().is_polynomial()) {
    blocks = L.utility().polynomial().hessian_coefficients();
    out.exact = true;
  } else {
    for (const Vec& u : detail::probe_points(n, probes)) blocks.push_back(L.utility().hessian(xbar + u));
    out.exact = false;
  }
  Subspace dirs = Subspace::full(n);
  if (!blocks.empty()) {
    Mat stacked(static_cast<Index>(blocks.size()) * n, n);
    for (std::size_t i = 0; i < blocks.size(); ++i) stacked.middleRows(static_cast<Index>(i) * n, n) = blocks[i];
    dirs = nullspace(stacked);
  }
  out.affine = AffineSubspace(xbar, dirs);
  return out;
}

/// S = saddle + modes, modes = largest [[0, D'], [-D, 0]]-invariant subspace of W x R^m.
struct LagrangianS {
  Vec base;
  Subspace modes;
  WSubspace W;
};

inline LagrangianS compute_S_lagrangian(const LinearConstraintLagrangian& L, const Vec& saddle) {
  detail::require_saddle(L, saddle, "compute_S_lagrangian");
  const Index n = L.n(), m = L.m(), d = L.dim();
  LagrangianS out;
  out.base = saddle;
  out.W = lagrangian_W_subspace(L, saddle.head(n));
  Mat K = Mat::Zero(d, d);
  K.topRightCorner(n, m) = L.D().transpose();
  K.bottomLeftCorner(m, n) = -L.D();
  const Mat& Wb = out.W.affine.directions().basis();
  Mat basis = Mat::Zero(d, Wb.cols() + m);
  basis.topLeftCorner(n, Wb.cols()) = Wb;
  basis.bottomRightCorner(m, m) = Mat::Identity(m, m);
  out.modes = maximal_invariant_subspace(K, Subspace::from_orthonormal(basis));
  return out;
}

/// W(t; z) = |(e^{tA} v)' z|^2.
inline double conserved_quantity_W(const Mat& A, const Vec& v, double t, const Vec& z) {
  if (A.rows() != A.cols() || A.cols() != v.size() || v.size() != z.size())
    throw InputError("conserved_quantity_W: dimension mismatch");
  if (skew_defect(A) > 1e-8) throw InputError("conserved_quantity_W: matrix is not skew-symmetric");
  const double s = matexp_action(A, t, v).dot(z);
  return s * s;
}

struct AverageOptions {
  /// Fraction of the trajectory (from the end) to average over.
  double tail_fraction = 1.0;
  /// Minimum averaging window length.
  double min_horizon = 1.0;
};

/// Trapezoidal time average of the trajectory over its tail window.
inline Vec average_position(const Trajectory& traj, const AverageOptions& opts = {}) {
  traj.validate();
  if (!(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0))
    throw InputError("average_position: tail fraction must lie in (0, 1]");
  const double t_end = traj.times.back();
  const double t_begin = t_end - opts.tail_fraction * traj.duration();
  std::size_t first = 0;
  while (first < traj.size() && traj.times[first] < t_begin - 1e-12) ++first;
  if (traj.size() - first < 2) throw InputError("average_position: window holds fewer than two samples");
  const double span = t_end - traj.times[first];
  if (span < opts.min_horizon) throw InputError("average_position: trajectory is too short to average");
  Vec acc = Vec::Zero(traj.dim());
  for (std::size_t i = first + 1; i < traj.size(); ++i)
    acc += 0.5 * (traj.times[i] - traj.times[i - 1]) * (traj.states[i] + traj.states[i - 1]);
  return acc / span;
}

/// S_linear of the projected flow z' = Pi f(z) on V at its equilibrium zbar:
/// largest Pi A Pi-invariant subspace of ker(Pi B Pi) ∩ dir(V).
inline Subspace projected_S_linear(const SaddleProblem& P, const AffineSubspace& V, const Vec& zbar) {
  if (V.ambient_dim() != P.dim() || zbar.size() != P.dim()) throw InputError("projected_S_linear: dimension mismatch");
  if (!V.contains(zbar, 1e-9)) throw InputError("projected_S_linear: point is not on the subspace");
  const Mat Pi = V.directions().projector();
  const double r = (Pi * flow_field(P, zbar)).norm();
  if (r > 1e-8 * (1.0 + zbar.norm()))
    throw InputError("projected_S_linear: point is not an equilibrium of the projected flow");
  const Mat A = Pi * matrix_A(P, zbar) * Pi;
  const Mat B = Pi * matrix_B(P, zbar) * Pi;
  return maximal_invariant_subspace(A, intersect(nullspace(B), V.directions()));
}

/// Equilibrium of the projected flow of a quadratic on V (least squares in
/// the subspace coordinates). Throws NotFoundError if none exists.
inline Vec projected_equilibrium(const QuadraticSaddle& Q, const AffineSubspace& V) {
  const Mat& Qb = V.directions().basis();
  const Vec& b = V.base_point();
  if (Qb.cols() == 0) return b;
  const Mat M = Qb.transpose() * Q.flow_jacobian() * Qb;
  const Vec rhs = -Qb.transpose() * (Q.flow_jacobian() * b + Q.flow_offset());
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(M);
  const Vec w = cod.solve(rhs);
  const Vec z = b + Qb * w;
  const double res = (Qb.transpose() * (Q.flow_jacobian() * z + Q.flow_offset())).norm();
  if (!z.allFinite() || res > 1e-9 * std::max(1.0, rhs.norm()))
    throw NotFoundError(NotFoundError::Reason::SingularStall, "projected flow has no equilibrium on the subspace");
  return z;
}

}  // namespace saddleflow

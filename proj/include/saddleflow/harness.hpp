#pragma once
// Verification procedures: each turns a structural prediction about the
// gradient flow into a quantitative pass/fail report. Shared by the test
// suites and the `verify` command.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "saddleflow/analysis.hpp"
#include "saddleflow/dynamics.hpp"
#include "saddleflow/model.hpp"
#include "saddleflow/rng.hpp"
#include "saddleflow/subspace.hpp"

namespace saddleflow {

enum class Outcome { Pass, Fail, Vacuous, Inconclusive };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::Fail: return "fail";
    case Outcome::Vacuous: return "vacuous";
    case Outcome::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct CheckReport {
  std::string name;
  Outcome outcome = Outcome::Pass;
  bool passed = true;  ///< worst_violation <= tolerance
  double worst_violation = 0.0;
  double tolerance = 0.0;
  std::optional<double> estimate;
  std::optional<double> stderr_estimate;
  std::map<std::string, std::string> context;
  std::string note;

  static CheckReport graded(std::string name, double worst, double tol) {
    CheckReport r;
    r.name = std::move(name);
    r.worst_violation = worst;
    r.tolerance = tol;
    r.passed = worst <= tol;
    r.outcome = r.passed ? Outcome::Pass : Outcome::Fail;
    return r;
  }

  static CheckReport vacuous(std::string name, std::string why) {
    CheckReport r = graded(std::move(name), 0.0, 0.0);
    r.outcome = Outcome::Vacuous;
    r.note = std::move(why);
    return r;
  }

  static CheckReport inconclusive(std::string name, double tol, std::string why) {
    CheckReport r;
    r.name = std::move(name);
    r.worst_violation = std::numeric_limits<double>::infinity();
    r.tolerance = tol;
    r.passed = false;
    r.outcome = Outcome::Inconclusive;
    r.note = std::move(why);
    return r;
  }
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline FlowOptions tight_flow() {
  FlowOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  return o;
}

inline std::vector<double> merged_grid(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random instances.

/// Gaussian matrix.
inline Mat random_matrix(CounterRng& rng, Index rows, Index cols) {
  Mat M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = rng.normal();
  return M;
}

inline Vec random_vector(CounterRng& rng, Index n) { return random_matrix(rng, n, 1).col(0); }

/// Haar-distributed orthogonal matrix.
inline Mat random_orthogonal(CounterRng& rng, Index n) {
  if (n == 0) return Mat(0, 0);
  Eigen::HouseholderQR<Mat> qr(random_matrix(rng, n, n));
  Mat Q = qr.householderQ();
  const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (R(j, j) < 0) Q.col(j) *= -1.0;
  return Q;
}

struct RandomQuadraticOptions {
  /// Draw the Gram factors with random (possibly deficient) rank.
  bool degenerate = false;
  /// Saddle point location (random when unset).
  std::optional<Vec> saddle;
};

/// phi with Pxx = -G G', Pyy = H H' (Gram forms), Gaussian coupling, and a
/// saddle at a chosen or random point.
inline QuadraticSaddle random_quadratic(CounterRng& rng, int n, int m, const RandomQuadraticOptions& opts = {}) {
  auto rank = [&](int k) { return opts.degenerate ? static_cast<int>(rng.uniform() * (k + 1)) : k; };
  const Mat G = random_matrix(rng, n, rank(n));
  const Mat H = random_matrix(rng, m, rank(m));
  const Mat Pxx = -G * G.transpose(), Pyy = H * H.transpose();
  const Mat Pxy = random_matrix(rng, n, m);
  const Vec zs = opts.saddle ? *opts.saddle : random_vector(rng, n + m);
  QuadraticSaddle tmp(Pxx, Pyy, Pxy, Vec::Zero(n), Vec::Zero(m));
  const Vec f0 = -tmp.flow_jacobian() * zs;
  return QuadraticSaddle(Pxx, Pyy, Pxy, f0.head(n), -f0.tail(m));
}

struct PlantedOptions {
  /// Oscillatory coordinates in x and y (each >= 1).
  int osc_x = 1;
  int osc_y = 1;
  /// Use integer frequencies 1, 2, ... in the oscillatory block so that 2 pi
  /// is a common period.
  bool integer_frequencies = false;
  std::optional<Vec> saddle;
};

/// Quadratic whose S_linear is non-trivial by construction: an undamped
/// coupling block on (x_osc, y_osc), a strictly damped block on the rest,
/// then independent random rotations of the x and y coordinates.
inline QuadraticSaddle planted_oscillator(CounterRng& rng, int n, int m, const PlantedOptions& opts = {}) {
  const int kx = std::clamp(opts.osc_x, 1, n), ky = std::clamp(opts.osc_y, 1, m);
  const int rx = n - kx, ry = m - ky;
  Mat Pxx = Mat::Zero(n, n), Pyy = Mat::Zero(m, m), Pxy = Mat::Zero(n, m);
  // Oscillatory block: singular values chosen explicitly.
  {
    const Mat U = random_orthogonal(rng, kx), V = random_orthogonal(rng, ky);
    Mat S = Mat::Zero(kx, ky);
    for (int i = 0; i < std::min(kx, ky); ++i)
      S(i, i) = opts.integer_frequencies ? static_cast<double>(i + 1) : 0.5 + 1.5 * rng.uniform();
    Pxy.topLeftCorner(kx, ky) = U * S * V.transpose();
  }
  if (rx > 0) {
    const Mat G = random_matrix(rng, rx, rx);
    Pxx.bottomRightCorner(rx, rx) = -(G * G.transpose() + 0.5 * Mat::Identity(rx, rx));
  }
  if (ry > 0) {
    const Mat H = random_matrix(rng, ry, ry);
    Pyy.bottomRightCorner(ry, ry) = H * H.transpose() + 0.5 * Mat::Identity(ry, ry);
  }
  if (rx > 0 && ry > 0) Pxy.bottomRightCorner(rx, ry) = random_matrix(rng, rx, ry);
  const Mat Qx = random_orthogonal(rng, n), Qy = random_orthogonal(rng, m);
  const Mat Pxx_r = Qx * Pxx * Qx.transpose(), Pyy_r = Qy * Pyy * Qy.transpose(), Pxy_r = Qx * Pxy * Qy.transpose();
  const Vec zs = opts.saddle ? *opts.saddle : random_vector(rng, n + m);
  QuadraticSaddle tmp(Pxx_r, Pyy_r, Pxy_r, Vec::Zero(n), Vec::Zero(m));
  const Vec f0 = -tmp.flow_jacobian() * zs;
  return QuadraticSaddle(Pxx_r, Pyy_r, Pxy_r, f0.head(n), -f0.tail(m));
}

/// Polynomial 0.5 x'Mx + g'x for symmetric M.
inline Polynomial quadratic_polynomial(const Mat& M, const Vec& g) {
  const int n = static_cast<int>(M.rows());
  Polynomial p(n);
  for (int i = 0; i < n; ++i) {
    Exponents e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(i)] = 1;
    p.add_term(e, g(i));
    e[static_cast<std::size_t>(i)] = 2;
    p.add_term(e, 0.5 * M(i, i));
    e[static_cast<std::size_t>(i)] = 1;
    for (int j = i + 1; j < n; ++j) {
      Exponents f = e;
      f[static_cast<std::size_t>(j)] = 1;
      p.add_term(f, 0.5 * (M(i, j) + M(j, i)));
    }
  }
  return p;
}

/// Lagrangian U(x) + y'(Dx + e) with quadratic U = 0.5 x'Mx + g'x, where
/// M = -G G' has random (possibly deficient) rank and (xs, ys) is a saddle.
inline LinearConstraintLagrangian random_quadratic_lagrangian(CounterRng& rng, int n, int m) {
  const Mat G = random_matrix(rng, n, static_cast<Index>(rng.uniform() * (n + 1)));
  const Mat M = -G * G.transpose();
  const Mat D = random_matrix(rng, m, n);
  const Vec xs = random_vector(rng, n), ys = random_vector(rng, m);
  const Vec g = -M * xs - D.transpose() * ys;
  return LinearConstraintLagrangian(Utility(quadratic_polynomial(M, g)), D, -D * xs);
}

// ---------------------------------------------------------------------------
// Eigenvector route to S_linear.

/// Span of the real and imaginary parts of complex eigenvectors of a normal
/// matrix A lying in X. Eigenvalues are clustered so that repeated
/// eigenvalues contribute their whole eigenspace ∩ X.
inline Subspace eigenvector_span(const Mat& A, const Subspace& X, double cluster_tol = 1e-7) {
  using CMat = Eigen::MatrixXcd;
  const Index d = A.rows();
  if (A.cols() != d || X.ambient_dim() != d) throw InputError("eigenvector_span: dimension mismatch");
  if (X.is_zero()) return Subspace::zero(d);
  Eigen::ComplexEigenSolver<CMat> es(A.cast<std::complex<double>>());
  const Eigen::VectorXcd& lam = es.eigenvalues();
  const double scale = std::max(1.0, A.norm());
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  const CMat Pc = (Mat::Identity(d, d) - X.projector()).cast<std::complex<double>>();
  Mat collected(d, 0);
  for (Index i = 0; i < d; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    std::complex<double> center = 0.0;
    int count = 0;
    for (Index j = i; j < d; ++j)
      if (!used[static_cast<std::size_t>(j)] && std::abs(lam(j) - lam(i)) < cluster_tol * scale) {
        used[static_cast<std::size_t>(j)] = true;
        center += lam(j);
        ++count;
      }
    center /= static_cast<double>(count);
    // Eigenspace: the `count` smallest right singular vectors of A - center I.
    const CMat shifted = A.cast<std::complex<double>>() - center * CMat::Identity(d, d);
    Eigen::JacobiSVD<CMat> svd(shifted, Eigen::ComputeFullV);
    const CMat E = svd.matrixV().rightCols(count);
    // Coefficients c with (I - P_X) E c = 0.
    Eigen::JacobiSVD<CMat> svd2(Pc * E, Eigen::ComputeFullV);
    const Eigen::VectorXd& s2 = svd2.singularValues();
    const double smax = s2.size() ? s2.maxCoeff() : 0.0;
    for (Index k = 0; k < count; ++k) {
      const double sk = k < s2.size() ? s2(k) : 0.0;
      if (smax > 0.0 && sk > 1e-8) continue;
      const Eigen::VectorXcd v = E * svd2.matrixV().col(k);
      collected.conservativeResize(d, collected.cols() + 2);
      collected.col(collected.cols() - 2) = v.real();
      collected.col(collected.cols() - 1) = v.imag();
    }
  }
  return Subspace::span(collected, 1e-8);
}

/// Fixpoint route against eigenvector route for S_linear at zbar.
inline CheckReport check_S_linear_routes(const SaddleProblem& P, const Vec& zbar, double tol = 1e-8) {
  const Mat A = matrix_A(P, zbar);
  const Subspace kerB = nullspace(matrix_B(P, zbar));
  const Subspace fix = compute_S_linear(P, zbar);
  const Subspace eig = eigenvector_span(A, kerB);
  CheckReport r = CheckReport::graded("slinear", projector_distance(fix, eig), tol);
  r.context["problem"] = P.fingerprint();
  r.context["dim_fixpoint"] = std::to_string(fix.dim());
  r.context["dim_eigen"] = std::to_string(eig.dim());
  return r;
}

// ---------------------------------------------------------------------------
// Checks.

namespace detail {

// max over i < j of (d_j - d_i) / max(t_j - t_i, 1): increase per unit time,
// judged by absolute increase over sub-unit intervals.
inline double worst_increase_rate(const std::vector<double>& t, const std::vector<double>& dist) {
  double worst = 0.0;
  for (std::size_t j = 1; j < t.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double inc = dist[j] - dist[i];
      if (inc <= 0.0) continue;
      worst = std::max(worst, inc / std::max(t[j] - t[i], 1.0));
    }
  return worst;
}

}  // namespace detail

/// Pairwise distance between two trajectories must not increase.
inline CheckReport check_pathwise_stability(const SaddleProblem& P, const Vec& z0, const Vec& z0p, double T,
                                            double slack = 1e-7, std::size_t refinement = 400) {
  if (z0.size() != P.dim() || z0p.size() != P.dim()) throw InputError("check_pathwise_stability: dimension mismatch");
  FlowOptions o = detail::tight_flow();
  const Trajectory a0 = integrate_flow(P, z0, T, o);
  const Trajectory b0 = integrate_flow(P, z0p, T, o);
  o.sample_times = detail::merged_grid(detail::merged_grid(a0.times, b0.times), uniform_times(T, refinement));
  o.record_steps = false;
  const Trajectory a = integrate_flow(P, z0, T, o);
  const Trajectory b = integrate_flow(P, z0p, T, o);
  if (a.times != b.times) throw Error("check_pathwise_stability: sample grids diverged");
  std::vector<double> dist(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) dist[i] = (a.states[i] - b.states[i]).norm();
  const double d0 = dist.front();
  CheckReport r = CheckReport::graded("pathwise", detail::worst_increase_rate(a.times, dist), slack * (1.0 + d0));
  r.context["problem"] = P.fingerprint();
  r.context["horizon"] = detail::num(T);
  r.context["initial_distance"] = detail::num(d0);
  r.context["final_distance"] = detail::num(dist.back());
  r.context["samples"] = std::to_string(a.size());
  return r;
}

/// Distance from a trajectory to a saddle must not increase.
inline CheckReport check_saddle_distance(const SaddleProblem& P, const Vec& zbar, const Vec& z0, double T,
                                         double slack = 1e-7) {
  FlowOptions o = detail::tight_flow();
  o.sample_times = uniform_times(T, 400);
  const Trajectory tr = integrate_flow(P, z0, T, o);
  std::vector<double> dist(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) dist[i] = (tr.states[i] - zbar).norm();
  CheckReport r = CheckReport::graded("saddle_distance", detail::worst_increase_rate(tr.times, dist),
                                      slack * (1.0 + dist.front()));
  r.context["problem"] = P.fingerprint();
  return r;
}

struct LimitFitOptions {
  double tail_fraction = 0.2;
  /// Plateau: distance to the saddle decreases by less than this per unit time.
  double plateau_rate = 1e-9;
  double amplitude_guard = 1e-8;
  double tolerance = 1e-5;
};

/// Tail of a long trajectory against e^{(t - t0) A(zbar)} propagation of its
/// first tail state; violation is the sup-norm mismatch over the tail
/// amplitude. Inconclusive when no distance plateau is visible.
inline CheckReport fit_limit_to_linear_ode(const SaddleProblem& P, const Vec& zbar, const Trajectory& traj,
                                           const LimitFitOptions& opts = {}) {
  traj.validate();
  const double t_end = traj.times.back();
  const double t_begin = t_end - opts.tail_fraction * traj.duration();
  std::size_t first = 0;
  while (first < traj.size() && traj.times[first] < t_begin) ++first;
  if (traj.size() - first < 2) throw InputError("fit_limit_to_linear_ode: tail window holds fewer than two samples");
  const double window = t_end - traj.times[first];
  const double d_start = (traj.states[first] - zbar).norm();
  const double d_end = (traj.states.back() - zbar).norm();
  const double rate = (d_start - d_end) / window;
  if (rate >= opts.plateau_rate) {
    CheckReport r = CheckReport::inconclusive("limit_fit", opts.tolerance,
                                              "no distance plateau in the tail window (rate " + detail::num(rate) + ")");
    r.context["problem"] = P.fingerprint();
    return r;
  }
  const Mat A = matrix_A(P, zbar);
  const Vec w0 = traj.states[first] - zbar;
  double amplitude = 0.0, mismatch = 0.0;
  for (std::size_t i = first; i < traj.size(); ++i) {
    const Vec w = traj.states[i] - zbar;
    amplitude = std::max(amplitude, w.norm());
    const Vec pred = matexp_action(A, traj.times[i] - traj.times[first], w0);
    mismatch = std::max(mismatch, detail::max_abs(w - pred));
  }
  const bool collapsed = amplitude < opts.amplitude_guard;
  CheckReport r = CheckReport::graded("limit_fit", collapsed ? mismatch : mismatch / amplitude, opts.tolerance);
  r.context["problem"] = P.fingerprint();
  r.context["tail_amplitude"] = detail::num(amplitude);
  r.context["plateau_rate"] = detail::num(rate);
  if (collapsed) r.note = "trajectory collapsed onto the saddle; absolute mismatch reported";
  return r;
}

struct VarianceExpectation {
  enum class Kind { Slope, Zero, Positive };
  Kind kind = Kind::Positive;
  double slope = 0.0;
  double rel_tol = 0.1;
  double z = 3.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  ///< bound under arbitrary correlation across time
};

/// Least-squares slope of E|z|^2 over [t_begin, t_end]. The standard error
/// sums |weight| x stderr, valid whatever the correlation between times.
inline LinearFit fit_second_moment(const EnsembleStats& s, double t_begin, double t_end) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.times.size(); ++i)
    if (s.times[i] >= t_begin - 1e-12 && s.times[i] <= t_end + 1e-12) idx.push_back(i);
  if (s.times.empty() || t_begin < s.times.front() - 1e-12 || t_end > s.times.back() + 1e-12 || idx.size() < 2)
    throw InputError("variance growth: window lies outside the recorded times");
  double tm = 0.0, ym = 0.0;
  for (auto i : idx) {
    tm += s.times[i];
    ym += s.second_moment[i];
  }
  tm /= static_cast<double>(idx.size());
  ym /= static_cast<double>(idx.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto i : idx) {
    sxx += (s.times[i] - tm) * (s.times[i] - tm);
    sxy += (s.times[i] - tm) * (s.second_moment[i] - ym);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * tm;
  for (auto i : idx) f.slope_stderr += std::abs((s.times[i] - tm) / sxx) * s.second_moment_stderr[i];
  return f;
}

inline CheckReport estimate_variance_growth(const EnsembleStats& stats, double t_begin, double t_end,
                                            const VarianceExpectation& expect = {}) {
  const LinearFit fit = fit_second_moment(stats, t_begin, t_end);
  CheckReport r;
  switch (expect.kind) {
    case VarianceExpectation::Kind::Slope:
      r = CheckReport::graded("variance_growth", std::abs(fit.slope - expect.slope) / std::abs(expect.slope),
                              expect.rel_tol);
      break;
    case VarianceExpectation::Kind::Zero:
      r = CheckReport::graded("variance_growth", std::abs(fit.slope), std::max(expect.z * fit.slope_stderr, 1e-12));
      break;
    case VarianceExpectation::Kind::Positive:
      r = CheckReport::graded("variance_growth", std::max(0.0, expect.z * fit.slope_stderr - fit.slope), 0.0);
      break;
  }
  r.estimate = fit.slope;
  r.stderr_estimate = fit.slope_stderr;
  r.context["paths"] = std::to_string(stats.path_count);
  r.context["seed"] = std::to_string(stats.seed);
  r.context["window"] = detail::num(t_begin) + ":" + detail::num(t_end);
  if (stats.path_count < 100) {
    // Below the ensemble size the fit is meant for: report, never fail.
    r.outcome = Outcome::Inconclusive;
    r.note = "fewer than 100 paths: standard error is wide";
  }
  return r;
}

/// Gains flow from z0 against Lambda times the transformed flow from Lambda^{-1} z0.
inline CheckReport check_gains_equivalence(const ProblemPtr& P, const GainVector& gains, const Vec& z0, double T,
                                           double tol = 1e-6) {
  const Vec lambda = gains.lambda();
  FlowOptions o = detail::tight_flow();
  o.sample_times = uniform_times(T, 200);
  o.record_steps = false;
  FlowOptions og = o;
  og.gains = gains;
  const Trajectory z = integrate_flow(*P, z0, T, og);
  const ProblemPtr Pt = apply_gains_transform(P, gains);
  const Trajectory zp = integrate_flow(*Pt, z0.cwiseQuotient(lambda), T, o);
  if (z.times != zp.times) throw Error("check_gains_equivalence: sample grids diverged");
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    worst = std::max(worst, detail::max_abs(lambda.cwiseProduct(zp.states[i]) - z.states[i]));
  CheckReport r = CheckReport::graded("gains", worst, tol);
  r.context["problem"] = P->fingerprint();
  r.context["horizon"] = detail::num(T);
  return r;
}

/// Motion along saddle-set directions must vanish.
inline CheckReport check_orthogonality(const QuadraticSaddle& Q, const Trajectory& traj, const SaddleSet& ss,
                                       double tol = 1e-7) {
  if (ss.empty || ss.directions.is_zero())
    return CheckReport::vacuous("orthogonality", "saddle set has no directions");
  traj.validate();
  const Mat Pd = ss.directions.projector();
  double worst = 0.0;
  for (const Vec& z : traj.states) worst = std::max(worst, (Pd * (z - traj.states.front())).norm());
  CheckReport r = CheckReport::graded("orthogonality", worst, tol);
  r.context["problem"] = Q.fingerprint();
  r.context["saddle_directions"] = std::to_string(ss.directions.dim());
  return r;
}

/// W(t; z(t)) along a deterministic trajectory; violation is the drift
/// normalised by |v|^2 |z(0) - zbar|^2.
inline CheckReport check_conserved_quantity(const SaddleProblem& P, const Vec& zbar, const Vec& v, const Vec& z0,
                                            double T, double tol = 1e-6) {
  FlowOptions o = detail::tight_flow();
  o.sample_times = uniform_times(T, 200);
  o.record_steps = false;
  const Trajectory tr = integrate_flow(P, z0, T, o);
  const Mat A = matrix_A(P, zbar);
  const double w0 = conserved_quantity_W(A, v, 0.0, z0 - zbar);
  const double scale = v.squaredNorm() * (z0 - zbar).squaredNorm();
  if (scale == 0.0) return CheckReport::vacuous("conserved", "zero direction or start at the saddle");
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i)
    worst = std::max(worst, std::abs(conserved_quantity_W(A, v, tr.times[i], tr.states[i] - zbar) - w0) / scale);
  CheckReport r = CheckReport::graded("conserved", worst, tol);
  r.context["problem"] = P.fingerprint();
  return r;
}

}  // namespace saddleflow

#pragma once
// Time integration of the saddle-point gradient flow (plain, gains-weighted
// or projected onto an affine subspace), the linear limiting flow, and an
// Euler-Maruyama ensemble for the noisy dynamics.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "saddleflow/errors.hpp"
#include "saddleflow/model.hpp"
#include "saddleflow/rng.hpp"
#include "saddleflow/subspace.hpp"

namespace saddleflow {

struct TrajectoryMeta {
  std::string integrator;
  double rel_tol = 0.0;
  double abs_tol = 0.0;
  std::string problem_fingerprint;
  std::uint64_t seed = 0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

/// Time-stamped states z(t_0), z(t_1), ...
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  TrajectoryMeta meta;

  std::size_t size() const { return times.size(); }
  Index dim() const { return states.empty() ? 0 : states.front().size(); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
  const Vec& final_state() const { return states.back(); }

  /// Throws InputError when the structural invariants do not hold.
  void validate() const {
    if (times.size() != states.size()) throw InputError("trajectory: times and states differ in length");
    if (times.size() < 2) throw InputError("trajectory: needs at least two samples");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!std::isfinite(times[i])) throw InputError("trajectory: non-finite time");
      if (i > 0 && !(times[i] > times[i - 1])) throw InputError("trajectory: times must be strictly increasing");
      if (states[i].size() != states[0].size()) throw InputError("trajectory: inconsistent state dimension");
      if (!states[i].allFinite()) throw InputError("trajectory: non-finite state");
    }
  }
};

struct FlowOptions {
  std::optional<GainVector> gains;
  std::optional<AffineSubspace> subspace;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  /// Extra output times in (0, T], filled through dense output.
  std::vector<double> sample_times;
  /// Record every accepted step (otherwise only t = 0, samples and T).
  bool record_steps = true;
  std::size_t max_steps = 20'000'000;
};

/// Right-hand side out = f(z).
using VectorField = std::function<void(const Vec&, Vec&)>;

namespace detail {

// Dormand-Prince 5(4) coefficients with the order-4 continuous extension.
struct DP5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
  if (err.size() == 0) return 0.0;
  double s = 0.0;
  for (Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double r = err(i) / sc;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(err.size()));
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of z' = f(z) on [0, T].
/// `post_step` (optional) maps each accepted state, e.g. re-projection.
inline Trajectory integrate_field(const VectorField& f, const Vec& z0, double T, const FlowOptions& opts,
                                  const std::function<Vec(const Vec&)>& post_step = {}) {
  using C = detail::DP5;
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("integrate: horizon must be positive and finite");
  if (!z0.allFinite()) throw InputError("integrate: initial state is not finite");
  if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0)) throw InputError("integrate: tolerances must be positive");
  if (!(opts.max_step > 0.0)) throw InputError("integrate: max_step must be positive");

  std::vector<double> samples;
  for (double s : opts.sample_times) {
    if (!std::isfinite(s)) throw InputError("integrate: non-finite sample time");
    if (s < 0.0 || s > T * (1.0 + 1e-12)) throw InputError("integrate: sample time outside [0, T]");
    if (s > 0.0 && s < T) samples.push_back(s);
  }
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  std::size_t next_sample = 0;

  const Index d = z0.size();
  Trajectory traj;
  traj.meta.integrator = "dopri5";
  traj.meta.rel_tol = opts.rel_tol;
  traj.meta.abs_tol = opts.abs_tol;

  auto eval = [&](const Vec& z, Vec& out) {
    f(z, out);
    if (!out.allFinite()) throw EvaluationError("integrate: vector field returned non-finite values");
  };

  Vec y = post_step ? post_step(z0) : z0;
  Vec k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), tmp(d), ynew(d), err(d);
  eval(y, k1);
  traj.times.push_back(0.0);
  traj.states.push_back(y);

  // Initial step guess.
  double h;
  {
    Vec sc(d);
    for (Index i = 0; i < d; ++i) sc(i) = opts.abs_tol + opts.rel_tol * std::abs(y(i));
    const double d0 = d ? std::sqrt(y.cwiseQuotient(sc).squaredNorm() / d) : 0.0;
    const double d1 = d ? std::sqrt(k1.cwiseQuotient(sc).squaredNorm() / d) : 0.0;
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    tmp = y + h0 * k1;
    eval(tmp, k2);
    const double d2 = d ? std::sqrt((k2 - k1).cwiseQuotient(sc).squaredNorm() / d) / h0 : 0.0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100.0 * h0, h1, opts.max_step, T});
  }

  double t = 0.0;
  bool last_rejected = false;
  std::size_t steps = 0;
  while (t < T) {
    if (++steps > opts.max_steps) throw StiffnessError("integrate: step budget exhausted");
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
      throw StiffnessError("integrate: step size underflow at t = " + std::to_string(t));
    bool final_step = false;
    if (t + h >= T) {
      h = T - t;
      final_step = true;
    }

    tmp = y + h * (C::a21 * k1);
    eval(tmp, k2);
    tmp = y + h * (C::a31 * k1 + C::a32 * k2);
    eval(tmp, k3);
    tmp = y + h * (C::a41 * k1 + C::a42 * k2 + C::a43 * k3);
    eval(tmp, k4);
    tmp = y + h * (C::a51 * k1 + C::a52 * k2 + C::a53 * k3 + C::a54 * k4);
    eval(tmp, k5);
    tmp = y + h * (C::a61 * k1 + C::a62 * k2 + C::a63 * k3 + C::a64 * k4 + C::a65 * k5);
    eval(tmp, k6);
    ynew = y + h * (C::a71 * k1 + C::a73 * k3 + C::a74 * k4 + C::a75 * k5 + C::a76 * k6);
    eval(ynew, k7);
    err = h * (C::e1 * k1 + C::e3 * k3 + C::e4 * k4 + C::e5 * k5 + C::e6 * k6 + C::e7 * k7);
    const double en = detail::error_norm(err, y, ynew, opts.abs_tol, opts.rel_tol);

    if (!std::isfinite(en)) {
      h *= 0.2;
      last_rejected = true;
      ++traj.meta.rejected_steps;
      continue;
    }

    if (en <= 1.0) {
      const double t_new = final_step ? T : t + h;
      // Dense output on (t, t_new); a sample equal to t_new is the endpoint itself.
      bool endpoint_sampled = false;
      if (next_sample < samples.size() && samples[next_sample] <= t_new) {
        const Vec r2 = ynew - y;
        const Vec r3 = h * k1 - r2;
        const Vec r4 = r2 - h * k7 - r3;
        const Vec r5 = h * (C::d1 * k1 + C::d3 * k3 + C::d4 * k4 + C::d5 * k5 + C::d6 * k6 + C::d7 * k7);
        for (; next_sample < samples.size() && samples[next_sample] <= t_new; ++next_sample) {
          const double s = samples[next_sample];
          if (s >= t_new) {
            endpoint_sampled = true;
            continue;
          }
          if (s <= t) continue;
          const double th = (s - t) / h, th1 = 1.0 - th;
          Vec ys = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
          if (post_step) ys = post_step(ys);
          traj.times.push_back(s);
          traj.states.push_back(std::move(ys));
        }
      }
      y = post_step ? post_step(ynew) : ynew;
      t = t_new;
      if (post_step)
        eval(y, k1);
      else
        k1 = k7;
      ++traj.meta.accepted_steps;
      if ((opts.record_steps || final_step || endpoint_sampled) && traj.times.back() < t) {
        traj.times.push_back(t);
        traj.states.push_back(y);
      }
      double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
      if (last_rejected) fac = std::min(1.0, fac);
      h = std::min(h * fac, opts.max_step);
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
      ++traj.meta.rejected_steps;
    }
  }
  return traj;
}

/// Gradient flow x' = phi_x, y' = -phi_y, optionally with gains
/// (x_i' = gx_i phi_xi, y_j' = -gy_j phi_yj) or projected onto an affine
/// subspace V (z' = Pi f(z), state re-projected after each accepted step).
inline Trajectory integrate_flow(const SaddleProblem& P, const Vec& z0, double T, const FlowOptions& opts = {}) {
  if (z0.size() != P.dim()) throw InputError("integrate_flow: initial state dimension mismatch");
  if (!z0.allFinite()) throw InputError("integrate_flow: initial state is not finite");
  if (opts.gains && opts.subspace)
    throw InputError("integrate_flow: gains combined with a projection subspace are not supported");
  VectorField field;
  std::function<Vec(const Vec&)> post;
  if (opts.gains) {
    if (opts.gains->dim() != P.dim()) throw InputError("integrate_flow: gains dimension mismatch");
    const Vec gamma = opts.gains->gamma();
    field = [&P, gamma](const Vec& z, Vec& out) {
      P.flow_field_into(z, out);
      out.array() *= gamma.array();
    };
  } else if (opts.subspace) {
    const AffineSubspace& V = *opts.subspace;
    if (V.ambient_dim() != P.dim()) throw InputError("integrate_flow: subspace dimension mismatch");
    if (!V.contains(z0, 1e-9)) throw InputError("integrate_flow: initial state is not on the affine subspace");
    const Mat Pi = V.directions().projector();
    field = [&P, Pi](const Vec& z, Vec& out) {
      Vec raw(z.size());
      P.flow_field_into(z, raw);
      out.noalias() = Pi * raw;
    };
    post = [V](const Vec& z) { return V.project(z); };
  } else {
    field = [&P](const Vec& z, Vec& out) { P.flow_field_into(z, out); };
  }
  Trajectory traj = integrate_field(field, z0, T, opts, post);
  traj.meta.problem_fingerprint = P.fingerprint();
  return traj;
}

/// Uniform grid 0, T/count, ..., T.
inline std::vector<double> uniform_times(double T, std::size_t count) {
  std::vector<double> ts(count + 1);
  for (std::size_t i = 0; i <= count; ++i) ts[i] = T * static_cast<double>(i) / static_cast<double>(count);
  return ts;
}

inline double skew_defect(const Mat& A) { return A.size() ? (A + A.transpose()).cwiseAbs().maxCoeff() : 0.0; }

/// States e^{tA} z0 of the linear limiting flow at the given times.
inline Trajectory linear_limit_flow(const Mat& A, const Vec& z0, const std::vector<double>& times) {
  if (A.rows() != A.cols() || A.cols() != z0.size()) throw InputError("linear_limit_flow: dimension mismatch");
  if (skew_defect(A) > 1e-8) throw InputError("linear_limit_flow: matrix is not skew-symmetric");
  Trajectory traj;
  traj.meta.integrator = "matexp";
  for (double t : times) {
    traj.times.push_back(t);
    traj.states.push_back(matexp_action(A, t, z0));
  }
  traj.validate();
  return traj;
}

/// Per-time Monte Carlo statistics of an SDE ensemble.
struct EnsembleStats {
  std::vector<double> times;
  std::vector<Vec> mean;
  std::vector<double> second_moment;         ///< E|z|^2
  std::vector<double> second_moment_stderr;  ///< standard error of E|z|^2
  std::size_t path_count = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
};

struct NoiseOptions {
  /// Record statistics every this many steps (0: about 200 records).
  std::size_t record_every = 0;
  /// Worker threads (0: SADDLEFLOW_THREADS or hardware concurrency).
  unsigned threads = 0;
};

/// Thread count from SADDLEFLOW_THREADS, falling back to the hardware.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("SADDLEFLOW_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline bool is_spd(const Mat& S) {
  if (S.rows() != S.cols()) return false;
  if (S.size() == 0) return true;
  if (!S.allFinite()) return false;
  if (max_abs(S - S.transpose()) > 1e-12 * std::max(1.0, max_abs(S))) return false;
  Eigen::LLT<Mat> llt(S);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

/// Euler-Maruyama ensemble of dx = phi_x dt + Sx dB^x, dy = -phi_y dt + Sy dB^y.
/// Path p draws from the counter stream (seed, p); partial sums are formed over
/// fixed 64-path blocks and combined pairwise, so results are bit-identical for
/// any thread count.
inline EnsembleStats simulate_noisy(const SaddleProblem& P, const Mat& Sx, const Mat& Sy, const Vec& z0, double T,
                                    double dt, std::size_t n_paths, std::uint64_t seed, const NoiseOptions& opts = {}) {
  const Index n = P.n(), m = P.m(), d = P.dim();
  if (Sx.rows() != n || Sy.rows() != m) throw InputError("simulate_noisy: noise matrix dimensions mismatch");
  if (!detail::is_spd(Sx)) throw InputError("simulate_noisy: Sigma_x must be symmetric positive definite");
  if (!detail::is_spd(Sy)) throw InputError("simulate_noisy: Sigma_y must be symmetric positive definite");
  if (z0.size() != d || !z0.allFinite()) throw InputError("simulate_noisy: bad initial state");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("simulate_noisy: dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("simulate_noisy: horizon must be positive");
  if (n_paths < 1) throw InputError("simulate_noisy: need at least one path");

  const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  const std::size_t every = opts.record_every ? opts.record_every : std::max<std::size_t>(1, steps / 200);
  std::vector<std::size_t> record_steps;
  for (std::size_t k = 0; k <= steps; k += every) record_steps.push_back(k);
  if (record_steps.back() != steps) record_steps.push_back(steps);
  const std::size_t R = record_steps.size();

  Mat Sigma = Mat::Zero(d, d);
  Sigma.topLeftCorner(n, n) = Sx;
  Sigma.bottomRightCorner(m, m) = Sy;
  const double sqdt = std::sqrt(dt);

  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (n_paths + kBlock - 1) / kBlock;
  // Per block and record: sum z (d), sum |z|^2, sum |z|^4.
  const std::size_t stride = static_cast<std::size_t>(d) + 2;
  std::vector<double> partial(blocks * R * stride, 0.0);

  auto run_block = [&](std::size_t b) {
    Vec z(d), f(d), xi(d), noise(d);
    double* out = partial.data() + b * R * stride;
    const std::size_t end = std::min(n_paths, (b + 1) * kBlock);
    for (std::size_t p = b * kBlock; p < end; ++p) {
      CounterRng rng(seed, p);
      z = z0;
      std::size_t r = 0;
      for (std::size_t k = 0;; ++k) {
        if (r < R && record_steps[r] == k) {
          double* slot = out + r * stride;
          const double sq = z.squaredNorm();
          for (Index i = 0; i < d; ++i) slot[i] += z(i);
          slot[d] += sq;
          slot[d + 1] += sq * sq;
          ++r;
        }
        if (k == steps) break;
        P.flow_field_into(z, f);
        for (Index i = 0; i < d; ++i) xi(i) = rng.normal();
        noise.noalias() = Sigma * xi;
        z += dt * f + sqdt * noise;
      }
      if (!z.allFinite()) throw EvaluationError("simulate_noisy: path diverged to non-finite values");
    }
  };

  const unsigned threads = std::min<unsigned>(opts.threads ? opts.threads : default_thread_count(),
                                              static_cast<unsigned>(blocks));
  if (threads <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b; (b = next.fetch_add(1)) < blocks;) run_block(b);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EnsembleStats stats;
  stats.path_count = n_paths;
  stats.seed = seed;
  stats.dt = dt;
  const double N = static_cast<double>(n_paths);
  std::vector<double> column(blocks);
  auto reduce = [&](std::size_t r, Index c) {
    for (std::size_t b = 0; b < blocks; ++b) column[b] = partial[(b * R + r) * stride + static_cast<std::size_t>(c)];
    return detail::pairwise_sum(column.data(), blocks);
  };
  for (std::size_t r = 0; r < R; ++r) {
    stats.times.push_back(static_cast<double>(record_steps[r]) * dt);
    Vec mean(d);
    for (Index i = 0; i < d; ++i) mean(i) = reduce(r, i) / N;
    const double m2 = reduce(r, d) / N;
    const double m4 = reduce(r, d + 1) / N;
    stats.mean.push_back(std::move(mean));
    stats.second_moment.push_back(m2);
    const double var = n_paths > 1 ? std::max(0.0, (m4 - m2 * m2) * N / (N - 1.0)) : 0.0;
    stats.second_moment_stderr.push_back(n_paths > 1 ? std::sqrt(var / N)
                                                     : std::numeric_limits<double>::infinity());
  }
  return stats;
}

}  // namespace saddleflow

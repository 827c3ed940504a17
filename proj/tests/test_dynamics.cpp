#include <catch_amalgamated.hpp>

#include <numbers>

#include "oracles.hpp"

using namespace saddleflow;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Mat m1(double v) { return Mat::Constant(1, 1, v); }
QuadraticSaddle bilinear() { return QuadraticSaddle(m1(0), m1(0), m1(1), Vec::Zero(1), Vec::Zero(1)); }
QuadraticSaddle strict() { return QuadraticSaddle(m1(-1), m1(1), m1(0), Vec::Zero(1), Vec::Zero(1)); }

}  // namespace

TEST_CASE("bilinear flow traces the unit circle and closes after one period") {
  FlowOptions o;
  o.sample_times = uniform_times(2 * pi, 500);
  const Trajectory tr = integrate_flow(bilinear(), vec({1, 0}), 2 * pi, o);
  tr.validate();
  CHECK((tr.final_state() - vec({1, 0})).norm() < 1e-6);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(std::abs(tr.states[i].norm() - 1.0) < 1e-7);
    CHECK((tr.states[i] - oracle::rotation(1.0, tr.times[i], vec({1, 0}))).norm() < 1e-6);
  }
}

TEST_CASE("strict quadratic decays to the origin") {
  const Trajectory tr = integrate_flow(strict(), vec({1, 1}), 20.0);
  CHECK(tr.final_state().norm() < 1e-6);
  // Closed form e^{-t}.
  for (std::size_t i = 0; i < tr.size(); i += 7)
    CHECK((tr.states[i] - std::exp(-tr.times[i]) * vec({1, 1})).norm() < 1e-7);
}

TEST_CASE("a trajectory started at a saddle stays there") {
  CounterRng rng(1);
  const Vec zs = random_vector(rng, 5);
  const QuadraticSaddle Q = random_quadratic(rng, 3, 2, {.saddle = zs});
  const Trajectory tr = integrate_flow(Q, zs, 10.0);
  for (const auto& z : tr.states) CHECK((z - zs).norm() < 1e-10);
}

TEST_CASE("trajectory invariants and dense output at requested times") {
  CounterRng rng(2);
  const QuadraticSaddle Q = random_quadratic(rng, 2, 2);
  FlowOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  o.sample_times = {0.0, 0.123, 0.5, 1.7, 3.0, 3.0};
  o.record_steps = false;
  const Vec z0 = random_vector(rng, 4);
  const Trajectory tr = integrate_flow(Q, z0, 3.0, o);
  tr.validate();
  REQUIRE(tr.times == std::vector<double>({0.0, 0.123, 0.5, 1.7, 3.0}));
  // Exact solution of z' = J z + f0 through the augmented matrix exponential.
  Mat aug = Mat::Zero(5, 5);
  aug.topLeftCorner(4, 4) = Q.flow_jacobian();
  aug.topRightCorner(4, 1) = Q.flow_offset();
  Vec z0a(5);
  z0a << z0, 1.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Vec exact = (oracle::taylor_exp(aug, tr.times[i]) * z0a).head(4);
    CHECK((tr.states[i] - exact).norm() < 1e-7 * (1 + exact.norm()));
  }
  CHECK(tr.meta.integrator == "dopri5");
  CHECK(tr.meta.problem_fingerprint == Q.fingerprint());
  CHECK(tr.meta.accepted_steps > 0);
}

TEST_CASE("sample times outside the horizon are rejected") {
  FlowOptions o;
  o.sample_times = {-1.0};
  CHECK_THROWS_AS(integrate_flow(bilinear(), vec({1, 0}), 1.0, o), InputError);
  o.sample_times = {2.0};
  CHECK_THROWS_AS(integrate_flow(bilinear(), vec({1, 0}), 1.0, o), InputError);
  CHECK_THROWS_AS(integrate_flow(bilinear(), vec({1, 0}), -1.0), InputError);
  CHECK_THROWS_AS(integrate_flow(bilinear(), vec({1}), 1.0), InputError);
}

TEST_CASE("step-size underflow raises a stiffness error") {
  // z' = z^2 from z = 1 blows up at t = 1.
  VectorField f = [](const Vec& z, Vec& out) { out = z.cwiseProduct(z); };
  CHECK_THROWS_AS(integrate_field(f, vec({1.0}), 2.0, FlowOptions{}), StiffnessError);
}

TEST_CASE("projected flow stays on the affine subspace") {
  CounterRng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const QuadraticSaddle Q = random_quadratic(rng, 3, 2, {.degenerate = trial % 2 == 1});
    const Subspace dirs = Subspace::span(random_matrix(rng, 5, 1 + trial % 4));
    const AffineSubspace V(random_vector(rng, 5), dirs);
    FlowOptions o;
    o.subspace = V;
    const Vec z0 = V.project(random_vector(rng, 5));
    const Trajectory tr = integrate_flow(Q, z0, 10.0, o);
    for (const auto& z : tr.states) CHECK(V.distance(z) < 1e-8);
    // Velocity lies in the direction space: Pi z' = z'.
    const Mat Pi = dirs.projector();
    for (std::size_t i = 1; i < tr.size(); i += 5) {
      const Vec dz = tr.states[i] - tr.states[i - 1];
      CHECK((Pi * dz - dz).norm() < 1e-8);
    }
  }
}

TEST_CASE("projected flow input errors") {
  const AffineSubspace V(vec({0, 1}), Subspace::span(vec({1, 0})));
  FlowOptions o;
  o.subspace = V;
  CHECK_THROWS_AS(integrate_flow(bilinear(), vec({0, 0}), 1.0, o), InputError);
  o.gains = GainVector(vec({2}), vec({1}));
  CHECK_THROWS_AS(integrate_flow(bilinear(), vec({0, 1}), 1.0, o), InputError);
}

TEST_CASE("gains flow of the bilinear problem has the rescaled closed form") {
  // x' = 4y, y' = -x: x = cos 2t, y = -sin(2t)/2 from (1, 0).
  FlowOptions o;
  o.gains = GainVector(vec({4}), vec({1}));
  o.sample_times = uniform_times(5.0, 50);
  o.record_steps = false;
  const Trajectory tr = integrate_flow(bilinear(), vec({1, 0}), 5.0, o);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double t = tr.times[i];
    CHECK((tr.states[i] - vec({std::cos(2 * t), -0.5 * std::sin(2 * t)})).norm() < 1e-6);
  }
}

TEST_CASE("linear limiting flow") {
  const Trajectory c = linear_limit_flow(Mat::Zero(3, 3), vec({1, 2, 3}), {0.0, 1.0, 5.0});
  for (const auto& z : c.states) CHECK((z - vec({1, 2, 3})).norm() == 0.0);

  Mat R(2, 2);
  R << 0, 1, -1, 0;
  const Trajectory r = linear_limit_flow(R, vec({1, 0}), {0.0, pi});
  CHECK((r.states[1] - vec({-1, 0})).norm() < 1e-14);

  Mat A = Mat::Zero(4, 4);
  A(0, 1) = 1.5;
  A(1, 0) = -1.5;
  A(2, 3) = -0.3;
  A(3, 2) = 0.3;
  const Vec z0 = vec({1, 2, -1, 0.5});
  const Trajectory b = linear_limit_flow(A, z0, uniform_times(20.0, 40));
  for (const auto& z : b.states) {
    CHECK(std::abs(z.head(2).norm() - z0.head(2).norm()) < 1e-9);
    CHECK(std::abs(z.tail(2).norm() - z0.tail(2).norm()) < 1e-9);
  }
  Mat N = R;
  N(0, 0) = 1e-3;
  CHECK_THROWS_AS(linear_limit_flow(N, vec({1, 0}), {0.0, 1.0}), InputError);
}

TEST_CASE("vanishing noise reproduces the deterministic trajectory") {
  const Mat S = 1e-8 * Mat::Identity(1, 1);
  const EnsembleStats st = simulate_noisy(strict(), S, S, vec({1, 1}), 5.0, 1e-4, 64, 3);
  for (std::size_t i = 0; i < st.times.size(); ++i) {
    const double e = std::exp(-st.times[i]);
    CHECK((st.mean[i] - vec({e, e})).norm() < 1e-4);
    CHECK(std::abs(st.second_moment[i] - 2 * e * e) < 1e-4);
  }
}

TEST_CASE("stationary OU variance of the strict quadratic") {
  const Mat I = Mat::Identity(1, 1);
  const EnsembleStats st = simulate_noisy(strict(), I, I, vec({0, 0}), 6.0, 1e-3, 4000, 5);
  CHECK(st.times.back() == Approx(6.0));
  const double late = st.second_moment.back();
  CHECK(std::abs(late - 1.0) < 0.15);
  // Whole curve against the closed form within 5 standard errors.
  for (std::size_t i = 0; i < st.times.size(); i += 10)
    CHECK(std::abs(st.second_moment[i] - oracle::ou_second_moment(st.times[i])) <=
          5 * st.second_moment_stderr[i] + 2e-3);
}

TEST_CASE("bilinear second moment grows like 2t") {
  const Mat I = Mat::Identity(1, 1);
  const EnsembleStats st = simulate_noisy(bilinear(), I, I, vec({0, 0}), 4.0, 1e-3, 2000, 9);
  for (std::size_t i = 0; i < st.times.size(); i += 10)
    CHECK(std::abs(st.second_moment[i] - 2 * st.times[i]) <= 5 * st.second_moment_stderr[i] + 1e-2);
}

TEST_CASE("ensemble statistics are reproducible across thread layouts") {
  CounterRng rng(4);
  const QuadraticSaddle Q = random_quadratic(rng, 2, 1);
  Mat Sx(2, 2);
  Sx << 1, 0.2, 0.2, 0.5;
  const Mat Sy = 0.7 * Mat::Identity(1, 1);
  NoiseOptions one, three;
  one.threads = 1;
  three.threads = 3;
  const Vec z0 = random_vector(rng, 3);
  const EnsembleStats a = simulate_noisy(Q, Sx, Sy, z0, 1.0, 1e-2, 300, 42, one);
  const EnsembleStats b = simulate_noisy(Q, Sx, Sy, z0, 1.0, 1e-2, 300, 42, three);
  const EnsembleStats c = simulate_noisy(Q, Sx, Sy, z0, 1.0, 1e-2, 300, 43, one);
  REQUIRE(a.times == b.times);
  CHECK(a.second_moment == b.second_moment);
  CHECK(a.second_moment_stderr == b.second_moment_stderr);
  for (std::size_t i = 0; i < a.mean.size(); ++i) CHECK(a.mean[i] == b.mean[i]);
  CHECK(a.second_moment != c.second_moment);
  // Jensen: E|z|^2 >= |E z|^2.
  for (std::size_t i = 0; i < a.times.size(); ++i) CHECK(a.second_moment[i] >= a.mean[i].squaredNorm() - 1e-9);
}

TEST_CASE("noisy simulation input errors and the single-path case") {
  const Mat I = Mat::Identity(1, 1);
  CHECK_THROWS_AS(simulate_noisy(bilinear(), -I, I, vec({0, 0}), 1.0, 1e-2, 10, 1), InputError);
  Mat asym(1, 2);
  asym << 1, 0;
  CHECK_THROWS_AS(simulate_noisy(bilinear(), asym, I, vec({0, 0}), 1.0, 1e-2, 10, 1), InputError);
  CHECK_THROWS_AS(simulate_noisy(bilinear(), I, I, vec({0, 0}), 1.0, 0.0, 10, 1), InputError);
  CHECK_THROWS_AS(simulate_noisy(bilinear(), I, I, vec({0, 0}), 1.0, 1e-2, 0, 1), InputError);
  const EnsembleStats one = simulate_noisy(bilinear(), I, I, vec({0, 0}), 1.0, 1e-2, 1, 1);
  CHECK(one.path_count == 1);
  CHECK(std::isinf(one.second_moment_stderr.back()));
}

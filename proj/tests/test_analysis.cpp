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
std::shared_ptr<GenericSaddle> quartic() { return GenericSaddle::from_expression(1, 1, "-x1^4/4 + x1*y1"); }

}  // namespace

TEST_CASE("find_saddle recovers planted saddles") {
  CounterRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec zs = random_vector(rng, 5);
    const QuadraticSaddle Q = random_quadratic(rng, 3, 2, {.saddle = zs});
    const Vec z = find_saddle(Q, Vec::Zero(5));
    CHECK(flow_field(Q, z).norm() < 1e-9);
    CHECK((z - zs).norm() < 1e-7 * (1 + zs.norm()));
  }
  const Vec zq = find_saddle(*quartic(), vec({0.7, -0.4}));
  CHECK(zq.norm() < 1e-6);
}

TEST_CASE("find_saddle reports a missing saddle") {
  // phi = x: unbounded in x, no stationary point.
  const QuadraticSaddle Q(m1(0), m1(0), m1(0), vec({1}), vec({0}));
  CHECK_THROWS_AS(find_saddle(Q, vec({0, 0})), NotFoundError);
  CHECK_THROWS_AS(find_saddle(Q, vec({0})), InputError);
}

TEST_CASE("saddle_set of a degenerate quadratic") {
  // phi = x1*y1 + 0*x2: saddle set is the x2 axis.
  Mat Pxy(2, 1);
  Pxy << 1, 0;
  const QuadraticSaddle Q(Mat::Zero(2, 2), m1(0), Pxy, Vec::Zero(2), Vec::Zero(1));
  const SaddleSet s = saddle_set(Q);
  CHECK_FALSE(s.empty);
  CHECK(s.exactness == Exactness::Exact);
  REQUIRE(s.directions.dim() == 1);
  CHECK(std::abs(std::abs(s.directions.basis()(1, 0)) - 1.0) < 1e-12);
  CHECK(s.representative.norm() < 1e-12);

  CounterRng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const QuadraticSaddle R = random_quadratic(rng, 3, 3, {.degenerate = true});
    const SaddleSet ss = saddle_set(R);
    REQUIRE_FALSE(ss.empty);
    CHECK(flow_field(R, ss.representative).norm() < 1e-8);
    // Orthogonal to the direction space and every direction is stationary.
    CHECK(ss.directions.project(ss.representative).norm() < 1e-9);
    for (Index j = 0; j < ss.directions.dim(); ++j)
      CHECK(flow_field(R, ss.representative + 3.0 * ss.directions.basis().col(j)).norm() < 1e-8);
  }

  const QuadraticSaddle none(m1(0), m1(0), m1(0), vec({1}), vec({0}));
  CHECK(saddle_set(none).empty);
}

TEST_CASE("S_linear of the canonical examples") {
  CHECK(compute_S_linear(bilinear(), vec({0, 0})).is_full());
  CHECK(compute_S_linear(strict(), vec({0, 0})).is_zero());
  CHECK_THROWS_AS(compute_S_linear(bilinear(), vec({1, 0})), InputError);
  // Quartic: B(0) = 0 so S_linear is everything locally.
  CHECK(compute_S_linear(*quartic(), vec({0, 0})).is_full());
}

TEST_CASE("S_linear of planted oscillators contains the planted block") {
  CounterRng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3, m = 1 + trial % 3;
    const int k = 1 + trial % 2;
    const QuadraticSaddle Q = planted_oscillator(rng, n, m, {.osc_x = k, .osc_y = k});
    const Vec zs = saddle_set(Q).representative;
    const Subspace S = compute_S_linear(Q, zs);
    CHECK(S.dim() >= 2 * std::min({k, n, m}));
    CHECK(oracle::invariance_defect(matrix_A(Q, zs), S) < 1e-9);
    CHECK((matrix_B(Q, zs) * S.basis()).norm() < 1e-9);
    const CheckReport r = check_S_linear_routes(Q, zs);
    CHECK(r.outcome == Outcome::Pass);
  }
}

TEST_CASE("certify: verdict table") {
  const Certificate b = certify(bilinear(), vec({0, 0}));
  CHECK(b.verdict == Verdict::PossiblyOscillatory);
  CHECK(b.oscillation_modes.dim() == 2);
  CHECK(b.exactness == Exactness::Exact);

  const Certificate s = certify(strict(), vec({0, 0}));
  CHECK(s.verdict == Verdict::GloballyConvergent);
  CHECK(s.s_linear.is_zero());

  // phi = 0: every point is a saddle, nothing moves.
  const QuadraticSaddle zero(m1(0), m1(0), m1(0), vec({0}), vec({0}));
  const Certificate z = certify(zero, vec({0, 0}));
  CHECK(z.verdict == Verdict::GloballyConvergent);
  CHECK(z.s_linear.is_full());
  CHECK(z.oscillation_modes.is_zero());

  // phi = x1*y1 with an idle x2: modes are the (x1, y1) plane.
  Mat Pxy(2, 1);
  Pxy << 1, 0;
  const QuadraticSaddle idle(Mat::Zero(2, 2), m1(0), Pxy, Vec::Zero(2), Vec::Zero(1));
  const Certificate c = certify(idle, Vec::Zero(3));
  CHECK(c.verdict == Verdict::PossiblyOscillatory);
  CHECK(c.oscillation_modes.dim() == 2);
  CHECK(c.saddle_directions.dim() == 1);

  CHECK_THROWS_AS(certify(bilinear(), vec({0.5, 0})), InputError);
}

TEST_CASE("certify: quartic is rejected by every kernel probe") {
  const Certificate q = certify(*quartic(), vec({0, 0}));
  CHECK(q.verdict == Verdict::Inconclusive);
  CHECK(q.exactness == Exactness::LocalOnly);
  CHECK(q.probes_tested > 0);
  CHECK(q.probes_passed == 0);
  CHECK(q.worst_probe_residual > 0.1);
  // Integration confirms convergence to the origin.
  const Trajectory tr = integrate_flow(*quartic(), vec({1, 0}), 2000.0);
  CHECK(tr.final_state().norm() < 1e-1);
}

TEST_CASE("certify invariants on random quadratics") {
  CounterRng rng(14);
  for (int trial = 0; trial < 40; ++trial) {
    const QuadraticSaddle Q = trial % 2 ? random_quadratic(rng, 3, 2, {.degenerate = true})
                                        : planted_oscillator(rng, 3, 2);
    const SaddleSet ss = saddle_set(Q);
    REQUIRE_FALSE(ss.empty);
    const Certificate c = certify(Q, ss.representative);
    CHECK((c.verdict == Verdict::GloballyConvergent) == c.oscillation_modes.is_zero());
    CHECK(c.oscillation_modes.is_subset_of(c.s_linear));
    CHECK(c.invariance_residual < 1e-9);
    CHECK(c.kernel_residual < 1e-9);
    // Modes are orthogonal to the saddle directions.
    CHECK((c.oscillation_modes.basis().transpose() * c.saddle_directions.basis()).norm() < 1e-9);
  }
}

TEST_CASE("kernel condition accepts linear flows of quadratics and rejects quartic ones") {
  Mat A(2, 2);
  A << 0, 1, -1, 0;
  const Trajectory circle = linear_limit_flow(A, vec({1, 0}), uniform_times(2 * pi, 64));
  const KernelCheck ok = check_kernel_condition(bilinear(), vec({0, 0}), circle);
  CHECK(ok.holds);
  CHECK(ok.worst_residual < 1e-12);

  const KernelCheck bad = check_kernel_condition(*quartic(), vec({0, 0}), circle);
  CHECK_FALSE(bad.holds);
  CHECK(bad.worst_residual > 0.1);
  CHECK(bad.r_at_worst == Approx(1.0));
  CHECK_THROWS_AS(check_kernel_condition(bilinear(), vec({0, 0}), circle, 0), InputError);
}

TEST_CASE("Lagrangian W subspace and S") {
  CounterRng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3, m = 1 + trial % 2;
    const LinearConstraintLagrangian L = random_quadratic_lagrangian(rng, n, m);
    const auto Q = L.as_quadratic();
    REQUIRE(Q);
    const SaddleSet ss = saddle_set(*Q);
    REQUIRE_FALSE(ss.empty);
    const LagrangianS S = compute_S_lagrangian(L, ss.representative);
    CHECK(S.W.exact);
    const Mat Uxx = L.utility().hessian(Vec::Zero(n));
    CHECK(projector_distance(S.W.affine.directions(), nullspace(Uxx)) < 1e-8);
    CHECK(projector_distance(S.modes, compute_S_linear(L, ss.representative)) < 1e-8);
  }
}

TEST_CASE("Lagrangian W of a quartic utility is exact and trivial") {
  ExpressionParser p({"x1", "x2"});
  Mat D(1, 2);
  D << 1, 1;
  const LinearConstraintLagrangian L(Utility(p.parse("-x1^4 - (x1 - x2)^2")), D, vec({0}));
  const WSubspace W = lagrangian_W_subspace(L, vec({0, 0}));
  CHECK(W.exact);
  CHECK(W.affine.directions().is_zero());
  // Quadratic part alone has the diagonal as its lineality space.
  const LinearConstraintLagrangian L2(Utility(p.parse("-(x1 - x2)^2")), D, vec({0}));
  const WSubspace W2 = lagrangian_W_subspace(L2, vec({0, 0}));
  REQUIRE(W2.affine.directions().dim() == 1);
  CHECK(std::abs(W2.affine.directions().basis().col(0).dot(vec({1, 1})) / std::sqrt(2.0)) == Approx(1.0));
  CHECK_THROWS_AS(lagrangian_W_subspace(L2, vec({0})), InputError);
}

TEST_CASE("conserved quantity of the bilinear flow") {
  Mat A(2, 2);
  A << 0, 1, -1, 0;
  CounterRng rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec v = random_vector(rng, 2), z0 = random_vector(rng, 2);
    const double w0 = conserved_quantity_W(A, v, 0.0, z0);
    CHECK(w0 == Approx(v.dot(z0) * v.dot(z0)));
    for (double t : {0.3, 2.0, 7.5, 20.0})
      CHECK(std::abs(conserved_quantity_W(A, v, t, oracle::rotation(1.0, t, z0)) - w0) < 1e-10 * (1 + w0));
  }
  Mat N = A;
  N(0, 0) = 1;
  CHECK_THROWS_AS(conserved_quantity_W(N, vec({1, 0}), 1.0, vec({1, 0})), InputError);
  CHECK_THROWS_AS(conserved_quantity_W(A, vec({1}), 1.0, vec({1, 0})), InputError);
}

TEST_CASE("time average over whole periods is the saddle") {
  FlowOptions o;
  o.sample_times = uniform_times(4 * pi, 4000);
  o.record_steps = false;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  const Trajectory tr = integrate_flow(bilinear(), vec({1, 0.5}), 4 * pi, o);
  CHECK(average_position(tr).norm() < 1e-6);
  CHECK(average_position(tr, {.tail_fraction = 0.5}).norm() < 1e-6);
  CHECK_THROWS_AS(average_position(tr, {.tail_fraction = 0.0}), InputError);
  CHECK_THROWS_AS(average_position(tr, {.min_horizon = 100.0}), InputError);
}

TEST_CASE("projected S_linear and projected equilibria") {
  // Bilinear restricted to the y axis: projected flow is zero there.
  const AffineSubspace V(vec({0, 0}), Subspace::span(vec({0, 1})));
  const Subspace S = projected_S_linear(bilinear(), V, vec({0, 0.3}));
  CHECK(S.equals(V.directions()));
  CHECK_THROWS_AS(projected_S_linear(bilinear(), V, vec({1, 0})), InputError);
  const AffineSubspace shifted(vec({1, 0}), Subspace::span(vec({0, 1})));
  CHECK_THROWS_AS(projected_S_linear(bilinear(), shifted, vec({1, 0})), InputError);

  // Strict quadratic on the line x + y = 1: equilibrium at the foot point.
  const AffineSubspace line(vec({0.5, 0.5}), Subspace::span(vec({1, -1})));
  const Vec ze = projected_equilibrium(strict(), line);
  CHECK(line.contains(ze));
  CHECK((line.directions().projector() * flow_field(strict(), ze)).norm() < 1e-12);
  CHECK(projected_S_linear(strict(), line, ze).is_zero());

  // Bilinear on a line crossing the x axis: Pi F vanishes only where x = 0.
  const AffineSubspace diag(vec({0, 0}), Subspace::span(vec({1, 1})));
  const Vec zd = projected_equilibrium(bilinear(), diag);
  CHECK(zd.norm() < 1e-12);
}

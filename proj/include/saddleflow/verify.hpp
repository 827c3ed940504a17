#pragma once
// Seeded suites of harness checks against one problem, as run by `verify`.

#include <algorithm>
#include <string>
#include <vector>

#include "saddleflow/harness.hpp"
#include "saddleflow/io.hpp"

namespace saddleflow {

struct SuiteContext {
  const ScenarioConfig* config = nullptr;
  Vec saddle;
  Certificate certificate;
};

namespace verify_detail {

inline std::uint64_t suite_stream(const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ull;
  return h;
}

inline void tag(CheckReport& r, const std::string& suite, int instance, std::uint64_t seed) {
  r.name = suite;
  r.context["instance"] = std::to_string(instance);
  r.context["seed"] = std::to_string(seed);
}

inline Vec random_start(CounterRng& rng, const Vec& center) { return center + random_vector(rng, center.size()); }

}  // namespace verify_detail

inline std::vector<CheckReport> run_suite(const std::string& suite, const SuiteContext& ctx, const VerifyBlock& vb) {
  using namespace verify_detail;
  const ProblemPtr& P = ctx.config->problem.problem;
  const Vec& zbar = ctx.saddle;
  CounterRng rng(vb.seed, suite_stream(suite));
  std::vector<CheckReport> out;
  auto push = [&](CheckReport r, int i) {
    tag(r, suite, i, vb.seed);
    out.push_back(std::move(r));
  };

  if (suite == "pathwise") {
    for (int i = 0; i < vb.instances; ++i) {
      const Vec a = random_start(rng, zbar), b = random_start(rng, zbar);
      push(check_pathwise_stability(*P, a, b, vb.horizon), i);
    }
  } else if (suite == "gains") {
    for (int i = 0; i < vb.instances; ++i) {
      GainVector g = ctx.config->problem.gains ? *ctx.config->problem.gains : GainVector::ones(P->n(), P->m());
      if (!ctx.config->problem.gains || i > 0) {
        Vec gx(P->n()), gy(P->m());
        for (Index k = 0; k < gx.size(); ++k) gx(k) = rng.uniform(0.25, 4.0);
        for (Index k = 0; k < gy.size(); ++k) gy(k) = rng.uniform(0.25, 4.0);
        g = GainVector(gx, gy);
      }
      push(check_gains_equivalence(P, g, random_start(rng, zbar), vb.horizon), i);
    }
  } else if (suite == "slinear") {
    push(check_S_linear_routes(*P, zbar), 0);
  } else if (suite == "orthogonality") {
    const auto Q = P->as_quadratic();
    if (!Q) {
      push(CheckReport::vacuous("orthogonality", "saddle set directions are only computed for quadratic problems"), 0);
    } else {
      const SaddleSet ss = saddle_set(*Q);
      if (ss.empty || ss.directions.is_zero()) {
        push(CheckReport::vacuous("orthogonality", "saddle set is a single point"), 0);
        return out;
      }
      for (int i = 0; i < vb.instances; ++i) {
        FlowOptions o = detail::tight_flow();
        const Trajectory tr = integrate_flow(*Q, random_start(rng, zbar), vb.horizon, o);
        push(check_orthogonality(*Q, tr, ss), i);
      }
    }
  } else if (suite == "limit_fit") {
    for (int i = 0; i < vb.instances; ++i) {
      FlowOptions o = detail::tight_flow();
      const double T = 10.0 * vb.horizon;
      o.sample_times = uniform_times(T, 2001);
      o.record_steps = false;
      const Trajectory tr = integrate_flow(*P, random_start(rng, zbar), T, o);
      push(fit_limit_to_linear_ode(*P, zbar, tr), i);
    }
  } else if (suite == "conserved") {
    const auto Q = P->as_quadratic();
    const Subspace& S = ctx.certificate.s_linear;
    if (!Q || S.is_zero()) {
      push(CheckReport::vacuous("conserved", Q ? "S_linear is trivial" : "conserved quantity needs a quadratic problem"),
           0);
    } else {
      for (int i = 0; i < vb.instances; ++i) {
        const Vec v = S.basis() * random_vector(rng, S.dim());
        push(check_conserved_quantity(*Q, zbar, v, random_start(rng, zbar), vb.horizon), i);
      }
    }
  } else if (suite == "variance") {
    if (!ctx.config->noise) {
      push(CheckReport::vacuous("variance", "config has no noise block"), 0);
    } else {
      const NoiseBlock& nb = *ctx.config->noise;
      const EnsembleStats st = simulate_noisy(*P, nb.sigma_x, nb.sigma_y, nb.z0, nb.T, nb.dt, nb.paths, nb.seed);
      const auto w = nb.window ? *nb.window : std::make_pair(nb.T / 2, nb.T);
      VarianceExpectation ex;
      if (nb.expected_slope) {
        ex.kind = VarianceExpectation::Kind::Slope;
        ex.slope = *nb.expected_slope;
      } else {
        ex.kind = ctx.certificate.oscillation_modes.is_zero() ? VarianceExpectation::Kind::Zero
                                                               : VarianceExpectation::Kind::Positive;
      }
      push(estimate_variance_growth(st, w.first, w.second, ex), 0);
    }
  } else {
    throw InputError("unknown suite '" + suite + "'");
  }
  return out;
}

/// Runs the selected suites; reports ordered by suite name then instance.
inline std::vector<CheckReport> run_suites(const SuiteContext& ctx, const VerifyBlock& vb) {
  std::vector<std::string> names = vb.suites;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<CheckReport> all;
  for (const auto& s : names) {
    auto part = run_suite(s, ctx, vb);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

}  // namespace saddleflow

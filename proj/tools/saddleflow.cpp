// saddleflow: simulate, certify, noise and verify subcommands over a JSON
// scenario config. Exit codes: 0 ok, 1 check failure, 2 config, 3 numeric.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "saddleflow/saddleflow.hpp"

namespace sf = saddleflow;
using sf::json;

namespace {

constexpr int kOk = 0, kCheckFailure = 1, kConfigError = 2, kNumericError = 3;

struct Common {
  std::string config;
  std::string out;
  bool no_timestamp = false;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json header(const Common& c, const char* command, const sf::ScenarioConfig& cfg) {
  json j;
  j["tool"] = "saddleflow";
  j["command"] = command;
  j["config"] = c.config;
  j["problem_fingerprint"] = cfg.problem.problem->fingerprint();
  if (!c.no_timestamp) j["timestamp"] = utc_timestamp();
  return j;
}

void emit_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream os(path);
  if (!os) throw sf::InputError("cannot write '" + path + "'");
  os << j.dump(2) << "\n";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw sf::InputError("cannot write '" + path + "'");
  return os;
}

sf::Vec locate_saddle(const sf::SaddleProblem& P, const std::optional<sf::Vec>& guess) {
  return sf::find_saddle(P, guess ? *guess : sf::Vec::Zero(P.dim()));
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::optional<double> T;
  std::string summary;
};

int cmd_simulate(const SimulateArgs& a) {
  const sf::ScenarioConfig cfg = sf::load_scenario(a.common.config);
  if (!cfg.simulate) throw sf::InputError("config: 'simulate' block required");
  sf::SimulateBlock s = *cfg.simulate;
  if (a.T) {
    if (!(*a.T > 0.0)) throw sf::InputError("--T: must be positive");
    s.T = *a.T;
  }
  const sf::SaddleProblem& P = *cfg.problem.problem;
  sf::FlowOptions o;
  o.rel_tol = s.rel_tol;
  o.abs_tol = s.abs_tol;
  o.max_step = s.max_step;
  o.gains = cfg.problem.gains;
  o.subspace = s.subspace;
  if (s.samples >= 2) {
    o.sample_times = sf::uniform_times(s.T, s.samples - 1);
    o.record_steps = false;
  }
  const sf::Trajectory tr = sf::integrate_flow(P, s.z0, s.T, o);

  const std::string out = a.common.out.empty() ? "trajectory.csv" : a.common.out;
  {
    auto os = open_out(out);
    sf::write_trajectory_csv(os, tr);
  }
  json j = header(a.common, "simulate", cfg);
  j["trajectory_csv"] = out;
  j["samples"] = tr.size();
  j["accepted_steps"] = tr.meta.accepted_steps;
  j["rejected_steps"] = tr.meta.rejected_steps;
  j["final_state"] = sf::io_detail::to_json(tr.final_state());
  try {
    sf::Vec zbar;
    if (s.subspace) {
      const auto Q = P.as_quadratic();
      if (!Q) throw sf::NotFoundError(sf::NotFoundError::Reason::Divergence, "projected saddle needs a quadratic");
      zbar = sf::projected_equilibrium(*Q, *s.subspace);
    } else {
      zbar = locate_saddle(P, std::nullopt);
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& z : tr.states) {
      const double d = (z - zbar).norm();
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    j["saddle"] = sf::io_detail::to_json(zbar);
    j["final_distance"] = (tr.final_state() - zbar).norm();
    j["distance_min"] = lo;
    j["distance_max"] = hi;
  } catch (const sf::NotFoundError& e) {
    j["saddle"] = nullptr;
    j["note"] = std::string("no saddle located: ") + e.what();
  }
  emit_json(j, a.summary);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_certify(const Common& c) {
  const sf::ScenarioConfig cfg = sf::load_scenario(c.config);
  const sf::CertifyBlock blk = cfg.certify ? *cfg.certify : sf::CertifyBlock{};
  const sf::SaddleProblem& P = *cfg.problem.problem;
  const sf::Vec zbar = locate_saddle(P, blk.guess);
  const sf::Certificate cert = sf::certify(P, zbar, blk.options);
  json j = header(c, "certify", cfg);
  j["certificate"] = sf::certificate_json(cert, P);
  if (auto L = std::dynamic_pointer_cast<const sf::LinearConstraintLagrangian>(cfg.problem.problem)) {
    const sf::LagrangianS ls = sf::compute_S_lagrangian(*L, zbar);
    j["lagrangian_cross_check"] = {{"modes", sf::subspace_json(ls.modes)},
                                   {"w_dim", ls.W.affine.directions().dim()},
                                   {"w_exact", ls.W.exact},
                                   {"projector_distance", sf::projector_distance(ls.modes, cert.s_linear)}};
  }
  emit_json(j, c.out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct NoiseArgs {
  Common common;
  std::optional<std::size_t> paths;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  bool check_dt = false;
  std::string report;
};

int cmd_noise(const NoiseArgs& a) {
  const sf::ScenarioConfig cfg = sf::load_scenario(a.common.config);
  if (!cfg.noise) throw sf::InputError("config: 'noise' block required");
  sf::NoiseBlock nb = *cfg.noise;
  if (a.paths) {
    if (*a.paths < 1) throw sf::InputError("--paths: must be at least 1");
    nb.paths = *a.paths;
  }
  if (a.seed) nb.seed = *a.seed;
  if (a.dt) {
    if (!(*a.dt > 0.0)) throw sf::InputError("--dt: must be positive");
    nb.dt = *a.dt;
  }
  const auto window = nb.window ? *nb.window : std::make_pair(nb.T / 2, nb.T);
  const sf::SaddleProblem& P = *cfg.problem.problem;

  auto run = [&](double dt) {
    const sf::EnsembleStats st = sf::simulate_noisy(P, nb.sigma_x, nb.sigma_y, nb.z0, nb.T, dt, nb.paths, nb.seed);
    return std::make_pair(st, sf::fit_second_moment(st, window.first, window.second));
  };
  const auto [stats, fit] = run(nb.dt);
  const std::string out = a.common.out.empty() ? "ensemble.csv" : a.common.out;
  {
    auto os = open_out(out);
    sf::write_ensemble_csv(os, stats);
  }
  json j = header(a.common, "noise", cfg);
  j["ensemble_csv"] = out;
  j["paths"] = nb.paths;
  j["seed"] = nb.seed;
  j["dt"] = nb.dt;
  j["window"] = {window.first, window.second};
  j["slope"] = fit.slope;
  j["slope_stderr"] = sf::io_detail::finite_or_null(fit.slope_stderr);
  if (nb.paths < 100 || !std::isfinite(fit.slope_stderr)) j["warning"] = "fewer than 100 paths: standard error is wide";
  int code = kOk;
  if (nb.expected_slope) {
    sf::VarianceExpectation ex;
    ex.kind = sf::VarianceExpectation::Kind::Slope;
    ex.slope = *nb.expected_slope;
    const sf::CheckReport r = sf::estimate_variance_growth(stats, window.first, window.second, ex);
    j["expected_slope"] = *nb.expected_slope;
    j["expected_slope_check"] = sf::report_json(r);
    if (sf::is_failure(r)) code = kCheckFailure;
  }
  if (a.check_dt) {
    const auto half = run(nb.dt / 2);
    const double combined = std::hypot(fit.slope_stderr, half.second.slope_stderr);
    const bool agree = std::abs(fit.slope - half.second.slope) <= 3.0 * combined;
    j["dt_check"] = {{"dt_half", nb.dt / 2},
                     {"slope_half", half.second.slope},
                     {"slope_half_stderr", sf::io_detail::finite_or_null(half.second.slope_stderr)},
                     {"combined_stderr", sf::io_detail::finite_or_null(combined)},
                     {"agree", agree}};
    if (!agree) code = kCheckFailure;
  }
  emit_json(j, a.report);
  return code;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  Common common;
  std::vector<std::string> suites;
  std::optional<std::uint64_t> seed;
};

int cmd_verify(const VerifyArgs& a) {
  const sf::ScenarioConfig cfg = sf::load_scenario(a.common.config);
  sf::VerifyBlock vb = cfg.verify ? *cfg.verify : sf::VerifyBlock{};
  if (!a.suites.empty()) {
    for (const auto& s : a.suites)
      if (std::find(sf::all_suites().begin(), sf::all_suites().end(), s) == sf::all_suites().end())
        throw sf::InputError("--suite: unknown suite '" + s + "'");
    vb.suites = a.suites;
  }
  if (a.seed) vb.seed = *a.seed;
  sf::SuiteContext ctx;
  ctx.config = &cfg;
  const sf::CertifyBlock blk = cfg.certify ? *cfg.certify : sf::CertifyBlock{};
  ctx.saddle = locate_saddle(*cfg.problem.problem, blk.guess);
  ctx.certificate = sf::certify(*cfg.problem.problem, ctx.saddle, blk.options);
  const auto reports = sf::run_suites(ctx, vb);

  json j = header(a.common, "verify", cfg);
  j["seed"] = vb.seed;
  const json bundle = sf::report_bundle_json(reports);
  j["reports"] = bundle["reports"];
  j["summary"] = bundle["summary"];
  emit_json(j, a.common.out);

  // Summary table on stderr so stdout stays machine-readable.
  bool failed = false;
  for (const auto& r : reports) {
    std::fprintf(stderr, "%-14s %-4s %-12s violation=%-12.4g tol=%-10.3g\n", r.name.c_str(),
                 r.context.count("instance") ? r.context.at("instance").c_str() : "-", sf::to_string(r.outcome),
                 r.worst_violation, r.tolerance);
    failed = failed || sf::is_failure(r);
  }
  return failed ? kCheckFailure : kOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("config", c.config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--out", c.out, "output path");
  sub->add_flag("--no-timestamp", c.no_timestamp, "omit the timestamp field for byte-identical reruns");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saddleflow: saddle-point dynamics simulation and analysis"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "integrate the gradient flow; writes trajectory CSV");
  add_common(s_sim, sim.common);
  s_sim->add_option("--T", sim.T, "override horizon");
  s_sim->add_option("--summary", sim.summary, "summary JSON path (default stdout)");

  Common cert;
  auto* s_cert = app.add_subcommand("certify", "locate a saddle and classify limiting behaviour");
  add_common(s_cert, cert);

  NoiseArgs noise;
  auto* s_noise = app.add_subcommand("noise", "Euler-Maruyama ensemble; writes ensemble CSV and slope report");
  add_common(s_noise, noise.common);
  s_noise->add_option("--paths", noise.paths, "override path count");
  s_noise->add_option("--seed", noise.seed, "override seed");
  s_noise->add_option("--dt", noise.dt, "override step");
  s_noise->add_flag("--check-dt", noise.check_dt, "rerun at dt/2 and compare slopes");
  s_noise->add_option("--report", noise.report, "slope report JSON path (default stdout)");

  VerifyArgs ver;
  auto* s_ver = app.add_subcommand("verify", "run check suites; exit 1 on any non-vacuous failure");
  add_common(s_ver, ver.common);
  s_ver->add_option("--suite", ver.suites, "restrict to these suites (repeatable)");
  s_ver->add_option("--seed", ver.seed, "override seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (s_sim->parsed()) return cmd_simulate(sim);
    if (s_cert->parsed()) return cmd_certify(cert);
    if (s_noise->parsed()) return cmd_noise(noise);
    if (s_ver->parsed()) return cmd_verify(ver);
  } catch (const sf::InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const sf::NotFoundError& e) {
    std::cerr << "numeric error: saddle not found: " << e.what() << "\n";
    return kNumericError;
  } catch (const sf::Error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericError;
  }
  return kOk;
}

#pragma once
// File formats: problem definitions and scenario configs (JSON), trajectory
// and ensemble CSV, certificate and check-report JSON.

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "saddleflow/analysis.hpp"
#include "saddleflow/dynamics.hpp"
#include "saddleflow/harness.hpp"
#include "saddleflow/model.hpp"

namespace saddleflow {

using json = nlohmann::ordered_json;

namespace io_detail {

inline void only_fields(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw InputError(where + ": unknown field '" + it.key() + "'");
  }
}

inline const json& need(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw InputError(where + "." + key + ": missing");
  return j.at(key);
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(path + ": must be finite");
  return v;
}

inline double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw InputError(path + ": must be positive");
  return v;
}

inline long long integer(const json& j, const std::string& path, long long lo) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw InputError(path + ": expected an integer");
  const long long v = j.get<long long>();
  if (v < lo) throw InputError(path + ": must be at least " + std::to_string(lo));
  return v;
}

inline Vec vector(const json& j, const std::string& path, Index size) {
  if (!j.is_array()) throw InputError(path + ": expected an array");
  if (size >= 0 && static_cast<Index>(j.size()) != size)
    throw InputError(path + ": expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

/// Dense row-major matrix; rows < 0 or cols < 0 means "any".
inline Mat matrix(const json& j, const std::string& path, Index rows, Index cols) {
  if (!j.is_array()) throw InputError(path + ": expected an array of rows");
  if (rows >= 0 && static_cast<Index>(j.size()) != rows)
    throw InputError(path + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  const Index r = static_cast<Index>(j.size());
  Index c = cols;
  if (c < 0) c = r ? static_cast<Index>(j[0].is_array() ? j[0].size() : 0) : 0;
  Mat M(r, c);
  for (Index i = 0; i < r; ++i) M.row(i) = vector(j[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]", c).transpose();
  return M;
}

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Mat& M) {
  json a = json::array();
  for (Index i = 0; i < M.rows(); ++i) a.push_back(to_json(Vec(M.row(i).transpose())));
  return a;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(origin + ": " + e.what());
  }
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Problem definitions.
//
//   {"form": "quadratic", "n": 1, "m": 1, "Pxx": [[0]], "Pyy": [[0]], "Pxy": [[1]],
//    "p": [0], "q": [0], "c": 0, "gains": {"x": [4], "y": [1]}}
//   {"form": "lagrangian", "n": 2, "m": 1, "U": "-x1^2", "D": [[1, 1]], "e": [0]}
//   {"form": "generic-expression", "n": 1, "m": 1, "phi": "-x1^4/4 + x1*y1"}
//
// p, q, c, e and gains are optional. Lagrangian U is written in x1..xn; the
// generic phi in x1..xn, y1..ym.

struct ProblemSpec {
  ProblemPtr problem;
  std::optional<GainVector> gains;
};

inline ProblemSpec parse_problem(const json& j, const std::string& where = "problem") {
  using namespace io_detail;
  if (!j.is_object()) throw InputError(where + ": expected an object");
  const json& form_j = need(j, where, "form");
  if (!form_j.is_string()) throw InputError(where + ".form: expected a string");
  const std::string form = form_j.get<std::string>();
  const int n = static_cast<int>(integer(need(j, where, "n"), where + ".n", 0));
  const int m = static_cast<int>(integer(need(j, where, "m"), where + ".m", 0));
  if (n + m == 0) throw InputError(where + ": n + m must be positive");
  ProblemSpec out;
  if (form == "quadratic") {
    only_fields(j, where, {"form", "n", "m", "Pxx", "Pyy", "Pxy", "p", "q", "c", "gains"});
    const Mat Pxx = matrix(need(j, where, "Pxx"), where + ".Pxx", n, n);
    const Mat Pyy = matrix(need(j, where, "Pyy"), where + ".Pyy", m, m);
    const Mat Pxy = matrix(need(j, where, "Pxy"), where + ".Pxy", n, m);
    const Vec p = j.contains("p") ? vector(j["p"], where + ".p", n) : Vec::Zero(n);
    const Vec q = j.contains("q") ? vector(j["q"], where + ".q", m) : Vec::Zero(m);
    const double c = j.contains("c") ? number(j["c"], where + ".c") : 0.0;
    out.problem = std::make_shared<QuadraticSaddle>(Pxx, Pyy, Pxy, p, q, c);
  } else if (form == "lagrangian") {
    only_fields(j, where, {"form", "n", "m", "U", "D", "e", "degree_cap", "gains"});
    const json& U = need(j, where, "U");
    if (!U.is_string()) throw InputError(where + ".U: expected an expression string");
    const int cap = j.contains("degree_cap") ? static_cast<int>(integer(j["degree_cap"], where + ".degree_cap", 0)) : 6;
    ExpressionParser parser(saddle_variable_names(n, 0));
    Polynomial poly(n);
    try {
      poly = parser.parse(U.get<std::string>());
    } catch (const InputError& e) {
      throw InputError(where + ".U: " + e.what());
    }
    const Mat D = matrix(need(j, where, "D"), where + ".D", m, n);
    const Vec e = j.contains("e") ? vector(j["e"], where + ".e", m) : Vec::Zero(m);
    out.problem = std::make_shared<LinearConstraintLagrangian>(Utility(std::move(poly), cap), D, e);
  } else if (form == "generic-expression") {
    only_fields(j, where, {"form", "n", "m", "phi", "gains"});
    const json& phi = need(j, where, "phi");
    if (!phi.is_string()) throw InputError(where + ".phi: expected an expression string");
    try {
      out.problem = GenericSaddle::from_expression(n, m, phi.get<std::string>());
    } catch (const InputError& e) {
      throw InputError(where + ".phi: " + e.what());
    }
  } else {
    throw InputError(where + ".form: unknown form '" + form + "' (quadratic | lagrangian | generic-expression)");
  }
  if (j.contains("gains")) {
    const json& g = j["gains"];
    only_fields(g, where + ".gains", {"x", "y"});
    const Vec gx = vector(need(g, where + ".gains", "x"), where + ".gains.x", n);
    const Vec gy = vector(need(g, where + ".gains", "y"), where + ".gains.y", m);
    try {
      out.gains = GainVector(gx, gy);
    } catch (const InputError& e) {
      throw InputError(where + "." + e.what());
    }
  }
  return out;
}

inline ProblemSpec load_problem(const std::filesystem::path& p) {
  return parse_problem(io_detail::parse_json_text(io_detail::read_text(p), p.string()), p.string());
}

// ---------------------------------------------------------------------------
// Scenario configs.
//
//   {"problem": {...} | "problem_file": "relative/path.json",
//    "simulate": {"z0": [...], "T": 10, "rel_tol": 1e-8, "abs_tol": 1e-10, "max_step": 0.1,
//                 "samples": 201, "subspace": {"point": [...], "directions": [[...], ...]}},
//    "noise": {"sigma_x": [[1]], "sigma_y": [[1]], "z0": [...], "T": 10, "dt": 1e-3,
//              "paths": 10000, "seed": 7, "window": [5, 10], "expected_slope": 2.0},
//    "certify": {"guess": [...], "r_grid": 16, "kernel_tol": 1e-6},
//    "verify": {"suites": ["pathwise", ...], "seed": 1, "instances": 3, "horizon": 20}}

struct SimulateBlock {
  Vec z0;
  double T = 10.0;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;  ///< uniform output points including both ends; < 2: adaptive steps only
  std::optional<AffineSubspace> subspace;
};

struct NoiseBlock {
  Mat sigma_x, sigma_y;
  Vec z0;
  double T = 10.0;
  double dt = 1e-3;
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  std::optional<std::pair<double, double>> window;
  std::optional<double> expected_slope;
};

struct CertifyBlock {
  std::optional<Vec> guess;
  CertifyOptions options;
};

inline const std::vector<std::string>& all_suites() {
  static const std::vector<std::string> s{"conserved", "gains",  "limit_fit", "orthogonality",
                                          "pathwise",  "slinear", "variance"};
  return s;
}

struct VerifyBlock {
  std::vector<std::string> suites = all_suites();
  std::uint64_t seed = 1;
  int instances = 3;
  double horizon = 20.0;
};

struct ScenarioConfig {
  std::filesystem::path origin;
  ProblemSpec problem;
  std::optional<SimulateBlock> simulate;
  std::optional<NoiseBlock> noise;
  std::optional<CertifyBlock> certify;
  std::optional<VerifyBlock> verify;
};

inline ScenarioConfig parse_scenario(const json& j, const std::filesystem::path& origin = {}) {
  using namespace io_detail;
  only_fields(j, "config", {"problem", "problem_file", "simulate", "noise", "certify", "verify", "description"});
  ScenarioConfig cfg;
  cfg.origin = origin;
  if (j.contains("problem") == j.contains("problem_file"))
    throw InputError("config: exactly one of 'problem' or 'problem_file' is required");
  if (j.contains("problem")) {
    cfg.problem = parse_problem(j["problem"], "problem");
  } else {
    if (!j["problem_file"].is_string()) throw InputError("config.problem_file: expected a path string");
    std::filesystem::path p = j["problem_file"].get<std::string>();
    if (p.is_relative() && !origin.empty()) p = origin.parent_path() / p;
    if (!std::filesystem::exists(p)) throw InputError("config.problem_file: '" + p.string() + "' does not exist");
    cfg.problem = load_problem(p);
  }
  const Index d = cfg.problem.problem->dim();
  const int n = cfg.problem.problem->n();
  const int m = cfg.problem.problem->m();

  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    only_fields(s, "simulate", {"z0", "T", "rel_tol", "abs_tol", "max_step", "samples", "subspace"});
    SimulateBlock b;
    b.z0 = vector(need(s, "simulate", "z0"), "simulate.z0", d);
    if (s.contains("T")) b.T = positive(s["T"], "simulate.T");
    if (s.contains("rel_tol")) b.rel_tol = positive(s["rel_tol"], "simulate.rel_tol");
    if (s.contains("abs_tol")) b.abs_tol = positive(s["abs_tol"], "simulate.abs_tol");
    if (s.contains("max_step")) b.max_step = positive(s["max_step"], "simulate.max_step");
    if (s.contains("samples")) b.samples = static_cast<std::size_t>(integer(s["samples"], "simulate.samples", 0));
    if (s.contains("subspace")) {
      const json& v = s["subspace"];
      only_fields(v, "simulate.subspace", {"point", "directions"});
      const Vec point = vector(need(v, "simulate.subspace", "point"), "simulate.subspace.point", d);
      const Mat dirs = matrix(need(v, "simulate.subspace", "directions"), "simulate.subspace.directions", -1, d);
      b.subspace = AffineSubspace(point, Subspace::span(dirs.transpose()));
    }
    cfg.simulate = b;
  }
  if (j.contains("noise")) {
    const json& s = j["noise"];
    only_fields(s, "noise",
                {"sigma_x", "sigma_y", "z0", "T", "dt", "paths", "seed", "window", "expected_slope"});
    NoiseBlock b;
    b.sigma_x = s.contains("sigma_x") ? matrix(s["sigma_x"], "noise.sigma_x", n, n) : Mat::Identity(n, n);
    b.sigma_y = s.contains("sigma_y") ? matrix(s["sigma_y"], "noise.sigma_y", m, m) : Mat::Identity(m, m);
    b.z0 = s.contains("z0") ? vector(s["z0"], "noise.z0", d) : Vec::Zero(d);
    if (s.contains("T")) b.T = positive(s["T"], "noise.T");
    if (s.contains("dt")) b.dt = positive(s["dt"], "noise.dt");
    if (s.contains("paths")) b.paths = static_cast<std::size_t>(integer(s["paths"], "noise.paths", 1));
    if (s.contains("seed")) b.seed = static_cast<std::uint64_t>(integer(s["seed"], "noise.seed", 0));
    if (s.contains("window")) {
      const Vec w = vector(s["window"], "noise.window", 2);
      if (!(w(0) >= 0.0 && w(1) > w(0))) throw InputError("noise.window: expected [begin, end] with begin < end");
      b.window = std::make_pair(w(0), w(1));
    }
    if (s.contains("expected_slope")) b.expected_slope = number(s["expected_slope"], "noise.expected_slope");
    cfg.noise = b;
  }
  if (j.contains("certify")) {
    const json& s = j["certify"];
    only_fields(s, "certify", {"guess", "r_grid", "kernel_tol", "kernel_probes", "seed"});
    CertifyBlock b;
    if (s.contains("guess")) b.guess = vector(s["guess"], "certify.guess", d);
    if (s.contains("r_grid")) b.options.r_grid = static_cast<int>(integer(s["r_grid"], "certify.r_grid", 1));
    if (s.contains("kernel_tol")) b.options.kernel_tol = positive(s["kernel_tol"], "certify.kernel_tol");
    if (s.contains("kernel_probes"))
      b.options.kernel_probes = static_cast<int>(integer(s["kernel_probes"], "certify.kernel_probes", 0));
    if (s.contains("seed")) b.options.seed = static_cast<std::uint64_t>(integer(s["seed"], "certify.seed", 0));
    cfg.certify = b;
  }
  if (j.contains("verify")) {
    const json& s = j["verify"];
    only_fields(s, "verify", {"suites", "seed", "instances", "horizon"});
    VerifyBlock b;
    if (s.contains("suites")) {
      if (!s["suites"].is_array()) throw InputError("verify.suites: expected an array of names");
      b.suites.clear();
      for (const auto& x : s["suites"]) {
        if (!x.is_string()) throw InputError("verify.suites: expected strings");
        const std::string name = x.get<std::string>();
        if (std::find(all_suites().begin(), all_suites().end(), name) == all_suites().end())
          throw InputError("verify.suites: unknown suite '" + name + "'");
        b.suites.push_back(name);
      }
    }
    if (s.contains("seed")) b.seed = static_cast<std::uint64_t>(integer(s["seed"], "verify.seed", 0));
    if (s.contains("instances")) b.instances = static_cast<int>(integer(s["instances"], "verify.instances", 1));
    if (s.contains("horizon")) b.horizon = positive(s["horizon"], "verify.horizon");
    cfg.verify = b;
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& p) {
  return parse_scenario(io_detail::parse_json_text(io_detail::read_text(p), p.string()), p);
}

// ---------------------------------------------------------------------------
// CSV.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  for (Index i = 0; i < tr.dim(); ++i) os << ",z_" << (i + 1);
  os << "\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << format_double(tr.times[k]);
    for (Index i = 0; i < tr.dim(); ++i) os << "," << format_double(tr.states[k](i));
    os << "\n";
  }
}

inline void write_ensemble_csv(std::ostream& os, const EnsembleStats& s) {
  const Index d = s.mean.empty() ? 0 : s.mean.front().size();
  os << "t";
  for (Index i = 0; i < d; ++i) os << ",mean_" << (i + 1);
  os << ",second_moment,stderr\n";
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    os << format_double(s.times[k]);
    for (Index i = 0; i < d; ++i) os << "," << format_double(s.mean[k](i));
    os << "," << format_double(s.second_moment[k]) << "," << format_double(s.second_moment_stderr[k]) << "\n";
  }
}

namespace io_detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw InputError("csv row " + std::to_string(row) + ": bad number '" + cell + "'");
  return v;
}

inline std::vector<std::vector<double>> read_rows(std::istream& is, std::vector<std::string>& header) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("csv: empty input");
  header = split(line);
  std::vector<std::vector<double>> rows;
  std::size_t r = 1;
  while (std::getline(is, line)) {
    ++r;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw InputError("csv row " + std::to_string(r) + ": wrong column count");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_cell(c, r));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace io_detail

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::vector<std::string> header;
  const auto rows = io_detail::read_rows(is, header);
  if (header.empty() || header[0] != "t") throw InputError("trajectory csv: first column must be 't'");
  for (std::size_t i = 1; i < header.size(); ++i)
    if (header[i] != "z_" + std::to_string(i)) throw InputError("trajectory csv: unexpected column '" + header[i] + "'");
  Trajectory tr;
  for (const auto& row : rows) {
    tr.times.push_back(row[0]);
    Vec z(static_cast<Index>(row.size() - 1));
    for (std::size_t i = 1; i < row.size(); ++i) z(static_cast<Index>(i - 1)) = row[i];
    tr.states.push_back(z);
  }
  return tr;
}

inline EnsembleStats read_ensemble_csv(std::istream& is) {
  std::vector<std::string> header;
  const auto rows = io_detail::read_rows(is, header);
  if (header.size() < 3 || header[0] != "t" || header[header.size() - 2] != "second_moment" ||
      header.back() != "stderr")
    throw InputError("ensemble csv: unexpected header");
  const std::size_t d = header.size() - 3;
  for (std::size_t i = 0; i < d; ++i)
    if (header[i + 1] != "mean_" + std::to_string(i + 1))
      throw InputError("ensemble csv: unexpected column '" + header[i + 1] + "'");
  EnsembleStats s;
  for (const auto& row : rows) {
    s.times.push_back(row[0]);
    Vec mu(static_cast<Index>(d));
    for (std::size_t i = 0; i < d; ++i) mu(static_cast<Index>(i)) = row[i + 1];
    s.mean.push_back(mu);
    s.second_moment.push_back(row[d + 1]);
    s.second_moment_stderr.push_back(row[d + 2]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON reports. Subspaces are written as d x k basis matrices (columns are
// basis vectors) in coordinates centred on the saddle.

inline json subspace_json(const Subspace& S) {
  return json{{"dim", S.dim()}, {"basis", io_detail::to_json(S.basis())}};
}

inline json certificate_json(const Certificate& c, const SaddleProblem& P) {
  using io_detail::finite_or_null;
  json j;
  j["verdict"] = to_string(c.verdict);
  j["problem"] = {{"form", P.form()}, {"n", P.n()}, {"m", P.m()}, {"fingerprint", P.fingerprint()}};
  j["saddle"] = io_detail::to_json(c.saddle);
  j["shift"] = io_detail::to_json(c.saddle);
  j["exactness"] = c.exactness == Exactness::Exact ? "exact" : "local";
  j["s_linear"] = subspace_json(c.s_linear);
  j["oscillation_modes"] = subspace_json(c.oscillation_modes);
  j["saddle_directions"] = subspace_json(c.saddle_directions);
  j["residuals"] = {{"saddle_gradient_norm", finite_or_null(c.saddle_gradient_norm)},
                    {"invariance", finite_or_null(c.invariance_residual)},
                    {"kernel", finite_or_null(c.kernel_residual)},
                    {"worst_probe", finite_or_null(c.worst_probe_residual)}};
  j["kernel_condition"] = {{"r_grid", c.r_grid},
                           {"tolerance", c.kernel_tol},
                           {"probes_tested", c.probes_tested},
                           {"probes_passed", c.probes_passed}};
  j["notes"] = c.notes;
  return j;
}

inline json report_json(const CheckReport& r) {
  using io_detail::finite_or_null;
  json j;
  j["name"] = r.name;
  j["outcome"] = to_string(r.outcome);
  j["passed"] = r.passed;
  j["worst_violation"] = finite_or_null(r.worst_violation);
  j["tolerance"] = finite_or_null(r.tolerance);
  j["estimate"] = r.estimate ? finite_or_null(*r.estimate) : json(nullptr);
  j["stderr"] = r.stderr_estimate ? finite_or_null(*r.stderr_estimate) : json(nullptr);
  json ctx = json::object();
  for (const auto& [k, v] : r.context) ctx[k] = v;
  j["context"] = ctx;
  j["note"] = r.note;
  return j;
}

inline CheckReport report_from_json(const json& j) {
  auto num_or_inf = [](const json& v) {
    return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
  };
  CheckReport r;
  r.name = j.at("name").get<std::string>();
  const std::string o = j.at("outcome").get<std::string>();
  r.outcome = o == "pass" ? Outcome::Pass : o == "fail" ? Outcome::Fail : o == "vacuous" ? Outcome::Vacuous
                                                                                       : Outcome::Inconclusive;
  r.passed = j.at("passed").get<bool>();
  r.worst_violation = num_or_inf(j.at("worst_violation"));
  r.tolerance = num_or_inf(j.at("tolerance"));
  if (!j.at("estimate").is_null()) r.estimate = j["estimate"].get<double>();
  if (!j.at("stderr").is_null()) r.stderr_estimate = j["stderr"].get<double>();
  for (auto it = j.at("context").begin(); it != j.at("context").end(); ++it) r.context[it.key()] = it.value();
  r.note = j.at("note").get<std::string>();
  return r;
}

inline bool is_failure(const CheckReport& r) { return r.outcome == Outcome::Fail; }

inline json report_bundle_json(const std::vector<CheckReport>& reports) {
  json j;
  json arr = json::array();
  std::size_t pass = 0, fail = 0, vac = 0, inc = 0;
  for (const auto& r : reports) {
    arr.push_back(report_json(r));
    switch (r.outcome) {
      case Outcome::Pass: ++pass; break;
      case Outcome::Fail: ++fail; break;
      case Outcome::Vacuous: ++vac; break;
      case Outcome::Inconclusive: ++inc; break;
    }
  }
  j["reports"] = arr;
  j["summary"] = {{"total", reports.size()}, {"pass", pass}, {"fail", fail}, {"vacuous", vac}, {"inconclusive", inc}};
  return j;
}

}  // namespace saddleflow

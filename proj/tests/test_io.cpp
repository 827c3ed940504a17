#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace saddleflow;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

const fs::path scenario_dir = SADDLEFLOW_SCENARIO_DIR;

json parse(const std::string& s) { return json::parse(s); }

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / ("saddleflow_io_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("problem forms parse into the expected models") {
  const ProblemSpec q = parse_problem(parse(
      R"({"form": "quadratic", "n": 1, "m": 1, "Pxx": [[0]], "Pyy": [[0]], "Pxy": [[1]], "gains": {"x": [2], "y": [0.5]}})"));
  REQUIRE(q.problem->as_quadratic());
  CHECK(q.problem->form() == "quadratic");
  REQUIRE(q.gains);
  CHECK(q.gains->gamma()(0) == 2.0);

  const ProblemSpec l = parse_problem(
      parse(R"({"form": "lagrangian", "n": 2, "m": 1, "U": "-0.5*x1^2", "D": [[1, 1]], "e": [-1]})"));
  CHECK(l.problem->form() == "lagrangian");
  CHECK(l.problem->dim() == 3);

  const ProblemSpec g =
      parse_problem(parse(R"({"form": "generic-expression", "n": 1, "m": 1, "phi": "-x1^4/4 + x1*y1"})"));
  CHECK(g.problem->form() == "generic");
  const Vec z = Vec::Constant(2, 0.5);
  CHECK(g.problem->value(z) == Catch::Approx(-0.0625 / 4 + 0.25));
}

TEST_CASE("problem errors carry field paths") {
  CHECK_THAT(error_of([] { parse_problem(parse(R"({"form": "cubic", "n": 1, "m": 1})")); }),
             ContainsSubstring("problem.form"));
  CHECK_THAT(error_of([] {
               parse_problem(parse(R"({"form": "quadratic", "n": 1, "m": 1, "Pxx": [[0]], "Pyy": [[0]]})"));
             }),
             ContainsSubstring("Pxy"));
  CHECK_THAT(error_of([] {
               parse_problem(parse(
                   R"({"form": "quadratic", "n": 2, "m": 1, "Pxx": [[0, 0]], "Pyy": [[0]], "Pxy": [[1], [0]]})"));
             }),
             ContainsSubstring("problem.Pxx"));
  CHECK_THAT(error_of([] {
               parse_problem(parse(
                   R"({"form": "quadratic", "n": 1, "m": 1, "Pxx": [[0]], "Pyy": [[0]], "Pxy": [[1]], "extra": 1})"));
             }),
             ContainsSubstring("extra"));
  CHECK_THAT(error_of([] {
               parse_problem(parse(
                   R"({"form": "quadratic", "n": 2, "m": 1, "Pxx": [[0, 0], [0, 0]], "Pyy": [[0]], "Pxy": [[1], [0]], "gains": {"x": [1, -1], "y": [1]}})"));
             }),
             ContainsSubstring("gains.x[1]"));
  // Concavity violations are model errors, still InputError.
  CHECK_THROWS_AS(
      parse_problem(parse(R"({"form": "quadratic", "n": 1, "m": 1, "Pxx": [[1]], "Pyy": [[0]], "Pxy": [[1]]})")),
      InputError);
  CHECK_THROWS_AS(parse_problem(parse(R"({"form": "generic-expression", "n": 1, "m": 1, "phi": "x1^2 + x1*y1"})")),
                  InputError);
  CHECK_THAT(error_of([] { parse_problem(parse(R"({"form": "generic-expression", "n": 1, "m": 1, "phi": "x1 +"})")); }),
             ContainsSubstring("problem.phi"));
}

TEST_CASE("scenario configs: defaults, blocks and validation") {
  const ScenarioConfig c = parse_scenario(parse(R"({
    "problem": {"form": "quadratic", "n": 1, "m": 1, "Pxx": [[-1]], "Pyy": [[1]], "Pxy": [[0]]},
    "simulate": {"z0": [1, 1], "T": 5, "samples": 11},
    "noise": {"T": 10, "dt": 0.01, "paths": 200, "window": [5, 10]},
    "certify": {"r_grid": 8},
    "verify": {"suites": ["pathwise", "gains"], "instances": 2}
  })"));
  REQUIRE(c.simulate);
  CHECK(c.simulate->samples == 11);
  CHECK(c.simulate->T == 5.0);
  CHECK(c.simulate->rel_tol == 1e-8);
  REQUIRE(c.noise);
  CHECK(c.noise->sigma_x.isIdentity());
  CHECK(c.noise->z0.isZero());
  CHECK(c.noise->window->first == 5.0);
  REQUIRE(c.certify);
  CHECK(c.certify->options.r_grid == 8);
  REQUIRE(c.verify);
  CHECK(c.verify->suites.size() == 2);
  CHECK(c.verify->instances == 2);

  const std::string base = R"("problem": {"form": "quadratic", "n": 1, "m": 1, "Pxx": [[0]], "Pyy": [[0]], "Pxy": [[1]]})";
  CHECK_THAT(error_of([&] { parse_scenario(parse("{" + base + R"(, "simulate": {"z0": [1]}})")); }),
             ContainsSubstring("simulate.z0"));
  CHECK_THAT(error_of([&] { parse_scenario(parse("{" + base + R"(, "simulate": {"z0": [1, 0], "T": -1}})")); }),
             ContainsSubstring("simulate.T"));
  CHECK_THAT(error_of([&] { parse_scenario(parse("{" + base + R"(, "verify": {"suites": ["nope"]}})")); }),
             ContainsSubstring("nope"));
  CHECK_THAT(error_of([&] { parse_scenario(parse("{" + base + R"(, "noise": {"window": [5, 1]}})")); }),
             ContainsSubstring("noise.window"));
  CHECK_THAT(error_of([&] { parse_scenario(parse("{" + base + R"(, "bogus": {}})")); }), ContainsSubstring("bogus"));
  CHECK_THROWS_AS(parse_scenario(parse("{}")), InputError);
}

TEST_CASE("problem_file is resolved relative to the config") {
  const fs::path d = scratch_dir();
  {
    std::ofstream(d / "p.json") << R"({"form": "quadratic", "n": 1, "m": 1, "Pxx": [[0]], "Pyy": [[0]], "Pxy": [[1]]})";
    std::ofstream(d / "c.json") << R"({"problem_file": "p.json", "simulate": {"z0": [1, 0]}})";
    std::ofstream(d / "bad.json") << R"({"problem_file": "missing.json"})";
    std::ofstream(d / "broken.json") << R"({"problem": )";
  }
  const ScenarioConfig c = load_scenario(d / "c.json");
  CHECK(c.problem.problem->form() == "quadratic");
  CHECK_THROWS_AS(load_scenario(d / "bad.json"), InputError);
  CHECK_THROWS_AS(load_scenario(d / "broken.json"), InputError);
  CHECK_THROWS_AS(load_scenario(d / "absent.json"), InputError);
  fs::remove_all(d);
}

TEST_CASE("every bundled scenario loads") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(scenario_dir)) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW(load_scenario(entry.path()));
    ++count;
  }
  CHECK(count >= 6);
}

TEST_CASE("trajectory CSV round trips bit-exactly") {
  CounterRng rng(31);
  Trajectory tr;
  for (int i = 0; i < 20; ++i) {
    tr.times.push_back(0.1 * i + 1e-17 * i);
    tr.states.push_back(random_vector(rng, 3) * std::pow(10.0, i - 10));
  }
  std::stringstream ss;
  write_trajectory_csv(ss, tr);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "t,z_1,z_2,z_3");
  const Trajectory back = read_trajectory_csv(ss);
  REQUIRE(back.size() == tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(back.times[i] == tr.times[i]);
    CHECK(back.states[i] == tr.states[i]);
  }
}

TEST_CASE("ensemble CSV round trips including infinite stderr") {
  EnsembleStats s;
  for (int i = 0; i < 5; ++i) {
    s.times.push_back(0.5 * i);
    s.mean.push_back(Vec::Constant(2, 1.0 / 3.0 + i));
    s.second_moment.push_back(2.0 / 7.0 * i);
    s.second_moment_stderr.push_back(std::numeric_limits<double>::infinity());
  }
  std::stringstream ss;
  write_ensemble_csv(ss, s);
  CHECK_THAT(ss.str(), ContainsSubstring("t,mean_1,mean_2,second_moment,stderr"));
  const EnsembleStats back = read_ensemble_csv(ss);
  REQUIRE(back.times.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.mean[i] == s.mean[i]);
    CHECK(back.second_moment[i] == s.second_moment[i]);
    CHECK(std::isinf(back.second_moment_stderr[i]));
  }
  std::stringstream bad("t,z_1\n0,abc\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad), InputError);
}

TEST_CASE("check reports round trip through JSON") {
  CheckReport r = CheckReport::graded("variance_growth", 0.0123456789012345678, 0.1);
  r.estimate = 1.9876543210987654;
  r.stderr_estimate = std::numeric_limits<double>::infinity();
  r.context["paths"] = "10000";
  r.note = "n";
  const json j = report_json(r);
  CHECK(j["stderr"].is_null());
  const CheckReport back = report_from_json(json::parse(j.dump()));
  CHECK(back.name == r.name);
  CHECK(back.outcome == r.outcome);
  CHECK(back.worst_violation == r.worst_violation);
  CHECK(*back.estimate == *r.estimate);
  CHECK(!back.stderr_estimate.has_value());
  CHECK(back.context == r.context);

  const json bundle = report_bundle_json({r, CheckReport::vacuous("x", "y"), CheckReport::inconclusive("z", 1, "w"),
                                          CheckReport::graded("f", 2, 1)});
  CHECK(bundle["summary"]["total"] == 4);
  CHECK(bundle["summary"]["fail"] == 1);
  CHECK(bundle["summary"]["vacuous"] == 1);
  CHECK(bundle["summary"]["inconclusive"] == 1);
  CHECK(is_failure(CheckReport::graded("f", 2, 1)));
  CHECK_FALSE(is_failure(CheckReport::inconclusive("z", 1, "w")));
}

TEST_CASE("certificate JSON carries the verdict and subspaces") {
  const QuadraticSaddle Q(Mat::Zero(1, 1), Mat::Zero(1, 1), Mat::Ones(1, 1), Vec::Zero(1), Vec::Zero(1));
  const Certificate c = certify(Q, Vec::Zero(2));
  const json j = certificate_json(c, Q);
  CHECK(j["verdict"] == "PossiblyOscillatory");
  CHECK(j["oscillation_modes"]["dim"] == 2);
  CHECK(j["s_linear"]["basis"].size() == 2);
  CHECK(j["exactness"] == "exact");
  CHECK(j["problem"]["form"] == "quadratic");
  CHECK(j.contains("notes"));
}

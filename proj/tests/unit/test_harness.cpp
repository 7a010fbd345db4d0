#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "iwave/errors.hpp"
#include "iwave/harness.hpp"

using namespace iwave;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory under the build tree.
std::string scratch(const std::string& name) {
  fs::path p = fs::current_path() / "harness_scratch" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

ExperimentConfig sweep_config(const std::string& domain, double lo, double hi, long count, int workers = 1) {
  Json doc = {{"command", "rotation-sweep"},
              {"domain", domain},
              {"lambda_grid", {{"lo", lo}, {"hi", hi}, {"count", count}}},
              {"workers", workers}};
  return parse_config(doc);
}

std::string config_error(const Json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

GridField ramp_field(double scale) {
  GridField g = make_grid(tilted_square(0.3), 1.0 / 40);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.inside(i, j)) g.values[g.index(i, j)] = scale * (1 + g.point(i, j).x());
  return g;
}

}  // namespace

TEST_CASE("config: shipped schema is the compiled one") {
  std::string shipped = read_text_file(std::string(IWAVE_SOURCE_DIR) + "/schemas/experiment_config.schema.json");
  CHECK(shipped == experiment_schema_text());
}

TEST_CASE("config: schema accepts a minimal document and fills defaults") {
  ExperimentConfig c = parse_config(Json{{"command", "certify"}, {"domain", "trapezium:0.5"}, {"lambda", 0.55}});
  CHECK(c.command == "certify");
  CHECK(*c.lambda == 0.55);
  CHECK(c.workers == 1);
  CHECK(c.solver.modes == 400);
  CHECK(c.forcing.width == doctest::Approx(5 * kPi * kPi));
  CHECK(c.time.periods == std::vector<double>{10, 20, 40, 80});
  CHECK(!c.omega);
}

TEST_CASE("config: unknown keys and out-of-range values are rejected") {
  CHECK(config_error(Json{{"command", "certify"}, {"lamda", 0.5}}).find("unknown key 'lamda'") != std::string::npos);
  CHECK(config_error(Json{{"command", "evolve"}, {"solver", {{"mode", 3}}}}).find("/solver/mode") !=
        std::string::npos);
  CHECK(!config_error(Json{{"command", "certify"}, {"lambda", 1.0}}).empty());
  CHECK(!config_error(Json{{"command", "certify"}, {"lambda", 0.0}}).empty());
  CHECK(!config_error(Json{{"command", "plot"}}).empty());
  CHECK(!config_error(Json{{"domain", "trapezium:0.5"}}).empty());
  CHECK(!config_error(Json{{"command", "bie"}, {"omega", {0.8}}}).empty());
  CHECK(!config_error(Json{{"command", "evolve"}, {"time", {{"samples_per_period", 32}}}}).empty());
  CHECK(!config_error(Json{{"command", "certify"}, {"sampling", {{"offset", 7}}}}).empty());
  CHECK(!config_error(Json{{"command", "rotation-sweep"}, {"lambda_grid", {{"lo", 0.9}, {"hi", 0.5}, {"count", 3}}}})
             .empty());
  CHECK(config_error(Json{{"command", "certify"}, {"sampling", {{"sequence", "halton"}, {"offset", 409}}}}).empty());
}

TEST_CASE("config: JSON round trip is a fixed point") {
  Json doc = {{"command", "bie"},
              {"domain", "rounded:0.02:trapezium:0.5"},
              {"omega", {0.8, 0.05}},
              {"solver", {{"bie_nodes", 512}, {"compare_fd", true}}},
              {"forcing", {{"center", {0.5, 0.4}}, {"width", 40}}},
              {"eps", {0.1, 0.01}},
              {"escape", {{"direction", "backward"}}},
              {"output", "runs/bie"}};
  ExperimentConfig c = parse_config(doc);
  Json once = to_json(c);
  CHECK(to_json(parse_config(once)) == once);
  CHECK(c.solver.bie_nodes == 512);
  CHECK(c.escape.direction == Direction::backward);
  CHECK(c.forcing.center->y() == 0.4);
  CHECK(c.make_domain().kind() == DomainKind::rounded_polygon);
}

TEST_CASE("config: lambda grid text and values") {
  LambdaGrid g = parse_lambda_grid("0.55:0.95:400");
  std::vector<double> v = g.values();
  REQUIRE(v.size() == 400);
  CHECK(v.front() == 0.55);
  CHECK(v.back() == 0.95);
  CHECK(std::is_sorted(v.begin(), v.end()));
  CHECK(LambdaGrid{0.3, 0.3, 1}.values() == std::vector<double>{0.3});
  CHECK_THROWS_AS(parse_lambda_grid("0.5:0.9"), ConfigError);
  CHECK_THROWS_AS(parse_lambda_grid("0.5:x:10"), ConfigError);
  CHECK_THROWS_AS(parse_lambda_grid("0.5:0.9:10.5"), ConfigError);
}

TEST_CASE("output directory honors the root override") {
  ExperimentConfig c = parse_config(Json{{"command", "certify"}, {"output", "sub/run"}});
  std::string root = scratch("root");
  ::setenv("IWAVE_OUTPUT_ROOT", root.c_str(), 1);
  std::string dir = output_directory(c);
  ::unsetenv("IWAVE_OUTPUT_ROOT");
  CHECK(dir == (fs::path(root) / "sub/run").string());
  CHECK(fs::is_directory(dir));
  ExperimentConfig d = parse_config(Json{{"command", "escape"}});
  CHECK(fs::path(output_directory(d)) == fs::path("iwave_out") / "escape");
}

TEST_CASE("sweep: interrupted run resumes only the missing rows") {
  std::string dir = scratch("resume");
  ExperimentConfig cfg = sweep_config("trapezium:0.5", 0.55, 0.95, 40);
  SweepResult first = run_sweep(cfg, dir);
  CHECK(first.computed == 40);
  CHECK(first.reused == 0);
  std::string csv = read_text_file(dir + "/rotation.csv");

  SweepResult again = run_sweep(cfg, dir);
  CHECK(again.computed == 0);
  CHECK(again.reused == 40);
  CHECK(read_text_file(dir + "/rotation.csv") == csv);

  // Lose seven rows and the merged table, as if the run had been killed.
  std::vector<fs::path> rows;
  for (const auto& e : fs::directory_iterator(dir + "/rows")) rows.push_back(e.path());
  std::sort(rows.begin(), rows.end());
  for (int k = 0; k < 7; ++k) fs::remove(rows[5 * k]);
  fs::remove(dir + "/rotation.csv");
  SweepResult resumed = run_sweep(cfg, dir);
  CHECK(resumed.computed == 7);
  CHECK(resumed.reused == 33);
  CHECK(read_text_file(dir + "/rotation.csv") == csv);

  // Rows computed under other settings are not reused.
  ExperimentConfig other = cfg;
  other.solver.max_period = 32;
  CHECK(run_sweep(other, dir).computed == 40);
}

TEST_CASE("sweep: merge is independent of worker count and completion order") {
  std::string d1 = scratch("w1"), d3 = scratch("w3");
  SweepResult one = run_sweep(sweep_config("trapezium:0.5", 0.5, 0.9, 60, 1), d1);
  SweepResult three = run_sweep(sweep_config("trapezium:0.5", 0.5, 0.9, 60, 3), d3);
  CHECK(read_text_file(d1 + "/rotation.csv") == read_text_file(d3 + "/rotation.csv"));
  for (const auto& e : fs::directory_iterator(d1 + "/rows"))
    CHECK(read_text_file(e.path().string()) == read_text_file(d3 + "/rows/" + e.path().filename().string()));
  REQUIRE(one.rows.size() == three.rows.size());
  for (size_t k = 0; k < one.rows.size(); ++k) {
    CHECK(one.rows[k].lambda == three.rows[k].lambda);
    CHECK(one.rows[k].rotation == three.rows[k].rotation);
  }
  CHECK(std::is_sorted(one.rows.begin(), one.rows.end(),
                       [](const SweepRow& a, const SweepRow& b) { return a.lambda < b.lambda; }));
}

TEST_CASE("sweep: trapezium staircase has the 1/3 and 1/2 plateaus") {
  SweepResult r = run_sweep(sweep_config("trapezium:0.5", 0.5, 0.9, 200, 2), scratch("staircase"));
  CHECK(r.monotone());
  bool third = false, half = false;
  for (const Plateau& p : plateaus(r)) {
    third = third || (p.rotation == "1/3" && p.count >= 10);
    half = half || (p.rotation == "1/2" && p.count >= 10);
  }
  CHECK(third);
  CHECK(half);
}

TEST_CASE("sweep: tilted square keeps rotation 1/2 across its window") {
  const double alpha = kPi / 10;
  SweepResult r = run_sweep(sweep_config("tilted-square:0.3141592653589793", 0.55, 0.95, 400, 2), scratch("square"));
  CHECK(r.rows.size() == 400);
  CHECK(r.monotone());
  double lo = std::cos(kPi / 4 + alpha) + 0.01, hi = std::cos(kPi / 4 - alpha) - 0.01;
  for (const SweepRow& row : r.rows)
    if (row.lambda >= lo && row.lambda <= hi) {
      CHECK(row.rotation == "1/2");
      CHECK(row.certified);
    }
}

TEST_CASE("sweep: failures become flagged rows") {
  // lambda = cos(pi/10) makes two sides of the tilted square characteristic.
  ExperimentConfig cfg = sweep_config("tilted-square:0.3141592653589793", 0.9, std::cos(kPi / 10), 2);
  SweepResult r = run_sweep(cfg, scratch("flagged"));
  REQUIRE(r.rows.size() == 2);
  CHECK(!r.rows[1].ok);
  CHECK(!r.rows[1].flags.lambda_simple);
  CHECK(!r.rows[1].error.empty());
  CHECK(r.rows[0].ok);
}

TEST_CASE("compare: identical fields, grid mismatch, margin and concentration") {
  GridField a = ramp_field(1), b = ramp_field(2);
  CompareReport same = compare(a, a);
  CHECK(same.relative_l2 == 0);
  CHECK(same.max_abs_diff == 0);
  CHECK(same.nodes == a.interior_count());
  CompareReport half = compare(a, b);
  CHECK(half.relative_l2 == doctest::Approx(0.5));
  CHECK(half.relative_max == doctest::Approx(0.5));

  Domain sq = tilted_square(0.3);
  CompareReport inner = compare(a, b, &sq, 0.2);
  CHECK(inner.nodes > 0);
  CHECK(inner.nodes < half.nodes);

  GridField other = make_grid(tilted_square(0.3), 1.0 / 50);
  CHECK_THROWS_AS(compare(a, other), ConfigError);

  BilliardMap bmap(sq, 0.8);
  MorseSmaleReport rep = certify_morse_smale(sq, 0.8);
  std::vector<SkeletonSegment> sk = attractor_skeleton(bmap, rep, Attractor::lambda_plus).segments;
  CompareReport c = compare(a, a, nullptr, 0, &sk, 0.05);
  REQUIRE(c.has_concentration);
  Json j = to_json(c);
  CHECK(j["concentration"]["ratio_delta"].get<double>() == 0);
}

TEST_CASE("serialization: report, skeleton, escape function and ladder") {
  Domain sq = tilted_square(kPi / 10);
  MorseSmaleReport rep = certify_morse_smale(sq, 0.8);
  Json r = to_json(rep);
  CHECK(r["rotation"]["text"] == "1/2");
  CHECK(r["certified"] == true);
  CHECK(r["periodic_points"].size() == 4);

  BilliardMap bmap(sq, 0.8);
  Json s = to_json(attractor_skeleton(bmap, rep, Attractor::lambda_plus));
  CHECK(s["which"] == "lambda_plus");
  CHECK(!s["segments"].empty());

  EscapeFunction g = build_escape_function_auto(bmap, rep, -1, 0, 0.05);
  Json e = to_json(g);
  CHECK(e["N"] == g.N);
  CHECK(e["grid"].size() == e["values"].size());
  CHECK(e["values"].size() == g.values.size());
  CHECK(to_json(verify_escape_properties(g, std::max<long>(g.N, 10)))["all_passed"] == true);

  Ladder ladder;
  ladder.lambda = 0.5;
  ladder.rows.push_back(LadderRow{0.1, {cplx(1, 2)}, GridField()});
  ladder.rows.push_back(LadderRow{0.05, {cplx(1, 1)}, GridField()});
  Json l = to_json(ladder);
  CHECK(l["eps"] == Json::array({0.1, 0.05}));
  CHECK(l["pairings"][0][0] == Json::array({1.0, 2.0}));
  CHECK(l["gaps"][0].get<double>() == doctest::Approx(1));
}

TEST_CASE("experiments: repeated runs write byte-identical files") {
  for (const char* cmd : {"certify", "escape", "evolve"}) {
    std::string dir = scratch(std::string("repeat_") + cmd);
    ExperimentConfig cfg = parse_config(Json{{"command", cmd},
                                             {"domain", "tilted-square:0.3141592653589793"},
                                             {"lambda", 0.8},
                                             {"time", {{"periods", {1, 2}}}},
                                             {"solver", {{"modes", 60}}},
                                             {"output", dir}});
    std::vector<std::pair<std::string, std::string>> first;
    for (int run = 0; run < 2; ++run) {
      Json summary = run_experiment(cfg);
      CHECK(summary["command"] == cmd);
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
      std::sort(names.begin(), names.end());
      if (run == 0) {
        CHECK(names.size() >= 2);
        for (const std::string& n : names) first.emplace_back(n, read_text_file(dir + "/" + n));
      } else {
        REQUIRE(names.size() == first.size());
        for (const auto& [n, text] : first) CHECK(read_text_file(dir + "/" + n) == text);
      }
    }
  }
}

TEST_CASE("experiments: certify summary and precondition failures") {
  std::string dir = scratch("certify");
  Json summary = run_certify(parse_config(Json{{"command", "certify"},
                                               {"domain", "tilted-square:0.314159"},
                                               {"lambda", 0.8}}),
                             dir);
  CHECK(summary.dump().find("\"rotation\":\"1/2\",\"certified\":true") != std::string::npos);
  CHECK(fs::exists(dir + "/report.json"));

  ExperimentConfig bad = parse_config(Json{{"command", "certify"},
                                           {"domain", "tilted-square:0.3141592653589793"},
                                           {"lambda", std::cos(kPi / 10)}});
  CHECK_THROWS_AS(run_certify(bad, dir), NotLambdaSimple);
  ExperimentConfig esc = bad;
  esc.lambda = 0.97;
  CHECK_THROWS_AS(run_escape(esc, dir), PreconditionError);
  ExperimentConfig nodomain = parse_config(Json{{"command", "certify"}, {"lambda", 0.5}});
  CHECK_THROWS_AS(run_certify(nodomain, dir), ConfigError);
}

TEST_CASE("exit codes by error kind") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(ParseError("x", 3)) == 2);
  CHECK(exit_code_for(GeometryError("x")) == 2);
  CHECK(exit_code_for(NotLambdaSimple("x", {})) == 3);
  CHECK(exit_code_for(NoPeriodicOrbit("x")) == 3);
  CHECK(exit_code_for(PreconditionError("x")) == 3);
  CHECK(exit_code_for(ShrinkDelta("x")) == 3);
  CHECK(exit_code_for(ConditioningError("x")) == 3);
  CHECK(exit_code_for(DomainError("x")) == 3);
  CHECK(exit_code_for(Error("x")) == 1);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

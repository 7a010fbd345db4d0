#include "iwave/harness.hpp"

#include <rapidjson/document.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "iwave/errors.hpp"
#include "iwave/evolution.hpp"
#include "iwave/layers.hpp"
#include "iwave_schema_text.hpp"

namespace fs = std::filesystem;

namespace iwave {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shortest decimal that reads back to the same double.
std::string format_number(double x) { return Json(x).dump(); }

Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json cplx_json(cplx z) { return Json::array({z.real(), z.imag()}); }

Json flags_json(const MorseSmaleFlags& f) {
  return Json{{"lambda_simple", f.lambda_simple},
              {"periodic_nonempty", f.periodic_nonempty},
              {"hyperbolic", f.hyperbolic},
              {"corner_free", f.corner_free}};
}

Json check_json(const EscapeCheck& c) {
  return Json{{"passed", c.passed}, {"violations", c.violations}, {"worst", c.worst}};
}

// The schema document is parsed once and kept next to its source document.
struct CompiledSchema {
  rapidjson::Document source;
  std::unique_ptr<rapidjson::SchemaDocument> schema;

  CompiledSchema() {
    source.Parse(experiment_schema_text().c_str());
    if (source.HasParseError()) throw Error("embedded experiment schema is not valid JSON");
    schema = std::make_unique<rapidjson::SchemaDocument>(source);
  }
};

const CompiledSchema& compiled_schema() {
  static const CompiledSchema s;
  return s;
}

std::string pointer_text(const rapidjson::Pointer& p) {
  rapidjson::StringBuffer sb;
  p.Stringify(sb);
  std::string s = sb.GetString();
  return s.empty() ? "/" : s;
}

// Orbit and root-finding settings shared by certify and the sweep.
OrbitOptions orbit_options(const SolverConfig& s) {
  OrbitOptions o;
  o.tol = s.orbit_tol;
  o.max_period = s.max_period;
  return o;
}

PeriodicOptions periodic_options(const SolverConfig& s) {
  PeriodicOptions p;
  p.hyperbolic_margin = s.hyperbolic_margin;
  return p;
}

Json sweep_settings(const ExperimentConfig& cfg) {
  return Json{{"domain", cfg.domain},
              {"orbit_tol", cfg.solver.orbit_tol},
              {"max_period", cfg.solver.max_period},
              {"hyperbolic_margin", cfg.solver.hyperbolic_margin}};
}

SweepRow certify_row(const Domain& domain, double lambda, const SolverConfig& solver) {
  auto t0 = std::chrono::steady_clock::now();
  SweepRow row;
  row.lambda = lambda;
  try {
    MorseSmaleReport rep = certify_morse_smale(domain, lambda, orbit_options(solver), periodic_options(solver));
    row.flags = rep.flags;
    row.certified = rep.certified();
    row.ok = rep.flags.lambda_simple;
    if (row.ok) {
      row.rotation = rep.rotation.to_string();
      row.rotation_value = rep.rotation.value;
      row.rotation_error = rep.rotation.error_bound;
      row.exact = rep.rotation.exact;
    }
    for (const PeriodicPoint& p : rep.points) row.multipliers.push_back(p.multiplier);
    if (!row.certified) row.error = rep.message;
  } catch (const Error& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.seconds = seconds_since(t0);
  return row;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Vec2 forcing_center(const ExperimentConfig& cfg, const Domain& domain) {
  if (cfg.forcing.center) return *cfg.forcing.center;
  BoundingBox box = domain.bounding_box();
  return 0.5 * (box.lo + box.hi);
}

// Skeleton of the lambda_+ attractor, or empty when lambda is not certified.
std::vector<SkeletonSegment> certified_skeleton(const Domain& domain, double lambda, const SolverConfig& s,
                                                MorseSmaleReport* report = nullptr) {
  MorseSmaleReport rep = certify_morse_smale(domain, lambda, orbit_options(s), periodic_options(s));
  if (report) *report = rep;
  if (!rep.certified()) return {};
  BilliardMap bmap(domain, lambda);
  return attractor_skeleton(bmap, rep, Attractor::lambda_plus).segments;
}

Json concentration_json(const Concentration& c) {
  return Json{{"ratio", c.ratio}, {"area_fraction", c.area_fraction}, {"enhancement", c.enhancement()}};
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

}  // namespace

std::vector<double> LambdaGrid::values() const {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {lo};
  for (long k = 0; k < count; ++k) out.push_back(k == count - 1 ? hi : lo + (hi - lo) * k / (count - 1));
  return out;
}

LambdaGrid parse_lambda_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
  if (parts.size() != 3) throw ConfigError("lambda grid '" + text + "' must be lo:hi:count");
  LambdaGrid g;
  try {
    size_t used = 0;
    g.lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    g.hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    g.count = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("count");
  } catch (const std::exception&) {
    throw ConfigError("lambda grid '" + text + "' has a malformed number");
  }
  return g;
}

Domain ExperimentConfig::make_domain() const {
  if (domain.empty()) throw ConfigError(command + " needs a domain");
  return iwave::make_domain(parse_domain_spec(domain));
}

double ExperimentConfig::require_lambda() const {
  if (!lambda) throw ConfigError(command + " needs lambda");
  return *lambda;
}

const std::string& experiment_schema_text() {
  static const std::string text = kExperimentSchemaText;
  return text;
}

void validate_config(const Json& doc) {
  const CompiledSchema& cs = compiled_schema();
  rapidjson::Document d;
  d.Parse(doc.dump().c_str());
  if (d.HasParseError()) throw ConfigError("configuration is not valid JSON");
  rapidjson::SchemaValidator validator(*cs.schema);
  if (d.Accept(validator)) return;

  std::string where = pointer_text(validator.GetInvalidDocumentPointer());
  std::string keyword = validator.GetInvalidSchemaKeyword();
  std::string msg = "config " + where + ": violates '" + keyword + "'";
  // For unknown keys rapidjson points at the offending member itself.
  if (keyword == "additionalProperties" && where.size() > 1)
    msg = "config " + where + ": unknown key '" + where.substr(where.rfind('/') + 1) + "'";
  throw ConfigError(msg);
}

ExperimentConfig parse_config(const Json& doc) {
  validate_config(doc);
  ExperimentConfig c;
  c.command = doc.at("command").get<std::string>();
  if (doc.contains("domain")) c.domain = doc["domain"].get<std::string>();
  if (doc.contains("lambda")) c.lambda = doc["lambda"].get<double>();
  if (doc.contains("lambda_grid")) {
    const Json& g = doc["lambda_grid"];
    c.lambda_grid = LambdaGrid{g["lo"].get<double>(), g["hi"].get<double>(), g["count"].get<long>()};
    if (c.lambda_grid->hi < c.lambda_grid->lo) throw ConfigError("config /lambda_grid: hi < lo");
  }
  if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
  if (doc.contains("solver")) {
    const Json& s = doc["solver"];
    SolverConfig& o = c.solver;
    o.basis = s.value("basis", o.basis);
    o.modes = s.value("modes", o.modes);
    o.basis_h = s.value("basis_h", o.basis_h);
    o.grid_h = s.value("grid_h", o.grid_h);
    o.bie_nodes = s.value("bie_nodes", o.bie_nodes);
    o.orbit_tol = s.value("orbit_tol", o.orbit_tol);
    o.max_period = s.value("max_period", o.max_period);
    o.hyperbolic_margin = s.value("hyperbolic_margin", o.hyperbolic_margin);
    o.compare_fd = s.value("compare_fd", o.compare_fd);
  }
  if (doc.contains("forcing")) {
    const Json& f = doc["forcing"];
    if (f.contains("center")) c.forcing.center = Vec2(f["center"][0].get<double>(), f["center"][1].get<double>());
    c.forcing.width = f.value("width", c.forcing.width);
  }
  if (doc.contains("time")) {
    const Json& t = doc["time"];
    if (t.contains("periods")) c.time.periods = t["periods"].get<std::vector<double>>();
    c.time.samples_per_period = t.value("samples_per_period", c.time.samples_per_period);
  }
  if (doc.contains("eps")) c.eps = doc["eps"].get<std::vector<double>>();
  if (doc.contains("omega")) c.omega = cplx(doc["omega"][0].get<double>(), doc["omega"][1].get<double>());
  if (doc.contains("escape")) {
    const Json& e = doc["escape"];
    c.escape.alpha_minus = e.value("alpha_minus", c.escape.alpha_minus);
    c.escape.alpha_plus = e.value("alpha_plus", c.escape.alpha_plus);
    c.escape.delta = e.value("delta", c.escape.delta);
    if (e.contains("direction"))
      c.escape.direction = e["direction"] == "backward" ? Direction::backward : Direction::forward;
    c.escape.grid = e.value("grid", c.escape.grid);
  }
  c.tube_delta = doc.value("tube_delta", c.tube_delta);
  c.margin = doc.value("margin", c.margin);
  if (doc.contains("inputs")) c.inputs = doc["inputs"].get<std::vector<std::string>>();
  c.output = doc.value("output", std::string());
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  Json doc;
  try {
    doc = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(doc);
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["command"] = c.command;
  if (!c.domain.empty()) j["domain"] = c.domain;
  if (c.lambda) j["lambda"] = *c.lambda;
  if (c.lambda_grid) j["lambda_grid"] = {{"lo", c.lambda_grid->lo}, {"hi", c.lambda_grid->hi}, {"count", c.lambda_grid->count}};
  j["workers"] = c.workers;
  Json solver = {{"modes", c.solver.modes},          {"basis_h", c.solver.basis_h},
                 {"grid_h", c.solver.grid_h},        {"bie_nodes", c.solver.bie_nodes},
                 {"orbit_tol", c.solver.orbit_tol},  {"max_period", c.solver.max_period},
                 {"hyperbolic_margin", c.solver.hyperbolic_margin}, {"compare_fd", c.solver.compare_fd}};
  if (c.solver.basis != "auto") solver["basis"] = c.solver.basis;
  j["solver"] = solver;
  Json forcing = {{"width", c.forcing.width}};
  if (c.forcing.center) forcing["center"] = vec_json(*c.forcing.center);
  j["forcing"] = forcing;
  j["time"] = {{"periods", c.time.periods}, {"samples_per_period", c.time.samples_per_period}};
  j["eps"] = c.eps;
  if (c.omega) j["omega"] = cplx_json(*c.omega);
  j["escape"] = {{"alpha_minus", c.escape.alpha_minus},
                 {"alpha_plus", c.escape.alpha_plus},
                 {"delta", c.escape.delta},
                 {"direction", c.escape.direction == Direction::forward ? "forward" : "backward"},
                 {"grid", c.escape.grid}};
  j["tube_delta"] = c.tube_delta;
  j["margin"] = c.margin;
  if (!c.inputs.empty()) j["inputs"] = c.inputs;
  if (!c.output.empty()) j["output"] = c.output;
  j["sampling"] = {{"sequence", "halton"}, {"offset", Halton::kOffset}};
  return j;
}

std::string output_directory(const ExperimentConfig& cfg) {
  fs::path dir = cfg.output.empty() ? fs::path("iwave_out") / cfg.command : fs::path(cfg.output);
  if (const char* root = std::getenv("IWAVE_OUTPUT_ROOT"); root && *root && dir.is_relative())
    dir = fs::path(root) / dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir.string();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw Error("write to " + tmp + " failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename " + tmp + " to " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json to_json(const RotationNumber& r) {
  Json j = {{"text", r.to_string()}, {"exact", r.exact}, {"value", r.value}, {"error_bound", r.error_bound}};
  if (r.exact) {
    j["q"] = r.q;
    j["n"] = r.n;
  }
  j["detected_at"] = r.detected_at;
  return j;
}

Json to_json(const MorseSmaleReport& r) {
  Json points = Json::array();
  for (const PeriodicPoint& p : r.points)
    points.push_back({{"theta", p.theta},
                      {"multiplier", p.multiplier},
                      {"attracting", p.attracting},
                      {"orbit", p.orbit},
                      {"nu_plus", p.nu_plus},
                      {"nu_minus", p.nu_minus}});
  return Json{{"lambda", r.lambda},
              {"certified", r.certified()},
              {"flags", flags_json(r.flags)},
              {"rotation", to_json(r.rotation)},
              {"n", r.n},
              {"q", r.q},
              {"sigma_plus", r.sigma_plus},
              {"sigma_minus", r.sigma_minus},
              {"periodic_points", points},
              {"min_corner_distance", r.min_corner_distance},
              {"degenerate_continuum", r.degenerate_continuum},
              {"message", r.message}};
}

Json to_json(const AttractorSkeleton& s) {
  Json segs = Json::array();
  for (const SkeletonSegment& g : s.segments)
    segs.push_back({{"a", vec_json(g.a)},
                    {"b", vec_json(g.b)},
                    {"theta_a", g.theta_a},
                    {"theta_b", g.theta_b},
                    {"sign", sign_name(g.sign)},
                    {"tag", g.tag},
                    {"source", g.source},
                    {"source_nu", g.source_nu},
                    {"tau_sign", g.tau_sign}});
  return Json{{"which", s.which == Attractor::lambda_plus ? "lambda_plus" : "lambda_minus"}, {"segments", segs}};
}

Json to_json(const EscapeFunction& g) {
  return Json{{"alpha_minus", g.alpha_minus},
              {"alpha_plus", g.alpha_plus},
              {"delta", g.delta},
              {"delta1", g.delta1},
              {"N", g.N},
              {"direction", g.direction == Direction::forward ? "forward" : "backward"},
              {"attracting", g.attracting()},
              {"repelling", g.repelling()},
              {"grid", g.grid},
              {"values", g.values}};
}

Json to_json(const EscapeVerification& v) {
  return Json{{"M", v.M},
              {"grid", v.grid},
              {"all_passed", v.all_passed()},
              {"monotone", check_json(v.monotone)},
              {"strict", check_json(v.strict)},
              {"floor_all", check_json(v.floor_all)},
              {"floor_off_attractor", check_json(v.floor_off_attractor)},
              {"plateau", check_json(v.plateau)},
              {"weighted", check_json(v.weighted)}};
}

Json to_json(const Ladder& ladder) {
  Json eps = Json::array(), pairings = Json::array(), centers = Json::array();
  for (const Vec2& c : ladder.test_centers) centers.push_back(vec_json(c));
  for (const LadderRow& row : ladder.rows) {
    eps.push_back(row.eps);
    Json p = Json::array();
    for (cplx z : row.pairings) p.push_back(cplx_json(z));
    pairings.push_back(p);
  }
  return Json{{"lambda", ladder.lambda},
              {"eps", eps},
              {"test_centers", centers},
              {"pairings", pairings},
              {"gaps", ladder.gaps()}};
}

Json to_json(const SweepRow& r) {
  return Json{{"lambda", r.lambda},
              {"ok", r.ok},
              {"rotation", r.rotation},
              {"rotation_value", r.rotation_value},
              {"rotation_error", r.rotation_error},
              {"exact", r.exact},
              {"certified", r.certified},
              {"flags", flags_json(r.flags)},
              {"multipliers", r.multipliers},
              {"error", r.error}};
}

SweepRow sweep_row_from_json(const Json& j) {
  SweepRow r;
  r.lambda = j.at("lambda").get<double>();
  r.ok = j.at("ok").get<bool>();
  r.rotation = j.at("rotation").get<std::string>();
  r.rotation_value = j.at("rotation_value").get<double>();
  r.rotation_error = j.at("rotation_error").get<double>();
  r.exact = j.at("exact").get<bool>();
  r.certified = j.at("certified").get<bool>();
  const Json& f = j.at("flags");
  r.flags.lambda_simple = f.at("lambda_simple").get<bool>();
  r.flags.periodic_nonempty = f.at("periodic_nonempty").get<bool>();
  r.flags.hyperbolic = f.at("hyperbolic").get<bool>();
  r.flags.corner_free = f.at("corner_free").get<bool>();
  r.multipliers = j.at("multipliers").get<std::vector<double>>();
  r.error = j.at("error").get<std::string>();
  return r;
}

bool SweepResult::monotone() const {
  const SweepRow* prev = nullptr;
  for (const SweepRow& r : rows) {
    if (!r.ok) continue;
    if (prev && r.rotation_value < prev->rotation_value - (r.rotation_error + prev->rotation_error)) return false;
    prev = &r;
  }
  return true;
}

std::vector<Plateau> plateaus(const SweepResult& result) {
  std::vector<Plateau> out;
  bool open = false;
  for (const SweepRow& r : result.rows) {
    if (!(r.ok && r.exact)) {
      open = false;
      continue;
    }
    if (open && out.back().rotation == r.rotation) {
      out.back().hi = r.lambda;
      ++out.back().count;
    } else {
      out.push_back(Plateau{r.rotation, r.lambda, r.lambda, 1});
      open = true;
    }
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& dir) {
  if (!cfg.lambda_grid) throw ConfigError("rotation-sweep needs a lambda grid");
  std::vector<double> lambdas = cfg.lambda_grid->values();
  for (double l : lambdas)
    if (!(l > 0 && l < 1)) throw ConfigError("lambda grid must lie in (0, 1)");
  Domain domain = cfg.make_domain();
  Json settings = sweep_settings(cfg);

  fs::path rows_dir = fs::path(dir) / "rows";
  fs::create_directories(rows_dir);

  SweepResult result;
  result.domain = cfg.domain;
  result.rows.resize(lambdas.size());
  std::vector<size_t> todo;
  for (size_t k = 0; k < lambdas.size(); ++k) {
    fs::path file = rows_dir / (format_number(lambdas[k]) + ".json");
    bool reused = false;
    if (fs::exists(file)) {
      try {
        Json j = Json::parse(read_text_file(file.string()));
        if (j.at("settings") == settings && j.at("row").at("lambda").get<double>() == lambdas[k]) {
          result.rows[k] = sweep_row_from_json(j["row"]);
          reused = true;
        }
      } catch (const std::exception&) {
        // Unreadable or stale row: recompute it.
      }
    }
    if (reused) ++result.reused;
    else todo.push_back(k);
  }

  std::atomic<size_t> next{0};
  std::mutex failure_lock;
  std::string failure;
  auto worker = [&] {
    for (size_t t; (t = next.fetch_add(1)) < todo.size();) {
      size_t k = todo[t];
      SweepRow row = certify_row(domain, lambdas[k], cfg.solver);
      try {
        Json j = {{"settings", settings}, {"row", to_json(row)}};
        write_text_file((rows_dir / (format_number(lambdas[k]) + ".json")).string(), j.dump(1) + "\n");
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_lock);
        if (failure.empty()) failure = e.what();
      }
      result.rows[k] = std::move(row);
    }
  };
  int nthreads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (!failure.empty()) throw Error(failure);
  result.computed = static_cast<long>(todo.size());

  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.lambda < b.lambda; });
  write_sweep_csv(result, join_path(dir, "rotation.csv"));
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::string out =
      "lambda,rotation,rotation_value,rotation_error,exact,certified,lambda_simple,periodic_nonempty,"
      "hyperbolic,corner_free,multipliers,error\n";
  for (const SweepRow& r : result.rows) {
    std::string mult;
    for (size_t k = 0; k < r.multipliers.size(); ++k) mult += (k ? ";" : "") + format_number(r.multipliers[k]);
    out += format_number(r.lambda) + "," + r.rotation + "," + format_number(r.rotation_value) + "," +
           format_number(r.rotation_error) + "," + (r.exact ? "1" : "0") + "," + (r.certified ? "1" : "0") + "," +
           (r.flags.lambda_simple ? "1" : "0") + "," + (r.flags.periodic_nonempty ? "1" : "0") + "," +
           (r.flags.hyperbolic ? "1" : "0") + "," + (r.flags.corner_free ? "1" : "0") + "," + mult + "," +
           csv_quote(r.error) + "\n";
  }
  write_text_file(path, out);
}

CompareReport compare(const GridField& a, const GridField& b, const Domain* domain, double margin,
                      const std::vector<SkeletonSegment>* skeleton, double delta) {
  if (!a.same_grid(b)) throw ConfigError("compare: the two fields are on different grids");
  CompareReport r;
  double diff2 = 0, ref2 = 0, ref_max = 0;
  for (int j = 0; j < a.ny; ++j)
    for (int i = 0; i < a.nx; ++i) {
      if (!a.inside(i, j)) continue;
      if (domain && margin > 0 && domain->distance_to_boundary(a.point(i, j)) < margin) continue;
      cplx d = a.at(i, j) - b.at(i, j);
      diff2 += std::norm(d);
      ref2 += std::norm(b.at(i, j));
      r.max_abs_diff = std::max(r.max_abs_diff, std::abs(d));
      ref_max = std::max(ref_max, std::abs(b.at(i, j)));
      ++r.nodes;
    }
  auto ratio = [](double num, double den) {
    if (den > 0) return num / den;
    return num > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  r.relative_l2 = ratio(std::sqrt(diff2), std::sqrt(ref2));
  r.relative_max = ratio(r.max_abs_diff, ref_max);
  if (skeleton && !skeleton->empty()) {
    r.has_concentration = true;
    r.conc_a = concentration_metric(a, *skeleton, delta);
    r.conc_b = concentration_metric(b, *skeleton, delta);
  }
  return r;
}

Json to_json(const CompareReport& r) {
  Json j = {{"relative_l2", r.relative_l2},
            {"max_abs_diff", r.max_abs_diff},
            {"relative_max", r.relative_max},
            {"nodes", r.nodes}};
  if (r.has_concentration)
    j["concentration"] = {{"a", concentration_json(r.conc_a)},
                          {"b", concentration_json(r.conc_b)},
                          {"ratio_delta", r.conc_a.ratio - r.conc_b.ratio},
                          {"enhancement_delta", r.conc_a.enhancement() - r.conc_b.enhancement()}};
  return j;
}

Json run_certify(const ExperimentConfig& cfg, const std::string& dir) {
  Domain domain = cfg.make_domain();
  double lambda = cfg.require_lambda();
  MorseSmaleReport rep = certify_morse_smale(domain, lambda, orbit_options(cfg.solver), periodic_options(cfg.solver));
  Json out = {{"domain", cfg.domain}, {"report", to_json(rep)}};
  if (rep.certified()) {
    BilliardMap bmap(domain, lambda);
    out["skeletons"] = {to_json(attractor_skeleton(bmap, rep, Attractor::lambda_plus)),
                        to_json(attractor_skeleton(bmap, rep, Attractor::lambda_minus))};
  }
  write_text_file(join_path(dir, "report.json"), out.dump(1) + "\n");
  if (!rep.flags.lambda_simple) throw NotLambdaSimple(cfg.domain + " at lambda " + format_number(lambda) + ": " + rep.message, {});

  std::vector<double> mult;
  for (const PeriodicPoint& p : rep.points) mult.push_back(p.multiplier);
  return Json{{"command", "certify"},
              {"rotation", rep.rotation.to_string()},
              {"certified", rep.certified()},
              {"domain", cfg.domain},
              {"lambda", lambda},
              {"flags", flags_json(rep.flags)},
              {"periodic_points", rep.points.size()},
              {"multipliers", mult},
              {"output", dir}};
}

Json run_rotation_sweep(const ExperimentConfig& cfg, const std::string& dir) {
  SweepResult res = run_sweep(cfg, dir);
  Json plats = Json::array();
  for (const Plateau& p : plateaus(res))
    plats.push_back({{"rotation", p.rotation}, {"lo", p.lo}, {"hi", p.hi}, {"count", p.count}});
  write_text_file(join_path(dir, "plateaus.json"), plats.dump(1) + "\n");
  long certified = 0, failed = 0;
  for (const SweepRow& r : res.rows) {
    certified += r.certified;
    failed += !r.ok;
  }
  return Json{{"command", "rotation-sweep"},
              {"domain", cfg.domain},
              {"rows", res.rows.size()},
              {"certified", certified},
              {"failed", failed},
              {"monotone", res.monotone()},
              {"computed", res.computed},
              {"reused", res.reused},
              {"plateaus", plats.size()},
              {"csv", join_path(dir, "rotation.csv")}};
}

Json run_evolve(const ExperimentConfig& cfg, const std::string& dir) {
  Domain domain = cfg.make_domain();
  double lambda = cfg.require_lambda();
  bool analytic = cfg.solver.basis == "analytic" ||
                  (cfg.solver.basis == "auto" && parse_domain_spec(cfg.domain).kind == "tilted-square");
  EigenBasis basis = build_eigenbasis(
      domain, {analytic ? BasisMode::analytic_square : BasisMode::finite_difference, cfg.solver.modes, cfg.solver.basis_h});
  PoincareMatrix matrix = poincare_matrix(basis);
  Eigen::VectorXd F = forcing_coefficients(basis, gaussian(forcing_center(cfg, domain), cfg.forcing.width));
  ForcedEvolution evo(basis, matrix, F, lambda);
  GridField grid = analytic ? make_grid(domain, cfg.solver.grid_h) : basis.grid;
  std::vector<SkeletonSegment> skeleton = certified_skeleton(domain, lambda, cfg.solver);

  std::string csv = "periods,t,ratio,area_fraction,enhancement\n";
  Json files = Json::array();
  std::vector<double> enh;
  for (double periods : cfg.time.periods) {
    double t = periods * 2 * kPi / lambda;
    GridField u = reconstruct_field(evo.u_coefficients(t), basis, grid);
    char name[64];
    std::snprintf(name, sizeof name, "field_t%ld.gfield", static_cast<long>(std::llround(t * 1000)));
    write_grid_field(u, join_path(dir, name));
    files.push_back(name);
    if (!skeleton.empty()) {
      Concentration c = concentration_metric(u, skeleton, cfg.tube_delta);
      enh.push_back(c.enhancement());
      csv += format_number(periods) + "," + format_number(t) + "," + format_number(c.ratio) + "," +
             format_number(c.area_fraction) + "," + format_number(c.enhancement()) + "\n";
    }
  }
  Json summary = {{"command", "evolve"},         {"domain", cfg.domain},
                  {"lambda", lambda},            {"basis", analytic ? "analytic" : "fd"},
                  {"modes", basis.K},            {"snapshots", files},
                  {"certified", !skeleton.empty()}};
  if (!skeleton.empty()) {
    write_text_file(join_path(dir, "concentration.csv"), csv);
    summary["final_enhancement"] = enh.back();
    summary["increasing"] = std::is_sorted(enh.begin(), enh.end(), std::less_equal<double>());
  }
  summary["output"] = dir;
  return summary;
}

Json run_resolvent(const ExperimentConfig& cfg, const std::string& dir) {
  Domain domain = cfg.make_domain();
  double lambda = cfg.require_lambda();
  ScalarField f = gaussian(forcing_center(cfg, domain), cfg.forcing.width);
  Ladder ladder = epsilon_ladder(domain, lambda, cfg.solver.grid_h, f, cfg.eps);
  write_text_file(join_path(dir, "ladder.json"), to_json(ladder).dump(1) + "\n");
  std::vector<SkeletonSegment> skeleton = certified_skeleton(domain, lambda, cfg.solver);

  std::string csv = "eps,ratio,area_fraction,enhancement\n";
  Json files = Json::array();
  for (const LadderRow& row : ladder.rows) {
    std::string name = "u_eps" + format_number(row.eps) + ".gfield";
    write_grid_field(row.u, join_path(dir, name));
    files.push_back(name);
    if (!skeleton.empty()) {
      Concentration c = concentration_metric(row.u, skeleton, cfg.tube_delta);
      csv += format_number(row.eps) + "," + format_number(c.ratio) + "," + format_number(c.area_fraction) + "," +
             format_number(c.enhancement()) + "\n";
    }
  }
  if (!skeleton.empty()) write_text_file(join_path(dir, "concentration.csv"), csv);
  std::vector<double> gaps = ladder.gaps();
  Json summary = {{"command", "resolvent"}, {"domain", cfg.domain}, {"lambda", lambda},
                  {"eps", cfg.eps},         {"fields", files},      {"gaps", gaps}};
  if (gaps.size() >= 2 && gaps.front() > 0) summary["gap_ratio"] = gaps.back() / gaps.front();
  summary["certified"] = !skeleton.empty();
  summary["output"] = dir;
  return summary;
}

Json run_bie(const ExperimentConfig& cfg, const std::string& dir) {
  Domain domain = cfg.make_domain();
  if (!cfg.omega) throw ConfigError("bie needs omega");
  cplx omega = *cfg.omega;
  GridField f = sample_field(make_grid(domain, cfg.solver.grid_h, true), gaussian(forcing_center(cfg, domain), cfg.forcing.width));
  BieSolution sol = solve_bie(domain, omega, f, cfg.solver.bie_nodes);
  write_density_csv(sol.density, join_path(dir, "density.csv"));
  Reconstruction rec = reconstruct(sol, f, f);
  write_grid_field(rec.u, join_path(dir, "field.gfield"));
  long flagged = std::count(rec.low_accuracy.begin(), rec.low_accuracy.end(), 1);

  Json summary = {{"command", "bie"},
                  {"domain", cfg.domain},
                  {"omega", cplx_json(omega)},
                  {"nodes", sol.kernel.M},
                  {"condition", sol.condition},
                  {"residual", sol.residual},
                  {"low_accuracy_nodes", flagged}};
  if (cfg.solver.compare_fd) {
    ShiftedSolve fd = solve_resolvent(domain, cfg.solver.grid_h, omega_to_z(omega), f);
    write_grid_field(fd.u, join_path(dir, "fd.gfield"));
    double margin = cfg.margin > 0 ? cfg.margin : 0.1;
    CompareReport r = compare(rec.u, fd.u, &domain, margin);
    write_text_file(join_path(dir, "compare.json"), to_json(r).dump(1) + "\n");
    summary["fd_relative_l2"] = r.relative_l2;
    summary["fd_margin"] = margin;
  }
  summary["output"] = dir;
  return summary;
}

Json run_escape(const ExperimentConfig& cfg, const std::string& dir) {
  Domain domain = cfg.make_domain();
  double lambda = cfg.require_lambda();
  BilliardMap bmap(domain, lambda);
  MorseSmaleReport rep = certify_morse_smale(domain, lambda, orbit_options(cfg.solver), periodic_options(cfg.solver));
  if (!rep.certified()) throw PreconditionError("escape needs a certified lambda: " + rep.message);
  const EscapeConfig& e = cfg.escape;
  EscapeFunction g = build_escape_function_auto(bmap, rep, e.alpha_minus, e.alpha_plus, e.delta, e.direction);
  EscapeVerification v = verify_escape_properties(g, std::max<long>(g.N, 10), e.grid);
  Json out = {{"domain", cfg.domain}, {"lambda", lambda}, {"function", to_json(g)}, {"verification", to_json(v)}};
  write_text_file(join_path(dir, "escape.json"), out.dump(1) + "\n");
  return Json{{"command", "escape"}, {"domain", cfg.domain}, {"lambda", lambda},  {"N", g.N},
              {"delta", g.delta},    {"delta1", g.delta1},   {"all_passed", v.all_passed()},
              {"output", dir}};
}

Json run_compare(const ExperimentConfig& cfg, const std::string& dir) {
  if (cfg.inputs.size() != 2) throw ConfigError("compare needs two input fields");
  GridField a = read_grid_field(cfg.inputs[0]);
  GridField b = read_grid_field(cfg.inputs[1]);
  std::optional<Domain> domain;
  std::vector<SkeletonSegment> skeleton;
  if (!cfg.domain.empty()) {
    domain = cfg.make_domain();
    if (cfg.lambda) skeleton = certified_skeleton(*domain, *cfg.lambda, cfg.solver);
  }
  CompareReport r = compare(a, b, domain ? &*domain : nullptr, cfg.margin, skeleton.empty() ? nullptr : &skeleton,
                            cfg.tube_delta);
  Json report = to_json(r);
  write_text_file(join_path(dir, "compare.json"), report.dump(1) + "\n");
  Json summary = {{"command", "compare"}};
  for (auto& [k, v] : report.items()) summary[k] = v;
  summary["output"] = dir;
  return summary;
}

Json run_experiment(const ExperimentConfig& cfg) {
  std::string dir = output_directory(cfg);
  write_text_file(join_path(dir, "config.json"), to_json(cfg).dump(1) + "\n");
  if (cfg.command == "certify") return run_certify(cfg, dir);
  if (cfg.command == "rotation-sweep") return run_rotation_sweep(cfg, dir);
  if (cfg.command == "evolve") return run_evolve(cfg, dir);
  if (cfg.command == "resolvent") return run_resolvent(cfg, dir);
  if (cfg.command == "bie") return run_bie(cfg, dir);
  if (cfg.command == "escape") return run_escape(cfg, dir);
  if (cfg.command == "compare") return run_compare(cfg, dir);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const GeometryError*>(&e))
    return 2;
  if (dynamic_cast<const NotLambdaSimple*>(&e) || dynamic_cast<const NoPeriodicOrbit*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const ShrinkDelta*>(&e) ||
      dynamic_cast<const ConditioningError*>(&e) || dynamic_cast<const DomainError*>(&e))
    return 3;
  return 1;
}

}  // namespace iwave

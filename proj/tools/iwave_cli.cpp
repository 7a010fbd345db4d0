// Command-line front end: every subcommand turns its flags into the JSON
// experiment configuration (optionally on top of --config), validates it
// against the schema and runs the matching experiment.

#include <CLI11.hpp>
#include <cstdio>
#include <functional>
#include <memory>

#include "iwave/errors.hpp"
#include "iwave/harness.hpp"

using iwave::Json;

namespace {

// A flag that, when given, writes its value into the configuration document.
struct Overlay {
  CLI::Option* option;
  std::function<void(Json&)> apply;
};

struct Subcommand {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<Overlay> overlays;

  template <class T>
  CLI::Option* add(const std::string& flag, const std::string& help, std::function<void(Json&, const T&)> put) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    overlays.push_back({opt, [value, put](Json& doc) { put(doc, *value); }});
    return opt;
  }

  CLI::Option* add_number(const std::string& flag, const std::string& help, const std::string& key,
                          const std::string& section = "") {
    return add<double>(flag, help, [key, section](Json& d, const double& v) {
      (section.empty() ? d[key] : d[section][key]) = v;
    });
  }

  CLI::Option* add_integer(const std::string& flag, const std::string& help, const std::string& key,
                           const std::string& section = "") {
    return add<long>(flag, help, [key, section](Json& d, const long& v) {
      (section.empty() ? d[key] : d[section][key]) = v;
    });
  }

  CLI::Option* add_list(const std::string& flag, const std::string& help, const std::string& key,
                        const std::string& section = "") {
    return add<std::vector<double>>(flag, help, [key, section](Json& d, const std::vector<double>& v) {
             (section.empty() ? d[key] : d[section][key]) = v;
           })
        ->delimiter(',');
  }

  void add_domain() {
    add<std::string>("--domain", "domain spec, e.g. tilted-square:0.314159 or trapezium:0.5",
                     [](Json& d, const std::string& v) { d["domain"] = v; });
  }

  void add_forcing() {
    add_list("--center", "forcing center x,y (default: bounding-box center)", "center", "forcing");
    add_number("--width", "forcing Gaussian exp(-width |x - center|^2)", "width", "forcing");
  }

  // Builds the configuration document: --config first, then the flags.
  Json document(const std::string& command) const {
    Json doc = Json::object();
    if (!config_path.empty()) {
      try {
        doc = Json::parse(iwave::read_text_file(config_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw iwave::ConfigError(config_path + ": " + e.what());
      }
      if (!doc.is_object()) throw iwave::ConfigError(config_path + ": configuration must be a JSON object");
      if (doc.contains("command") && doc["command"] != command)
        throw iwave::ConfigError(config_path + ": command '" + doc["command"].dump() + "' does not match '" +
                                 command + "'");
    }
    doc["command"] = command;
    for (const Overlay& o : overlays)
      if (o.option->count() > 0) o.apply(doc);
    return doc;
  }
};

Subcommand& make_subcommand(CLI::App& app, std::vector<std::unique_ptr<Subcommand>>& subs, const std::string& name,
                            const std::string& help) {
  auto sub = std::make_unique<Subcommand>();
  sub->app = app.add_subcommand(name, help);
  sub->app->add_option("--config", sub->config_path, "JSON experiment configuration; flags override it");
  sub->add<std::string>("--output", "output directory (under $IWAVE_OUTPUT_ROOT when set)",
                        [](Json& d, const std::string& v) { d["output"] = v; });
  subs.push_back(std::move(sub));
  return *subs.back();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iwave: chess billiards, attractors and internal-wave solvers"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Subcommand>> subs;

  Subcommand& certify = make_subcommand(app, subs, "certify", "Morse-Smale certification at one lambda");
  certify.add_domain();
  certify.add_number("--lambda", "frequency in (0, 1)", "lambda");

  Subcommand& sweep = make_subcommand(app, subs, "rotation-sweep", "rotation number over a lambda grid");
  sweep.add_domain();
  sweep.add<std::string>("--lambda", "grid lo:hi:count", [](Json& d, const std::string& v) {
    iwave::LambdaGrid g = iwave::parse_lambda_grid(v);
    d["lambda_grid"] = {{"lo", g.lo}, {"hi", g.hi}, {"count", g.count}};
  });
  sweep.add_integer("--workers", "worker threads", "workers");

  Subcommand& evolve = make_subcommand(app, subs, "evolve", "forced evolution snapshots and concentration");
  evolve.add_domain();
  evolve.add_number("--lambda", "forcing frequency in (0, 1)", "lambda");
  evolve.add_list("--periods", "snapshot times in forcing periods, e.g. 10,20,40,80", "periods", "time");
  evolve.add<std::string>("--basis", "analytic or fd", [](Json& d, const std::string& v) { d["solver"]["basis"] = v; });
  evolve.add_integer("--modes", "number of eigenmodes", "modes", "solver");
  evolve.add_number("--basis-h", "finite-difference basis spacing", "basis_h", "solver");
  evolve.add_number("--grid-h", "snapshot grid spacing", "grid_h", "solver");
  evolve.add_number("--delta", "tube half-width for the concentration metric", "tube_delta");
  evolve.add_forcing();

  Subcommand& resolvent = make_subcommand(app, subs, "resolvent", "limiting-absorption ladder");
  resolvent.add_domain();
  resolvent.add_number("--lambda", "frequency in (0, 1)", "lambda");
  resolvent.add_list("--eps", "damping ladder, e.g. 0.04,0.02,0.01,0.005", "eps");
  resolvent.add_number("--grid-h", "grid spacing", "grid_h", "solver");
  resolvent.add_number("--delta", "tube half-width for the concentration metric", "tube_delta");
  resolvent.add_forcing();

  Subcommand& bie = make_subcommand(app, subs, "bie", "boundary integral solve at complex omega");
  bie.add_domain();
  bie.add_list("--omega", "complex frequency re,im", "omega");
  bie.add_integer("--nodes", "boundary nodes", "bie_nodes", "solver");
  bie.add_number("--grid-h", "grid spacing of f and the reconstruction", "grid_h", "solver");
  bie.add_number("--margin", "distance from the boundary for the FD comparison", "margin");
  bie.add_forcing();
  auto compare_fd = std::make_shared<bool>(false);
  CLI::Option* compare_flag = bie.app->add_flag("--compare-fd", *compare_fd, "also solve by finite differences");
  bie.overlays.push_back({compare_flag, [](Json& d) { d["solver"]["compare_fd"] = true; }});

  Subcommand& escape = make_subcommand(app, subs, "escape", "escape function and its verification");
  escape.add_domain();
  escape.add_number("--lambda", "frequency in (0, 1)", "lambda");
  escape.add_number("--alpha-minus", "value near the repelling set", "alpha_minus", "escape");
  escape.add_number("--alpha-plus", "value near the attracting set", "alpha_plus", "escape");
  escape.add_number("--delta", "initial neighborhood radius", "delta", "escape");
  escape.add<std::string>("--direction", "forward or backward",
                          [](Json& d, const std::string& v) { d["escape"]["direction"] = v; });
  escape.add_integer("--grid", "verification grid size", "grid", "escape");

  Subcommand& cmp = make_subcommand(app, subs, "compare", "compare two grid fields");
  cmp.add<std::vector<std::string>>("fields", "two .gfield files",
                                    [](Json& d, const std::vector<std::string>& v) { d["inputs"] = v; });
  cmp.add_domain();
  cmp.add_number("--lambda", "frequency for the concentration deltas", "lambda");
  cmp.add_number("--delta", "tube half-width", "tube_delta");
  cmp.add_number("--margin", "ignore nodes closer than this to the boundary", "margin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "iwave: %s\n", e.what());
    return 2;
  }

  for (const auto& sub : subs) {
    if (!sub->app->parsed()) continue;
    try {
      iwave::ExperimentConfig cfg = iwave::parse_config(sub->document(sub->app->get_name()));
      Json summary = iwave::run_experiment(cfg);
      std::printf("%s\n", summary.dump().c_str());
      return 0;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "iwave: %s\n", e.what());
      return iwave::exit_code_for(e);
    }
  }
  return 2;
}

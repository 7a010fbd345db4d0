#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "iwave/escape.hpp"
#include "iwave/grid_field.hpp"
#include "iwave/resolvent.hpp"

namespace iwave {

using Json = nlohmann::ordered_json;

// Inclusive uniform grid lo, ..., hi with count points (lo alone when count = 1).
struct LambdaGrid {
  double lo = 0, hi = 0;
  long count = 0;

  std::vector<double> values() const;
};

// "lo:hi:count" as used on the command line. Throws ConfigError.
LambdaGrid parse_lambda_grid(const std::string& text);

struct SolverConfig {
  std::string basis = "auto";  // analytic for tilted squares, fd otherwise
  int modes = 400;
  double basis_h = 0.01;
  double grid_h = 1.0 / 160;
  int bie_nodes = 256;
  double orbit_tol = 1e-10;
  int max_period = 64;
  double hyperbolic_margin = 1e-8;
  bool compare_fd = false;
};

struct ForcingConfig {
  std::optional<Vec2> center;  // bounding-box center when absent
  double width = 5 * kPi * kPi;
};

struct TimeConfig {
  std::vector<double> periods = {10, 20, 40, 80};  // in units of 2 pi / lambda
  int samples_per_period = 64;
};

struct EscapeConfig {
  double alpha_minus = -1, alpha_plus = 0;
  double delta = 0.05;
  Direction direction = Direction::forward;
  int grid = 8192;
};

// One experiment. Every field has a default except the command; the JSON
// form is checked against the shipped schema before it is read.
struct ExperimentConfig {
  std::string command;
  std::string domain;
  std::optional<double> lambda;
  std::optional<LambdaGrid> lambda_grid;
  int workers = 1;
  SolverConfig solver;
  ForcingConfig forcing;
  TimeConfig time;
  std::vector<double> eps = {0.04, 0.02, 0.01, 0.005};
  std::optional<cplx> omega;
  EscapeConfig escape;
  double tube_delta = 0.05;
  double margin = 0;
  std::vector<std::string> inputs;
  std::string output;

  Domain make_domain() const;
  double require_lambda() const;
};

// The JSON schema compiled into the library (same text as the shipped file).
const std::string& experiment_schema_text();

// Throws ConfigError naming the offending JSON pointer (and key, for unknown
// keys) when the document does not satisfy the schema.
void validate_config(const Json& doc);

// Validates, then fills an ExperimentConfig. Throws ConfigError.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::string& path);
Json to_json(const ExperimentConfig& cfg);

// Output directory of an experiment: cfg.output (default "iwave_out/<command>")
// placed under $IWAVE_OUTPUT_ROOT when that variable is set. Created on demand.
std::string output_directory(const ExperimentConfig& cfg);

// Writes via path.tmp and rename, so readers never see a partial file.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

Json to_json(const RotationNumber& r);
Json to_json(const MorseSmaleReport& r);
Json to_json(const AttractorSkeleton& s);
Json to_json(const EscapeFunction& g);
Json to_json(const EscapeVerification& v);
Json to_json(const Ladder& ladder);

struct SweepRow {
  double lambda = 0;
  bool ok = false;             // lambda-simple and certify did not throw
  std::string rotation;        // exact "q/n" or the decimal estimate
  double rotation_value = 0;
  double rotation_error = 0;   // error bound of an estimate, zero when exact
  bool exact = false;
  bool certified = false;
  MorseSmaleFlags flags;
  std::vector<double> multipliers;  // one per periodic point, by theta
  std::string error;
  double seconds = 0;  // wall time; zero for rows read back from disk
};

Json to_json(const SweepRow& row);
SweepRow sweep_row_from_json(const Json& j);

struct SweepResult {
  std::string domain;
  std::vector<SweepRow> rows;  // sorted by lambda
  long computed = 0, reused = 0;

  // Rotation values nondecreasing over the rows that ran, up to the error
  // bounds of estimated values.
  bool monotone() const;
};

struct Plateau {
  std::string rotation;
  double lo = 0, hi = 0;  // first and last grid lambda with this exact value
  long count = 0;
};

// Maximal runs of consecutive rows with the same exact rotation number.
std::vector<Plateau> plateaus(const SweepResult& result);

// Certifies every lambda of cfg.lambda_grid with cfg.workers threads. Each
// row is stored as dir/rows/<lambda>.json; rows already on disk for the same
// domain are reused, so an interrupted sweep resumes where it stopped. Rows
// are merged by lambda and written to dir/rotation.csv.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& dir);

void write_sweep_csv(const SweepResult& result, const std::string& path);

struct CompareReport {
  double relative_l2 = 0;   // |a - b| / |b| over the compared nodes
  double max_abs_diff = 0;
  double relative_max = 0;  // max |a - b| / max |b|
  long nodes = 0;
  bool has_concentration = false;
  Concentration conc_a, conc_b;
};

// Compares two fields on the same grid over masked nodes at distance at
// least margin from the boundary of domain (all masked nodes when domain is
// null). Concentration deltas need a skeleton. Throws ConfigError when the
// grids differ.
CompareReport compare(const GridField& a, const GridField& b, const Domain* domain = nullptr,
                      double margin = 0, const std::vector<SkeletonSegment>* skeleton = nullptr,
                      double delta = 0.05);

Json to_json(const CompareReport& r);

// The experiments behind the CLI subcommands. Each writes its files into dir
// and returns the one-line summary.
Json run_certify(const ExperimentConfig& cfg, const std::string& dir);
Json run_rotation_sweep(const ExperimentConfig& cfg, const std::string& dir);
Json run_evolve(const ExperimentConfig& cfg, const std::string& dir);
Json run_resolvent(const ExperimentConfig& cfg, const std::string& dir);
Json run_bie(const ExperimentConfig& cfg, const std::string& dir);
Json run_escape(const ExperimentConfig& cfg, const std::string& dir);
Json run_compare(const ExperimentConfig& cfg, const std::string& dir);

// Dispatches on cfg.command.
Json run_experiment(const ExperimentConfig& cfg);

// Exit status for an exception escaping an experiment: 2 for configuration
// and parse errors, 3 for mathematical preconditions, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace iwave

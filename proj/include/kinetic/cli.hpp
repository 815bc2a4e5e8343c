#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kinetic {

inline constexpr const char* kToolVersion = "0.3.0";

struct CaseSpec {
  int dim = 1;
  int max_degree = 8;
  std::vector<int> depths = {1};
};

struct RunConfig {
  std::string name = "run";
  std::string source;  // path the config was read from
  std::uint64_t seed = 42;
  std::vector<CaseSpec> cases = {CaseSpec{}};

  std::vector<std::string> collisions = {"bgk"};
  double tau = 1.0;
  double prandtl = 2.0 / 3.0;
  std::string matrix_path;

  std::string quadratic = "none";  // none | quadratic-bgk | custom-tensor | synthetic
  std::string tensor_path;

  bool include_ladders = true;
  std::string ladder_scope = "equilibrium";
  int max_n = 4;

  // Identity families: operator, quadratic, elimination, controls; "all" expands.
  std::vector<std::string> lemmas;
  std::vector<std::string> modes = {"frozen"};
  std::vector<std::string> order;  // closure variants for the linear order check
  int draws = 50;
  double tol = 1e-10;

  bool thirteen = false;

  bool simulate = false;
  std::vector<std::string> variants = {"hyperbolic"};
  double kn_min = 1e-3, kn_max = 1e-1;
  int points = 6;
  double t_end = 1.0;
  bool nonlinear = false;
  double amplitude = 1e-2;
  int grid = 64;
  bool projection_scaling = false;

  std::string out_dir;
};

// YAML or JSON (by content; JSON is read through the YAML parser). Unknown
// keys and bad values raise ConfigError with the line number.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
// Throws ConfigError on unknown kinds, n above max_n and similar.
void validate(const RunConfig& cfg);

// Canonical JSON of every field (defaults included) and its SHA-256.
std::string canonical_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

const std::vector<std::string>& stage_names();

struct RunOptions {
  std::string stage;  // empty: all stages
  int workers = 1;
  bool strict = false;
};

// Dry-run plan.
std::string describe(const RunConfig& cfg);
// Runs the pipeline and writes artifacts under cfg.out_dir. Returns the exit
// status: 0 iff every requested check passed.
int run_pipeline(const RunConfig& cfg, const RunOptions& opt, std::ostream& log);

}  // namespace kinetic

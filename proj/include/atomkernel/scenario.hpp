#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "atomkernel/measure.hpp"
#include "atomkernel/measurements.hpp"
#include "atomkernel/rkhs.hpp"
#include "atomkernel/solver.hpp"

namespace atomkernel {

// One experiment: a kernel space, a measurement family, a ground truth
// (explicit atoms or a seeded random draw), optional contamination and
// noise, and the solver / certificate parameters to run under. Random
// scenarios are fully determined by `seed`; truth, contamination, and noise
// draw decorrelated sub-streams from it.
struct ScenarioConfig {
  std::string name = "scenario";
  KernelSpace space{};
  MeasurementOperator op{};

  bool truth_is_random = false;
  AtomicMeasure truth;  // explicit atoms when truth_is_random is false
  int random_s = 0;
  double random_min_sep = 0.0;
  double random_modulus_lo = 0.5;
  double random_modulus_hi = 2.0;
  double random_sigma_cap = 0.0;  // plane draws: resample until the support
                                  // coherence excess stays under the cap

  bool contamination_is_random = false;
  AtomicMeasure contamination;
  int contamination_s = 0;
  double contamination_mass = 0.0;

  double noise_eps = 0.0;
  std::uint64_t seed = 0;
  SolverConfig solver;

  double cert_lambda = 0.34 * 0.16749 * 0.16749;
  double cert_delta = 0.0;  // 0 picks 0.16749/m for the Fourier families
  int cert_trials = 16;
  double cert_grid_res = 0.0;

  std::string output_dir = ".";
};

// Parses and validates one scenario object. Violations throw ConfigError
// with the offending field path in the message.
ScenarioConfig parse_scenario(const nlohmann::json& j);

// Materializes the randomized parts of a scenario. Deterministic in
// cfg.seed; rejection-samples supports until the minimum separation (and,
// on the plane, the coherence cap) holds.
AtomicMeasure draw_truth(const ScenarioConfig& cfg);
AtomicMeasure draw_contamination(const ScenarioConfig& cfg);

// Cartesian expansion of a config whose "sweep" object maps dotted field
// paths to value arrays. Scenarios are ordered row-major over the sweep
// keys in sorted order (the last key varies fastest), names carry the
// expansion index, and every scenario that does not sweep "seed" receives
// a sub-seed derived from the base seed and its index. Empty value arrays
// throw ConfigError.
std::vector<ScenarioConfig> sweep_expand(const nlohmann::json& config);

// Flat per-scenario outcome; missing entries stay NaN and serialize to
// empty CSV cells. `assert_ok` carries the pipeline's own pass criterion
// (validation ok / converged / bound satisfied).
struct ScenarioRow {
  std::string scenario;
  std::uint64_t seed = 0;
  int s = -1;
  double min_sep = 0.0;
  double support_err = 0.0;
  double weight_err = 0.0;
  double unmatched_mass = 0.0;
  double tv_value = 0.0;
  double residual_norm = 0.0;
  double dual_sup = 0.0;
  int converged = -1;  // -1 marks not-applicable for tri-state flags
  double cert_condition = 0.0;
  double cert_interp_residual = 0.0;
  double cert_sup_norm = 0.0;
  double cert_far_margin = 0.0;
  int cert_ok = -1;
  double C_upper = 0.0;
  double bound_rhs = 0.0;
  double observed_mass = 0.0;
  int satisfied = -1;
  bool assert_ok = true;
};

ScenarioRow run_certify(const ScenarioConfig& cfg);
ScenarioRow run_recover(const ScenarioConfig& cfg);
ScenarioRow run_stability(const ScenarioConfig& cfg);

std::string scenario_csv_header();
std::string scenario_csv_row(const ScenarioRow& row);
nlohmann::json scenario_row_to_json(const ScenarioRow& row);

// Drives a full pipeline run: expands sweeps, executes scenarios (up to
// `jobs` at a time, merged back in scenario order), and writes results.json,
// results.csv, and run-manifest.json into out_dir. A seed_override (from
// ATOMKERNEL_SEED) replaces every scenario's base seed. Returns the process
// exit code: 0 on success, 2 on configuration errors, 3 when assert_mode is
// set and some scenario failed its pass criterion, 1 on runtime failures.
struct RunOutcome {
  int exit_code = 0;
  std::string message;
};
RunOutcome run_pipeline(const std::string& pipeline, const nlohmann::json& config,
                        const std::string& out_dir, int jobs, bool assert_mode,
                        const std::uint64_t* seed_override);

// File-level wrapper: reads the config, reports parse errors with line
// numbers, honors the ATOMKERNEL_SEED environment override, and defers to
// run_pipeline. out_dir_override empty means the config's output_dir.
RunOutcome run_config_file(const std::string& pipeline, const std::string& config_path,
                           const std::string& out_dir_override, int jobs, bool assert_mode);

// FNV-1a of the canonical config text, recorded in the run manifest.
std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace atomkernel

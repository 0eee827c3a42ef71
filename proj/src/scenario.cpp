#include "atomkernel/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "atomkernel/certificate.hpp"
#include "atomkernel/errors.hpp"
#include "atomkernel/rng.hpp"
#include "atomkernel/stability.hpp"

namespace atomkernel {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  return j.get<double>();
}

int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  return j.get<int>();
}

KernelSpace parse_space(const json& j) {
  if (!j.is_object() || !j.contains("type")) config_fail("space", "needs a type field");
  const std::string type = j.at("type").get<std::string>();
  if (type == "trig_torus") {
    if (!j.contains("m")) config_fail("space.m", "trig_torus needs a degree");
    return KernelSpace::trig_torus(require_int(j.at("m"), "space.m"));
  }
  if (type == "paley_wiener") return KernelSpace::paley_wiener();
  if (type == "bargmann") {
    if (!j.contains("R")) config_fail("space.R", "bargmann needs a radius");
    return KernelSpace::bargmann(require_number(j.at("R"), "space.R"));
  }
  config_fail("space.type", "unknown kernel space '" + type + "'");
}

MeasurementOperator parse_operator(const json& j) {
  if (!j.is_object() || !j.contains("type")) config_fail("operator", "needs a type field");
  const std::string type = j.at("type").get<std::string>();
  const bool normalized = j.value("normalized", true);
  if (type == "torus_fourier") {
    if (!j.contains("m")) config_fail("operator.m", "torus_fourier needs a degree");
    return MeasurementOperator::torus_fourier(require_int(j.at("m"), "operator.m"), normalized);
  }
  if (type == "mollified_fourier") {
    for (const char* f : {"m", "L", "rho"})
      if (!j.contains(f)) config_fail(std::string("operator.") + f, "field is required");
    return MeasurementOperator::mollified_fourier(require_int(j.at("m"), "operator.m"),
                                                  require_number(j.at("L"), "operator.L"),
                                                  require_number(j.at("rho"), "operator.rho"),
                                                  normalized);
  }
  if (type == "bargmann_monomials") {
    if (!j.contains("N")) config_fail("operator.N", "bargmann_monomials needs a degree count");
    return MeasurementOperator::bargmann_monomials(require_int(j.at("N"), "operator.N"),
                                                   normalized);
  }
  config_fail("operator.type", "unknown measurement family '" + type + "'");
}

void parse_solver(const json& j, SolverConfig& cfg) {
  if (!j.is_object()) config_fail("solver", "expected an object");
  for (const auto& [key, val] : j.items()) {
    const std::string path = "solver." + key;
    if (key == "grid_size") cfg.grid_size = require_int(val, path);
    else if (key == "reg_lambda") cfg.reg_lambda = require_number(val, path);
    else if (key == "eps") cfg.eps = require_number(val, path);
    else if (key == "max_outer_iters") cfg.max_outer_iters = require_int(val, path);
    else if (key == "prox_tol") cfg.prox_tol = require_number(val, path);
    else if (key == "merge_radius") cfg.merge_radius = require_number(val, path);
    else if (key == "max_inner_iters") cfg.max_inner_iters = require_int(val, path);
    else if (key == "refine_max_iters") cfg.refine.max_iters = require_int(val, path);
    else if (key == "refine_grad_tol") cfg.refine.grad_tol = require_number(val, path);
    else config_fail(path, "unknown solver field");
  }
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  return Rng(seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1))).next_u64();
}

}  // namespace

ScenarioConfig parse_scenario(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    (void)val;
    static const char* known[] = {"name",   "space",         "operator", "truth",
                                  "contamination", "noise_eps",     "seed",     "solver",
                                  "certificate",   "output_dir",    "sweep",    "pipeline"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known))
      config_fail(key, "unknown top-level field");
  }

  ScenarioConfig cfg;
  cfg.name = j.value("name", std::string("scenario"));
  if (!j.contains("space")) config_fail("space", "field is required");
  if (!j.contains("operator")) config_fail("operator", "field is required");
  cfg.space = parse_space(j.at("space"));
  cfg.op = parse_operator(j.at("operator"));
  if (cfg.space.domain() != cfg.op.domain())
    config_fail("operator", "measurement family and kernel space use different domains");

  if (!j.contains("truth")) config_fail("truth", "field is required");
  const json& t = j.at("truth");
  if (t.contains("atoms") == t.contains("random"))
    config_fail("truth", "give exactly one of atoms or random");
  if (t.contains("atoms")) {
    cfg.truth = measure_from_json(t.at("atoms"), cfg.op.domain());
    if (cfg.truth.empty()) config_fail("truth.atoms", "needs at least one atom");
  } else {
    const json& r = t.at("random");
    cfg.truth_is_random = true;
    if (!r.contains("s")) config_fail("truth.random.s", "field is required");
    cfg.random_s = require_int(r.at("s"), "truth.random.s");
    if (cfg.random_s < 1) config_fail("truth.random.s", "needs at least one atom");
    if (!r.contains("min_separation"))
      config_fail("truth.random.min_separation", "field is required");
    cfg.random_min_sep = require_number(r.at("min_separation"), "truth.random.min_separation");
    if (!(cfg.random_min_sep > 0.0))
      config_fail("truth.random.min_separation", "must be positive");
    if (r.contains("modulus")) {
      const json& mrange = r.at("modulus");
      if (!mrange.is_array() || mrange.size() != 2)
        config_fail("truth.random.modulus", "expected [lo, hi]");
      cfg.random_modulus_lo = mrange.at(0).get<double>();
      cfg.random_modulus_hi = mrange.at(1).get<double>();
      if (!(0.0 < cfg.random_modulus_lo && cfg.random_modulus_lo <= cfg.random_modulus_hi))
        config_fail("truth.random.modulus", "needs 0 < lo <= hi");
    }
    cfg.random_sigma_cap = r.value("sigma_cap", 0.0);
    if (cfg.random_sigma_cap > 0.0 && cfg.op.domain() != DomainKind::Plane)
      config_fail("truth.random.sigma_cap", "only meaningful on the plane");
  }

  if (j.contains("contamination")) {
    const json& c = j.at("contamination");
    if (c.contains("atoms") == c.contains("random"))
      config_fail("contamination", "give exactly one of atoms or random");
    if (c.contains("atoms")) {
      cfg.contamination = measure_from_json(c.at("atoms"), cfg.op.domain());
    } else {
      const json& r = c.at("random");
      cfg.contamination_is_random = true;
      cfg.contamination_s = r.value("s", 1);
      if (cfg.contamination_s < 1) config_fail("contamination.random.s", "needs at least one atom");
      if (!r.contains("mass")) config_fail("contamination.random.mass", "field is required");
      cfg.contamination_mass = require_number(r.at("mass"), "contamination.random.mass");
      if (cfg.contamination_mass < 0.0)
        config_fail("contamination.random.mass", "must be nonnegative");
    }
  }

  cfg.noise_eps = j.value("noise_eps", 0.0);
  if (cfg.noise_eps < 0.0 || !std::isfinite(cfg.noise_eps))
    config_fail("noise_eps", "must be a nonnegative number");
  cfg.seed = j.value("seed", std::uint64_t{0});

  if (j.contains("solver")) parse_solver(j.at("solver"), cfg.solver);
  if (cfg.solver.eps == 0.0) cfg.solver.eps = cfg.noise_eps;

  if (j.contains("certificate")) {
    const json& c = j.at("certificate");
    if (!c.is_object()) config_fail("certificate", "expected an object");
    cfg.cert_lambda = c.value("lambda", cfg.cert_lambda);
    if (!(cfg.cert_lambda > 0.0 && cfg.cert_lambda < 1.0))
      config_fail("certificate.lambda", "must lie strictly between 0 and 1");
    cfg.cert_delta = c.value("delta", 0.0);
    cfg.cert_trials = c.value("trials", 16);
    if (cfg.cert_trials < 1) config_fail("certificate.trials", "needs at least one trial");
    cfg.cert_grid_res = c.value("grid_res", 0.0);
  }
  if (cfg.cert_delta == 0.0) {
    if (cfg.op.domain() == DomainKind::Plane)
      config_fail("certificate.delta", "plane scenarios must set the neighborhood radius");
    cfg.cert_delta = 0.16749 / cfg.op.m;
  }

  cfg.output_dir = j.value("output_dir", std::string("."));
  return cfg;
}

namespace {

// torus: uniform with wrap separation; line: inside the window with an edge
// margin of one near-radius unit; plane: uniform over the disc
std::vector<DomainPoint> draw_support(Rng& rng, const ScenarioConfig& cfg, int s,
                                      double min_sep) {
  const DomainKind kind = cfg.op.domain();
  for (int attempt = 0; attempt < 200000; ++attempt) {
    std::vector<DomainPoint> pts;
    switch (kind) {
      case DomainKind::Torus:
        for (int k = 0; k < s; ++k) pts.push_back(DomainPoint::torus(rng.uniform()));
        break;
      case DomainKind::Line: {
        const double margin = 5.0 / cfg.op.m;  // keep near regions inside the window
        const double half = 0.5 - margin;
        for (int k = 0; k < s; ++k)
          pts.push_back(DomainPoint::line(cfg.op.L * rng.uniform(-half, half)));
        break;
      }
      case DomainKind::Plane: {
        const double R = cfg.space.R;
        for (int k = 0; k < s; ++k) {
          // rejection inside the square keeps the draw uniform over the disc
          double x = 0.0, y = 0.0;
          do {
            x = rng.uniform(-R, R);
            y = rng.uniform(-R, R);
          } while (x * x + y * y > R * R);
          pts.push_back(DomainPoint::plane(cplx(x, y)));
        }
        break;
      }
    }
    if (s > 1) {
      const SupportSet T{pts};
      if (min_separation(T) < min_sep) continue;
      if (cfg.random_sigma_cap > 0.0 && kind == DomainKind::Plane &&
          sigma_down(T) - 1.0 > cfg.random_sigma_cap)
        continue;
    }
    return pts;
  }
  throw InvalidValueError("could not draw a support at the requested separation");
}

AtomicMeasure draw_atoms(Rng& rng, const ScenarioConfig& cfg, int s, double min_sep,
                         double mod_lo, double mod_hi) {
  const std::vector<DomainPoint> pts = draw_support(rng, cfg, s, min_sep);
  std::vector<Atom> atoms;
  for (const auto& p : pts) {
    const double mod = rng.uniform(mod_lo, mod_hi);
    atoms.push_back({p, mod * rng.unit_phase()});
  }
  return AtomicMeasure(std::move(atoms));
}

}  // namespace

AtomicMeasure draw_truth(const ScenarioConfig& cfg) {
  if (!cfg.truth_is_random) return cfg.truth;
  Rng rng(sub_seed(cfg.seed, 1));
  return draw_atoms(rng, cfg, cfg.random_s, cfg.random_min_sep, cfg.random_modulus_lo,
                    cfg.random_modulus_hi);
}

AtomicMeasure draw_contamination(const ScenarioConfig& cfg) {
  if (!cfg.contamination_is_random) return cfg.contamination;
  if (cfg.contamination_mass == 0.0) return AtomicMeasure();
  Rng rng(sub_seed(cfg.seed, 2));
  const double per_atom = cfg.contamination_mass / cfg.contamination_s;
  AtomicMeasure raw = draw_atoms(rng, cfg, cfg.contamination_s,
                                 1e-6,  // contamination carries no separation promise
                                 per_atom, per_atom);
  return raw;
}

namespace {

void set_by_path(json& j, const std::string& path, const json& value) {
  json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) config_fail("sweep." + path, "empty path segment");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

}  // namespace

std::vector<ScenarioConfig> sweep_expand(const json& config) {
  if (!config.is_object()) throw ConfigError("sweep config must be a JSON object");
  json base = config;
  base.erase("sweep");
  base.erase("pipeline");

  std::vector<std::pair<std::string, json>> axes;
  if (config.contains("sweep")) {
    const json& sw = config.at("sweep");
    if (!sw.is_object()) config_fail("sweep", "expected an object of field -> values");
    for (const auto& [key, vals] : sw.items()) {
      if (!vals.is_array() || vals.empty())
        config_fail("sweep." + key, "expected a nonempty value array");
      axes.emplace_back(key, vals);  // object iteration is already key-sorted
    }
  }

  std::size_t total = 1;
  for (const auto& [key, vals] : axes) {
    (void)key;
    total *= vals.size();
  }

  const bool sweeps_seed =
      std::any_of(axes.begin(), axes.end(), [](const auto& a) { return a.first == "seed"; });
  const std::uint64_t base_seed = base.value("seed", std::uint64_t{0});
  const std::string base_name = base.value("name", std::string("scenario"));

  std::vector<ScenarioConfig> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    json inst = base;
    std::size_t rem = idx;
    // row-major: the last axis varies fastest
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& [key, vals] = axes[a];
      set_by_path(inst, key, vals.at(rem % vals.size()));
      rem /= vals.size();
    }
    if (!axes.empty()) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "#%04zu", idx);
      inst["name"] = base_name + tag;
      if (!sweeps_seed) inst["seed"] = sub_seed(base_seed, 0x73776565ULL + idx);
    }
    out.push_back(parse_scenario(inst));
  }
  return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void mark_all_missing(ScenarioRow& row) {
  row.min_sep = kNaN;
  row.support_err = kNaN;
  row.weight_err = kNaN;
  row.unmatched_mass = kNaN;
  row.tv_value = kNaN;
  row.residual_norm = kNaN;
  row.dual_sup = kNaN;
  row.cert_condition = kNaN;
  row.cert_interp_residual = kNaN;
  row.cert_sup_norm = kNaN;
  row.cert_far_margin = kNaN;
  row.C_upper = kNaN;
  row.bound_rhs = kNaN;
  row.observed_mass = kNaN;
}

ScenarioRow base_row(const ScenarioConfig& cfg, const AtomicMeasure& truth) {
  ScenarioRow row;
  mark_all_missing(row);
  row.scenario = cfg.name;
  row.seed = cfg.seed;
  row.s = static_cast<int>(truth.size());
  row.min_sep = truth.size() > 1 ? min_separation(truth.support()) : kNaN;
  return row;
}

Eigen::VectorXcd truth_signs(const AtomicMeasure& truth) {
  Eigen::VectorXcd omega(static_cast<Eigen::Index>(truth.size()));
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const cplx c = truth.atoms()[k].c;
    const double m = std::abs(c);
    omega[static_cast<Eigen::Index>(k)] = m > 0.0 ? c / m : cplx(1.0, 0.0);
  }
  return omega;
}

Certificate build_for(const ScenarioConfig& cfg, const SupportSet& T,
                      const Eigen::VectorXcd& omega) {
  switch (cfg.op.type) {
    case MeasurementOperator::Type::TorusFourier:
      return build_torus_certificate(T, omega, cfg.op.m);
    case MeasurementOperator::Type::MollifiedFourier:
      return build_pw_certificate(T, omega, cfg.op.m, cfg.op.rho, cfg.op.L);
    case MeasurementOperator::Type::BargmannMonomials:
      return build_bargmann_certificate(cfg.space, T, omega);
  }
  throw InvalidValueError("unknown measurement family");
}

MeasurementVector synthesize_data(const ScenarioConfig& cfg, const AtomicMeasure& truth,
                                  const AtomicMeasure& contamination) {
  const ContaminationSpec spec{contamination};
  MeasurementVector b =
      apply(cfg.op, cfg.space, truth, contamination.empty() ? nullptr : &spec);
  if (cfg.noise_eps > 0.0) b = add_noise(b, cfg.noise_eps, sub_seed(cfg.seed, 3));
  return b;
}

void fill_recovery(ScenarioRow& row, const ScenarioConfig& cfg, const SolverResult& res,
                   const AtomicMeasure& truth) {
  row.tv_value = res.tv_value;
  row.residual_norm = res.residual_norm;
  row.dual_sup = res.dual_sup;
  row.converged = res.converged ? 1 : 0;
  const MatchError err = atom_match_error(res.measure, truth);
  row.support_err = err.support_err;
  row.weight_err = err.weight_err;
  row.unmatched_mass = err.unmatched_mass;
  (void)cfg;
}

}  // namespace

ScenarioRow run_certify(const ScenarioConfig& cfg) {
  const AtomicMeasure truth = draw_truth(cfg);
  ScenarioRow row = base_row(cfg, truth);

  const Certificate cert = build_for(cfg, truth.support(), truth_signs(truth));
  const ValidationReport rep = validate(cert, cfg.cert_grid_res);
  row.cert_condition = cert.condition;
  row.cert_interp_residual = cert.interp_residual;
  row.cert_sup_norm = rep.sup_norm;
  row.cert_far_margin = rep.far_margin;
  row.cert_ok = rep.ok() ? 1 : 0;
  row.assert_ok = rep.ok();
  return row;
}

ScenarioRow run_recover(const ScenarioConfig& cfg) {
  const AtomicMeasure truth = draw_truth(cfg);
  const AtomicMeasure contamination = draw_contamination(cfg);
  ScenarioRow row = base_row(cfg, truth);

  const MeasurementVector b = synthesize_data(cfg, truth, contamination);
  const SolverResult res = solve(cfg.op, cfg.space, b, cfg.solver);
  fill_recovery(row, cfg, res, truth);
  row.assert_ok = res.converged;
  return row;
}

ScenarioRow run_stability(const ScenarioConfig& cfg) {
  const AtomicMeasure truth = draw_truth(cfg);
  const AtomicMeasure contamination = draw_contamination(cfg);
  ScenarioRow row = base_row(cfg, truth);

  const MeasurementVector b = synthesize_data(cfg, truth, contamination);
  const SolverResult res = solve(cfg.op, cfg.space, b, cfg.solver);
  fill_recovery(row, cfg, res, truth);

  const SupportSet T = truth.support();
  const double C =
      estimate_C(cfg.space, cfg.op, T, cfg.cert_lambda, cfg.cert_delta, cfg.cert_trials,
                 sub_seed(cfg.seed, 4));
  const ConcentrationBound bound = concentration_bound(
      truth, ContaminationSpec{contamination}, cfg.noise_eps, cfg.cert_lambda, cfg.cert_delta, C);
  const StabilityReport rep = check_concentration(res, T, cfg.cert_delta, bound);
  row.C_upper = rep.C_upper;
  row.bound_rhs = rep.bound_rhs;
  row.observed_mass = rep.observed_mass;
  row.satisfied = rep.satisfied ? 1 : 0;
  row.assert_ok = res.converged && rep.satisfied;
  return row;
}

namespace {

void append_cell(std::string& out, double v) {
  out.push_back(',');
  if (std::isnan(v)) return;  // not applicable: empty cell
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void append_cell(std::string& out, int tri) {
  out.push_back(',');
  if (tri < 0) return;
  out += tri ? '1' : '0';
}

void add_json_field(json& j, const char* key, double v) {
  if (!std::isnan(v)) j[key] = v;
}

void add_json_field(json& j, const char* key, int tri) {
  if (tri >= 0) j[key] = (tri != 0);
}

}  // namespace

std::string scenario_csv_header() {
  return "scenario,seed,s,min_sep,support_err,weight_err,unmatched_mass,tv_value,"
         "residual_norm,dual_sup,converged,cert_condition,cert_interp_residual,"
         "cert_sup_norm,cert_far_margin,cert_ok,C_upper,bound_rhs,observed_mass,satisfied";
}

std::string scenario_csv_row(const ScenarioRow& row) {
  std::string out = row.scenario;
  out += ',';
  out += std::to_string(row.seed);
  out += ',';
  if (row.s >= 0) out += std::to_string(row.s);
  append_cell(out, row.min_sep);
  append_cell(out, row.support_err);
  append_cell(out, row.weight_err);
  append_cell(out, row.unmatched_mass);
  append_cell(out, row.tv_value);
  append_cell(out, row.residual_norm);
  append_cell(out, row.dual_sup);
  append_cell(out, row.converged);
  append_cell(out, row.cert_condition);
  append_cell(out, row.cert_interp_residual);
  append_cell(out, row.cert_sup_norm);
  append_cell(out, row.cert_far_margin);
  append_cell(out, row.cert_ok);
  append_cell(out, row.C_upper);
  append_cell(out, row.bound_rhs);
  append_cell(out, row.observed_mass);
  append_cell(out, row.satisfied);
  return out;
}

json scenario_row_to_json(const ScenarioRow& row) {
  json j;
  j["scenario"] = row.scenario;
  j["seed"] = row.seed;
  if (row.s >= 0) j["s"] = row.s;
  add_json_field(j, "min_sep", row.min_sep);
  add_json_field(j, "support_err", row.support_err);
  add_json_field(j, "weight_err", row.weight_err);
  add_json_field(j, "unmatched_mass", row.unmatched_mass);
  add_json_field(j, "tv_value", row.tv_value);
  add_json_field(j, "residual_norm", row.residual_norm);
  add_json_field(j, "dual_sup", row.dual_sup);
  add_json_field(j, "converged", row.converged);
  add_json_field(j, "cert_condition", row.cert_condition);
  add_json_field(j, "cert_interp_residual", row.cert_interp_residual);
  add_json_field(j, "cert_sup_norm", row.cert_sup_norm);
  add_json_field(j, "cert_far_margin", row.cert_far_margin);
  add_json_field(j, "cert_ok", row.cert_ok);
  add_json_field(j, "C_upper", row.C_upper);
  add_json_field(j, "bound_rhs", row.bound_rhs);
  add_json_field(j, "observed_mass", row.observed_mass);
  add_json_field(j, "satisfied", row.satisfied);
  j["assert_ok"] = row.assert_ok;
  return j;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunOutcome run_pipeline(const std::string& pipeline, const json& config,
                        const std::string& out_dir, int jobs, bool assert_mode,
                        const std::uint64_t* seed_override) {
  ScenarioRow (*runner)(const ScenarioConfig&) = nullptr;
  if (pipeline == "certify") runner = run_certify;
  else if (pipeline == "recover") runner = run_recover;
  else if (pipeline == "stability") runner = run_stability;
  else if (pipeline != "sweep") return {2, "unknown pipeline '" + pipeline + "'"};

  std::vector<ScenarioConfig> scenarios;
  try {
    if (pipeline == "sweep") {
      if (!config.contains("pipeline"))
        throw ConfigError("pipeline: sweep configs must name the pipeline to run");
      const std::string inner = config.at("pipeline").get<std::string>();
      if (inner == "certify") runner = run_certify;
      else if (inner == "recover") runner = run_recover;
      else if (inner == "stability") runner = run_stability;
      else throw ConfigError("pipeline: unknown pipeline '" + inner + "'");
      scenarios = sweep_expand(config);
    } else {
      if (config.contains("sweep"))
        throw ConfigError("sweep: ranged fields need the sweep subcommand");
      scenarios.push_back(parse_scenario(config));
    }
  } catch (const ConfigError& e) {
    return {2, e.what()};
  }

  if (seed_override)
    for (auto& sc : scenarios) sc.seed = *seed_override;

  // run scenarios (possibly a few at a time), merge in scenario order
  std::vector<ScenarioRow> rows(scenarios.size());
  std::vector<std::string> errors(scenarios.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      try {
        rows[i] = runner(scenarios[i]);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_jobs = std::max(1, std::min<int>(jobs, static_cast<int>(scenarios.size())));
  if (n_jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < scenarios.size(); ++i)
    if (!errors[i].empty())
      return {1, "scenario '" + scenarios[i].name + "' failed: " + errors[i]};

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return {1, "cannot create output directory " + out_dir + ": " + ec.message()};

  std::string csv = scenario_csv_header();
  csv.push_back('\n');
  json results = json::array();
  bool all_ok = true;
  for (const auto& row : rows) {
    csv += scenario_csv_row(row);
    csv.push_back('\n');
    results.push_back(scenario_row_to_json(row));
    all_ok = all_ok && row.assert_ok;
  }

  const std::string config_text = config.dump();
  json manifest;
  manifest["tool"] = "atomkernel";
  manifest["pipeline"] = pipeline;
  manifest["config_fnv1a"] = fnv1a_hash(config_text);
  manifest["config"] = config;
  manifest["scenarios"] = scenarios.size();
  manifest["seed_override"] = seed_override != nullptr;
  if (seed_override) manifest["seed"] = *seed_override;

  const auto write_file = [&](const char* name, const std::string& text) -> bool {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    out << text;
    return static_cast<bool>(out);
  };
  json results_doc;
  results_doc["results"] = std::move(results);
  if (!write_file("results.csv", csv) ||
      !write_file("results.json", results_doc.dump(2) + "\n") ||
      !write_file("run-manifest.json", manifest.dump(2) + "\n"))
    return {1, "failed to write results into " + out_dir};

  if (assert_mode && !all_ok) return {3, "some scenarios failed their pass criterion"};
  return {0, ""};
}

RunOutcome run_config_file(const std::string& pipeline, const std::string& config_path,
                           const std::string& out_dir_override, int jobs, bool assert_mode) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) return {2, "cannot open config file " + config_path};
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  json config;
  try {
    config = json::parse(text);
  } catch (const json::parse_error& e) {
    // translate the byte offset into a line number for the diagnostic
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i)
      if (text[i] == '\n') ++line;
    return {2, config_path + ":" + std::to_string(line) + ": " + e.what()};
  }

  std::uint64_t seed_value = 0;
  const std::uint64_t* seed_override = nullptr;
  if (const char* env = std::getenv("ATOMKERNEL_SEED")) {
    char* end = nullptr;
    seed_value = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') return {2, "ATOMKERNEL_SEED is not an unsigned integer"};
    seed_override = &seed_value;
  }

  std::string out_dir = out_dir_override;
  if (out_dir.empty()) {
    out_dir = config.is_object() ? config.value("output_dir", std::string(".")) : std::string(".");
  }
  return run_pipeline(pipeline, config, out_dir, jobs, assert_mode, seed_override);
}

}  // namespace atomkernel

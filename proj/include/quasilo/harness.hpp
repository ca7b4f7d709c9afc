// Experiment runner: one JSON config per run, a JSON record plus a flat CSV
// of headline numbers per run, and a batch driver over a directory.
#pragma once

#include "quasilo/io.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace quasilo {

namespace fs = std::filesystem;
using io::json;

inline const std::set<std::string>& experiment_names() {
  static const std::set<std::string> names = {"sharp-lo",     "esseen-audit", "lemma-tv",
                                              "hyperplane",   "gap-pipeline", "body-constants"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  std::string name;    ///< file stem for outputs
  std::uint64_t seed = 1;
  std::size_t samples = 100000;
  std::string output;  ///< directory; empty means no files
  json params = json::object();
};

struct RunRecord {
  std::string experiment;
  std::string name;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  json config;
  json outputs;
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
  double wall_time_seconds = 0.0;
};

/// Shortest round-trip decimal form.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string format_cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number()) return format_number(v.get<double>());
  return v.dump();
}

// ---------------------------------------------------------------------------
// Config parsing.

inline ExperimentConfig parse_config(const json& j) {
  using namespace io;
  if (!j.is_object()) fail("", "expected a JSON object");
  ExperimentConfig c;
  const json& e = field(j, "experiment", "");
  if (!e.is_string() || !experiment_names().count(e.get<std::string>()))
    fail("/experiment", "must be one of sharp-lo, esseen-audit, lemma-tv, hyperplane, gap-pipeline, body-constants");
  c.experiment = e.get<std::string>();
  c.name = c.experiment;
  if (j.contains("name")) {
    if (!j["name"].is_string() || j["name"].get<std::string>().empty()) fail("/name", "expected a nonempty string");
    c.name = j["name"].get<std::string>();
  }
  c.seed = static_cast<std::uint64_t>(integer_or(j, "seed", 1, ""));
  c.samples = static_cast<std::size_t>(positive_integer_or(j, "samples", 100000, ""));
  if (j.contains("output")) {
    if (!j["output"].is_string()) fail("/output", "expected a string");
    c.output = j["output"].get<std::string>();
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) fail("/params", "expected an object");
    c.params = j["params"];
  }
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j = {{"experiment", c.experiment}, {"name", c.name}, {"seed", c.seed}, {"samples", c.samples},
            {"params", c.params}};
  if (!c.output.empty()) j["output"] = c.output;
  return j;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Experiments.

namespace experiments {

inline const std::string kParams = "/params";

/// Explicit "system", or "generator" {count, n, d, R, scale, seed} together
/// with "body" and "noise": coordinates uniform in [−scale, scale].
inline std::vector<io::SystemSpec> systems_from(const json& p) {
  using namespace io;
  if (p.contains("system")) return {system_from(p["system"], kParams + "/system")};
  if (!p.contains("generator")) fail(kParams, "needs 'system' or 'generator'");
  const std::string at = kParams + "/generator";
  const json& g = p["generator"];
  const std::int64_t count = positive_integer_or(g, "count", 1, at);
  const std::int64_t n = positive_integer_or(g, "n", 4, at);
  const double R = number_or(g, "R", 1.0, at);
  if (!(R > 0.0)) fail(at + "/R", "must be positive");
  const double scale = number_or(g, "scale", 1.0, at);
  if (!(scale > 0.0)) fail(at + "/scale", "must be positive");
  const std::uint64_t seed = static_cast<std::uint64_t>(integer_or(g, "seed", 1, at));
  const StarBody body = body_from(field(p, "body", kParams), kParams + "/body");
  if (g.contains("d") && integer(g["d"], at + "/d") != body.dimension()) fail(at + "/d", "does not match the body");
  const NoiseModel noise = p.contains("noise") ? noise_from(p["noise"], kParams + "/noise") : NoiseModel::bernoulli();
  std::vector<io::SystemSpec> out;
  for (std::int64_t c = 0; c < count; ++c) {
    Rng rng = block_rng(seed, static_cast<std::uint64_t>(c));
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Vec> vs;
    for (std::int64_t i = 0; i < n; ++i) {
      Vec v(body.dimension());
      for (int k = 0; k < body.dimension(); ++k) v(k) = u(rng);
      vs.push_back(v);
    }
    out.push_back({VectorSystem(vs, R, body), noise});
  }
  return out;
}

inline BodyConstants constants_for(const StarBody& body, std::size_t samples, std::uint64_t seed) {
  if (auto ref = reference_constants(body)) return *ref;
  return estimate_constants(body, samples, seed);
}

inline void sharp_lo(const ExperimentConfig& c, RunRecord& r) {
  using namespace io;
  const json& p = c.params;
  std::vector<double> ns = number_list(field(p, "n", kParams), kParams + "/n");
  std::vector<double> Rs = number_list(field(p, "R", kParams), kParams + "/R");
  for (double n : ns)
    if (n != std::floor(n) || n < 1 || n > 24) fail(kParams + "/n", "n must be an integer in [1, 24]");
  for (double R : Rs)
    if (!(R > 0.0) || !std::isfinite(R)) fail(kParams + "/R", "R must be positive");
  r.csv_header = {"n", "R", "rho", "bound", "ratio", "exact_equality"};
  json rows = json::array();
  for (double n : ns)
    for (double R : Rs) {
      const SharpLoReport s = sharp_lo_report(static_cast<int>(n), R);
      rows.push_back({{"n", s.n}, {"R", s.R}, {"rho", s.rho}, {"bound", s.bound}, {"ratio", s.ratio},
                      {"exact_equality", s.exact_equality}});
      r.csv_rows.push_back({std::to_string(s.n), format_number(s.R), format_number(s.rho), format_number(s.bound),
                            format_number(s.ratio), s.exact_equality ? "true" : "false"});
    }
  r.outputs = {{"rows", rows}};
}

inline void esseen_audit(const ExperimentConfig& c, RunRecord& r) {
  using namespace io;
  const json& p = c.params;
  const std::vector<io::SystemSpec> systems = systems_from(p);
  const std::size_t samples = static_cast<std::size_t>(positive_integer_or(p, "samples", std::int64_t(c.samples), kParams));
  if (samples < kMinEsseenSamples) fail(kParams + "/samples", "needs at least 1000 samples");
  std::vector<double> t_grid;
  if (p.contains("t_grid")) {
    t_grid = number_list(p["t_grid"], kParams + "/t_grid");
    for (double t : t_grid)
      if (!(t > 0.0)) fail(kParams + "/t_grid", "dilations must be positive");
  }
  r.csv_header = {"system", "rho", "certificate", "esseen_bound", "esseen_se", "eta_bound", "eta_se", "k_holds",
                  "eta_holds"};
  if (!t_grid.empty()) r.csv_header.insert(r.csv_header.end(), {"t_star", "scaled_bound"});
  json rows = json::array();
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const auto& [sys, noise] = systems[i];
    const BodyConstants bc = constants_for(sys.body, samples, c.seed);
    const SmallBallResult rho = rho_exact(sys, noise);
    const EsseenEstimate eb = esseen_bound(sys, noise, bc, samples, c.seed + i);
    const EsseenEstimate ee = esseen_eta_bound(sys, noise, bc, samples, c.seed + i);
    const bool k_holds = rho.rho <= eb.value + 4.0 * eb.std_error;
    const bool eta_holds = rho.rho <= ee.value + 4.0 * ee.std_error;
    json row = {{"system", to_json(sys, noise)}, {"constants", to_json(bc)}, {"rho", to_json(rho)},
                {"esseen_bound", to_json(eb)},   {"eta_bound", to_json(ee)}, {"k_holds", k_holds},
                {"eta_holds", eta_holds}};
    std::vector<std::string> csv = {std::to_string(i),           format_number(rho.rho),
                                    to_string(rho.certificate),  format_number(eb.value),
                                    format_number(eb.std_error), format_number(ee.value),
                                    format_number(ee.std_error), k_holds ? "true" : "false",
                                    eta_holds ? "true" : "false"};
    if (!t_grid.empty()) {
      const ScaledBoundResult sb = optimize_scaled_bound(sys, noise, t_grid, samples, c.seed + i);
      json prof = json::array();
      for (const ScaledBoundPoint& q : sb.profile)
        prof.push_back({{"t", q.t}, {"kappa", q.kappa}, {"integral", q.integral}, {"value", q.value},
                        {"std_error", q.std_error}});
      row["scaled_bound"] = {{"t_star", sb.t_star}, {"best", sb.best}, {"std_error", sb.best_std_error},
                             {"profile", prof}};
      csv.push_back(format_number(sb.t_star));
      csv.push_back(format_number(sb.best));
    }
    rows.push_back(row);
    r.csv_rows.push_back(csv);
  }
  r.outputs = {{"rows", rows}};
}

inline void lemma_tv(const ExperimentConfig& c, RunRecord& r) {
  using namespace io;
  const json& p = c.params;
  const std::vector<double> lambdas =
      p.contains("lambda") ? number_list(p["lambda"], kParams + "/lambda") : std::vector<double>{0.01, 0.1, 1, 10, 100};
  const std::vector<double> ws =
      p.contains("w") ? number_list(p["w"], kParams + "/w") : std::vector<double>{0.1, 1, 10};
  const std::vector<double> alphas =
      p.contains("alpha") ? number_list(p["alpha"], kParams + "/alpha") : std::vector<double>{0, 1, kPi / 3};
  const std::int64_t qp = positive_integer_or(p, "quad_points", 2000, kParams);
  if (qp < 1000) fail(kParams + "/quad_points", "must be at least 1000");
  for (double l : lambdas)
    if (!(l > 0.0)) fail(kParams + "/lambda", "values must be positive");
  for (double w : ws)
    if (w == 0.0 || !std::isfinite(w)) fail(kParams + "/w", "values must be nonzero");
  r.csv_header = {"lambda", "w", "alpha", "lhs", "rhs", "quadrature_error", "holds"};
  json rows = json::array();
  for (double l : lambdas)
    for (double w : ws)
      for (double a : alphas) {
        const LemmaTvCheck t = lemma_tv_check(l, w, a, static_cast<std::size_t>(qp));
        rows.push_back(to_json(t));
        r.csv_rows.push_back({format_number(l), format_number(w), format_number(a), format_number(t.lhs),
                              format_number(t.rhs), format_number(t.quadrature_error), t.holds ? "true" : "false"});
      }
  r.outputs = {{"rows", rows}};
}

inline void hyperplane(const ExperimentConfig& c, RunRecord& r) {
  using namespace io;
  const json& p = c.params;
  const std::vector<io::SystemSpec> systems = systems_from(p);
  const std::int64_t k = integer_or(p, "k", 0, kParams);
  if (k < 0) fail(kParams + "/k", "must be nonnegative");
  const std::size_t budget =
      static_cast<std::size_t>(positive_integer_or(p, "budget", std::int64_t(kDefaultHyperplaneBudget), kParams));
  const std::size_t samples = static_cast<std::size_t>(positive_integer_or(p, "samples", std::int64_t(c.samples), kParams));
  if (samples < kMinEsseenSamples) fail(kParams + "/samples", "needs at least 1000 samples");
  r.csv_header = {"system", "near_count", "far_count", "objective", "method", "hypothesis_holds", "I_estimate",
                  "I_std_error", "prop_rhs", "inequality_holds"};
  json rows = json::array();
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const auto& [sys, noise] = systems[i];
    const HyperplaneReport rep = best_hyperplane(sys.vectors, static_cast<std::size_t>(k), sys.R, budget);
    json row = {{"system", to_json(sys, noise)}, {"best_hyperplane", to_json(rep)}};
    std::vector<std::string> csv = {std::to_string(i), std::to_string(rep.near_count), std::to_string(rep.far_count),
                                    format_number(rep.objective), to_string(rep.method)};
    if (noise.c_eta) {
      const PropHyperCheck chk =
          verify_prop_hyper(sys, noise, static_cast<std::size_t>(k), samples, c.seed + i, budget);
      row["prop_hyper"] = to_json(chk);
      csv.insert(csv.end(), {chk.hypothesis_holds ? "true" : "false", format_number(chk.I_estimate),
                             format_number(chk.I_std_error), format_number(chk.rhs),
                             chk.inequality_holds ? "true" : "false"});
    } else {
      row["prop_hyper"] = {{"skipped", "noise law has no c_eta"}};
      csv.insert(csv.end(), {"", "", "", "", ""});
    }
    rows.push_back(row);
    r.csv_rows.push_back(csv);
  }
  r.outputs = {{"rows", rows}};
}

inline void gap_pipeline(const ExperimentConfig& c, RunRecord& r) {
  using namespace io;
  const json& p = c.params;
  const io::SystemSpec spec = system_from(field(p, "system", kParams), kParams + "/system");
  const double A = number_or(p, "A", 1.0, kParams);
  if (!(A > 0.0)) fail(kParams + "/A", "must be positive");
  const double eps = number_or(p, "epsilon", 0.5, kParams);
  if (!(eps > 0.0 && eps < 1.0)) fail(kParams + "/epsilon", "must lie in (0, 1)");
  const double n = double(spec.system.size());
  const double n_prime = number_or(p, "n_prime", std::max(1.0, std::ceil(n / 2.0)), kParams);
  if (!(n_prime >= 1.0 && n_prime <= n)) fail(kParams + "/n_prime", "must lie in [1, n]");
  if (spec.system.dimension() > 2) fail(kParams + "/system/body", "grid stages support d ≤ 2");
  GapPipelineOptions opt;
  opt.N = static_cast<int>(positive_integer_or(p, "N", 32, kParams));
  opt.grid_budget = static_cast<std::size_t>(positive_integer_or(p, "grid_budget", 1000000, kParams));
  opt.enumeration_budget =
      static_cast<std::size_t>(positive_integer_or(p, "enumeration_budget", std::int64_t(kDefaultGapBudget), kParams));
  opt.r_max = static_cast<int>(integer_or(p, "r_max", 0, kParams));
  if (opt.r_max < 0) fail(kParams + "/r_max", "must be nonnegative");
  opt.cells_per_radius = static_cast<int>(positive_integer_or(p, "cells_per_radius", 4, kParams));
  opt.samples = c.samples;
  if (p.contains("rho")) {
    const double rho = number(p["rho"], kParams + "/rho");
    if (!(rho > 0.0 && rho <= 1.0)) fail(kParams + "/rho", "must lie in (0, 1]");
    opt.rho = rho;
  }
  if (p.contains("constants")) opt.constants = constants_config_from(p["constants"], kParams + "/constants");
  const GapPipelineReport rep = thm_gap_pipeline(spec.system, spec.noise, A, eps, n_prime, opt, c.seed);
  r.outputs = {{"system", to_json(spec.system, spec.noise)}, {"report", to_json(rep)}};
  r.csv_header = {"stage", "check", "lhs", "rhs", "holds"};
  for (const StageRecord& s : rep.stages) {
    if (s.checks.empty()) r.csv_rows.push_back({s.name, "", "", "", s.completed ? "" : "skipped"});
    for (const Inequality& q : s.checks)
      r.csv_rows.push_back({s.name, q.label, format_number(q.lhs), format_number(q.rhs), q.holds ? "true" : "false"});
  }
}

inline void body_constants(const ExperimentConfig& c, RunRecord& r) {
  using namespace io;
  const json& p = c.params;
  const StarBody body = body_from(field(p, "body", kParams), kParams + "/body");
  const std::size_t samples = static_cast<std::size_t>(positive_integer_or(p, "samples", std::int64_t(c.samples), kParams));
  if (samples < kMinConstantSamples) fail(kParams + "/samples", "needs at least 1000 samples");
  const BodyConstants est = estimate_constants(body, samples, c.seed);
  r.outputs = {{"body", to_json(body)}, {"estimate", to_json(est)}};
  r.csv_header = {"source", "mu", "gamma", "kappa", "se_mu", "se_gamma"};
  r.csv_rows.push_back({"estimate", format_number(est.mu), format_number(est.gamma), format_number(est.kappa),
                        format_number(est.se_mu), format_number(est.se_gamma)});
  if (auto ref = reference_constants(body)) {
    r.outputs["reference"] = to_json(*ref);
    r.csv_rows.push_back({"reference", format_number(ref->mu), format_number(ref->gamma), format_number(ref->kappa),
                          "0", "0"});
  }
  const double inf = std::numeric_limits<double>::infinity();
  r.outputs["omega_2"] = omega(body, 2.0);
  r.outputs["omega_inf"] = omega(body, inf);
  r.outputs["W_2"] = W(body, 2.0);
  r.outputs["W_inf"] = W(body, inf);
  if (p.contains("t_grid")) {
    const std::vector<double> ts = number_list(p["t_grid"], kParams + "/t_grid");
    for (double t : ts)
      if (!(t > 0.0)) fail(kParams + "/t_grid", "dilations must be positive");
    json prof = json::array();
    for (const KappaPoint& k : kappa_scaling_profile(body, ts, samples, c.seed))
      prof.push_back({{"t", k.t}, {"kappa", k.kappa}, {"gamma", k.gamma}, {"se_gamma", k.se_gamma}});
    r.outputs["kappa_profile"] = prof;
  }
  const std::int64_t trials = integer_or(p, "quasi_triangle_trials", 0, kParams);
  if (trials > 0) {
    const QuasiTriangleReport q = quasi_triangle_check(body, static_cast<std::size_t>(trials), c.seed);
    r.outputs["quasi_triangle"] = {{"max_ratio", q.max_ratio}, {"quasi_constant", q.quasi_constant},
                                   {"within_constant", q.within_constant}};
  }
}

}  // namespace experiments

/// Dispatches to the named experiment. Output files are not written here.
inline RunRecord run(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord r;
  r.experiment = c.experiment;
  r.name = c.name;
  r.seed = c.seed;
  r.config = config_to_json(c);
  if (c.experiment == "sharp-lo") experiments::sharp_lo(c, r);
  else if (c.experiment == "esseen-audit") experiments::esseen_audit(c, r);
  else if (c.experiment == "lemma-tv") experiments::lemma_tv(c, r);
  else if (c.experiment == "hyperplane") experiments::hyperplane(c, r);
  else if (c.experiment == "gap-pipeline") experiments::gap_pipeline(c, r);
  else if (c.experiment == "body-constants") experiments::body_constants(c, r);
  else io::fail("/experiment", "unknown experiment '" + c.experiment + "'");
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline json to_json(const RunRecord& r) {
  return {{"experiment", r.experiment}, {"name", r.name},       {"version", r.version},
          {"seed", r.seed},             {"config", r.config},   {"outputs", r.outputs},
          {"csv_header", r.csv_header}, {"wall_time_seconds", r.wall_time_seconds}};
}

/// The record without timing fields, for reproducibility comparisons.
inline json deterministic_json(const RunRecord& r) {
  json j = to_json(r);
  j.erase("wall_time_seconds");
  return j;
}

inline std::string to_csv(const RunRecord& r) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  };
  std::ostringstream os;
  for (std::size_t i = 0; i < r.csv_header.size(); ++i) os << (i ? "," : "") << quote(r.csv_header[i]);
  os << "\n";
  for (const auto& row : r.csv_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << quote(row[i]);
    os << "\n";
  }
  return os.str();
}

/// Writes via a temporary file and a rename.
inline void write_atomically(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// <dir>/<name>.json and <dir>/<name>.csv.
inline void write_record(const RunRecord& r, const fs::path& dir) {
  write_atomically(dir / (r.name + ".json"), to_json(r).dump(2) + "\n");
  write_atomically(dir / (r.name + ".csv"), to_csv(r));
}

struct BatchEntry {
  std::string config_path;
  std::optional<RunRecord> record;
  std::string error;
  int exit_code = 0;  ///< 0, 1 (validation) or 2 (budget)
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const BudgetError*>(&e)) return 2;
  return 1;
}

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::string> output;
};

inline ExperimentConfig apply_overrides(ExperimentConfig c, const RunOverrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.samples) {
    require(*o.samples > 0, "--samples must be positive");
    c.samples = *o.samples;
  }
  if (o.output) c.output = *o.output;
  return c;
}

/// Loads, runs and writes one config; errors are captured, not thrown.
inline BatchEntry run_file(const fs::path& path, const RunOverrides& o) {
  BatchEntry e;
  e.config_path = path.string();
  try {
    const ExperimentConfig c = apply_overrides(load_config(path), o);
    RunRecord r = run(c);
    if (!c.output.empty()) write_record(r, c.output);
    e.record = std::move(r);
  } catch (const std::exception& ex) {
    e.error = ex.what();
    e.exit_code = exit_code_for(ex);
  }
  return e;
}

/// Runs every *.json in `dir` (sorted by name) concurrently; one failure
/// does not stop the others. Entries come back in file order.
inline std::vector<BatchEntry> batch(const fs::path& dir, const RunOverrides& o) {
  if (!fs::is_directory(dir)) throw ValidationError("batch directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<BatchEntry> out(files.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), files.size()));
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < files.size(); i = next++) out[i] = run_file(files[i], o);
      });
  }
  return out;
}

inline json to_json(const std::vector<BatchEntry>& entries) {
  json runs = json::array();
  for (const BatchEntry& e : entries) {
    json j = {{"config", e.config_path}, {"exit_code", e.exit_code}};
    if (e.record) {
      j["status"] = "ok";
      j["name"] = e.record->name;
    } else {
      j["status"] = "error";
      j["error"] = e.error;
    }
    runs.push_back(j);
  }
  return {{"version", kVersion}, {"runs", runs}};
}

}  // namespace quasilo

// JSON encoding of bodies, noise laws, systems and results. Parse errors
// name the offending field as a JSON pointer.
#pragma once

#include "quasilo/gap.hpp"
#include "quasilo/hyperplane.hpp"

#include <json.hpp>

namespace quasilo::io {

using nlohmann::json;

/// Raises ValidationError("config <pointer>: <message>").
[[noreturn]] inline void fail(const std::string& pointer, const std::string& message) {
  throw ValidationError("config " + (pointer.empty() ? std::string("/") : pointer) + ": " + message);
}

inline const json& field(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object()) fail(at, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(at + "/" + key, "missing");
  return *it;
}

inline double number(const json& j, const std::string& at) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    fail(at, "expected a number");
  }
  if (!j.is_number()) fail(at, "expected a number");
  return j.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& at) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return number(j.at(key), at + "/" + key);
}

inline std::int64_t integer(const json& j, const std::string& at) {
  if (!j.is_number_integer()) {
    if (j.is_number_float() && std::floor(j.get<double>()) == j.get<double>()) return j.get<std::int64_t>();
    fail(at, "expected an integer");
  }
  return j.get<std::int64_t>();
}

inline std::int64_t integer_or(const json& j, const std::string& key, std::int64_t fallback, const std::string& at) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return integer(j.at(key), at + "/" + key);
}

inline std::int64_t positive_integer_or(const json& j, const std::string& key, std::int64_t fallback,
                                        const std::string& at) {
  const std::int64_t v = integer_or(j, key, fallback, at);
  if (v <= 0) fail(at + "/" + key, "must be positive");
  return v;
}

inline std::vector<double> number_list(const json& j, const std::string& at) {
  if (j.is_number() || j.is_string()) return {number(j, at)};
  if (!j.is_array()) fail(at, "expected a number or a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at + "/" + std::to_string(i)));
  return out;
}

inline Vec vec_from(const json& j, const std::string& at) {
  const std::vector<double> xs = number_list(j, at);
  Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Eigen::Index>(i)) = xs[i];
  return v;
}

inline json to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }
inline json to_json(const IVec& v) { return json(std::vector<std::int64_t>(v.data(), v.data() + v.size())); }

inline json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

// ---------------------------------------------------------------------------
// Bodies and noise.

inline StarBody body_from(const json& j, const std::string& at) {
  const json& kind = field(j, "kind", at);
  if (!kind.is_string()) fail(at + "/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "lp") {
    const double p = number(field(j, "p", at), at + "/p");
    if (!(p > 0.0)) fail(at + "/p", "must be positive");
    const std::int64_t d = integer(field(j, "d", at), at + "/d");
    if (d < 1) fail(at + "/d", "must be positive");
    return StarBody::lp_ball(p, static_cast<int>(d));
  }
  if (k == "box") {
    const Vec h = vec_from(field(j, "half_widths", at), at + "/half_widths");
    if (h.size() == 0 || (h.array() <= 0.0).any()) fail(at + "/half_widths", "must be a nonempty list of positive numbers");
    return StarBody::scaled_box(h);
  }
  fail(at + "/kind", "unknown body kind '" + k + "' (expected lp or box)");
}

inline json to_json(const StarBody& b) {
  switch (b.kind()) {
    case BodyKind::lp_ball:
      if (b.scale() == 1.0) return {{"kind", "lp"}, {"p", finite_or_string(b.p())}, {"d", b.dimension()}};
      return {{"kind", "lp"}, {"p", finite_or_string(b.p())}, {"d", b.dimension()}, {"scale", b.scale()}};
    case BodyKind::scaled_box: return {{"kind", "box"}, {"half_widths", to_json(Vec(b.half_widths() * b.scale()))}};
    case BodyKind::radial: break;
  }
  return {{"kind", "radial"}, {"description", b.describe()}};
}

inline NoiseModel noise_from(const json& j, const std::string& at) {
  const json& kind = field(j, "kind", at);
  if (!kind.is_string()) fail(at + "/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "bernoulli") return NoiseModel::bernoulli();
  if (k != "finite") fail(at + "/kind", "unknown noise kind '" + k + "' (expected bernoulli or finite)");
  const json& atoms = field(j, "atoms", at);
  if (!atoms.is_array() || atoms.empty()) fail(at + "/atoms", "expected a nonempty list of [value, probability]");
  std::vector<Atom1> list;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const std::string p = at + "/atoms/" + std::to_string(i);
    if (!atoms[i].is_array() || atoms[i].size() != 2) fail(p, "expected [value, probability]");
    list.push_back({number(atoms[i][0], p + "/0"), number(atoms[i][1], p + "/1")});
  }
  NoiseModel m = [&] {
    try {
      return NoiseModel::finite(list);
    } catch (const ValidationError& e) {
      fail(at + "/atoms", e.what());
    }
  }();
  if (j.contains("c_eta")) m.c_eta = number(j["c_eta"], at + "/c_eta");
  if (j.contains("C_eta")) m.C_eta = number(j["C_eta"], at + "/C_eta");
  if (j.contains("alpha")) m.alpha = number(j["alpha"], at + "/alpha");
  return m;
}

inline json to_json(const NoiseModel& m) {
  if (m.name() == "bernoulli") return {{"kind", "bernoulli"}};
  json atoms = json::array();
  for (const Atom1& a : m.atoms()) atoms.push_back({a.value, a.probability});
  json j = {{"kind", "finite"}, {"atoms", atoms}};
  if (m.c_eta) j["c_eta"] = *m.c_eta;
  if (m.C_eta) j["C_eta"] = *m.C_eta;
  if (m.alpha) j["alpha"] = *m.alpha;
  return j;
}

// ---------------------------------------------------------------------------
// Systems.

struct SystemSpec {
  VectorSystem system;
  NoiseModel noise;
};

inline std::vector<Vec> vectors_from(const json& j, int d, const std::string& at) {
  if (!j.is_array()) fail(at, "expected a list of vectors");
  if (j.empty()) fail(at, "vector list must be nonempty");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = at + "/" + std::to_string(i);
    Vec v = vec_from(j[i], p);
    if (v.size() != d) fail(p, "expected " + std::to_string(d) + " coordinates");
    if (!v.allFinite()) fail(p, "coordinates must be finite");
    out.push_back(std::move(v));
  }
  return out;
}

/// {"vectors": [[..]], "R": r, "body": {..}, "noise": {..}}; noise defaults
/// to bernoulli.
inline SystemSpec system_from(const json& j, const std::string& at) {
  StarBody body = body_from(field(j, "body", at), at + "/body");
  const double R = number(field(j, "R", at), at + "/R");
  if (!(R > 0.0) || !std::isfinite(R)) fail(at + "/R", "must be positive and finite");
  std::vector<Vec> vs = vectors_from(field(j, "vectors", at), body.dimension(), at + "/vectors");
  NoiseModel noise = j.contains("noise") ? noise_from(j["noise"], at + "/noise") : NoiseModel::bernoulli();
  return {VectorSystem(std::move(vs), R, std::move(body)), std::move(noise)};
}

inline json to_json(const VectorSystem& s) {
  json vs = json::array();
  for (const Vec& v : s.vectors) vs.push_back(to_json(v));
  return {{"vectors", vs}, {"R", s.R}, {"body", to_json(s.body)}};
}

inline json to_json(const VectorSystem& s, const NoiseModel& m) {
  json j = to_json(s);
  j["noise"] = to_json(m);
  return j;
}

// ---------------------------------------------------------------------------
// Results.

inline json to_json(const BodyConstants& c) {
  return {{"mu", c.mu},       {"gamma", c.gamma},       {"kappa", c.kappa},     {"se_mu", c.se_mu},
          {"se_gamma", c.se_gamma}, {"samples", c.samples}, {"seed", c.seed},
          {"dimension", c.dimension}, {"quasi_constant", c.quasi_constant}};
}

inline BodyConstants constants_from(const json& j, const std::string& at) {
  BodyConstants c;
  c.mu = number(field(j, "mu", at), at + "/mu");
  c.gamma = number(field(j, "gamma", at), at + "/gamma");
  c.kappa = number(field(j, "kappa", at), at + "/kappa");
  c.se_mu = number_or(j, "se_mu", 0.0, at);
  c.se_gamma = number_or(j, "se_gamma", 0.0, at);
  c.samples = static_cast<std::size_t>(integer_or(j, "samples", 0, at));
  c.seed = static_cast<std::uint64_t>(integer_or(j, "seed", 0, at));
  c.dimension = static_cast<int>(integer_or(j, "dimension", 1, at));
  c.quasi_constant = number_or(j, "quasi_constant", 1.0, at);
  return c;
}

inline json to_json(const SmallBallResult& r) {
  return {{"rho", r.rho}, {"certificate", to_string(r.certificate)}, {"center", to_json(r.center)},
          {"method", r.method}, {"std_error", r.std_error}};
}

inline json to_json(const EsseenEstimate& e) {
  return {{"kind", to_string(e.kind)}, {"value", e.value}, {"std_error", e.std_error}, {"samples", e.samples},
          {"seed", e.seed}};
}

inline json to_json(const LemmaTvCheck& c) {
  return {{"lambda", c.lambda}, {"w", c.w}, {"alpha", c.alpha}, {"lhs", c.lhs},
          {"rhs", c.rhs}, {"quadrature_error", c.quadrature_error}, {"holds", c.holds}};
}

inline json to_json(const HyperplaneReport& r) {
  return {{"normal", to_json(r.normal)},   {"R", r.R},
          {"k", r.k},                      {"near_count", r.near_count},
          {"far_count", r.far_count},      {"distances", r.distances},
          {"objective", r.objective},      {"method", to_string(r.method)},
          {"candidates", r.candidates},    {"winner", r.winner},
          {"winner_source", r.winner_source}};
}

inline json to_json(const PropHyperCheck& c) {
  return {{"hypothesis_holds", c.hypothesis_holds}, {"far_statistic", finite_or_string(c.far_statistic)},
          {"method", to_string(c.method)},          {"checked", c.checked},
          {"reason", c.reason},                     {"I_estimate", c.I_estimate},
          {"I_std_error", c.I_std_error},           {"rhs", c.rhs},
          {"inequality_holds", c.inequality_holds}};
}

template <typename T>
json to_json(const BasicGap<T>& g) {
  json gens = json::array();
  for (const auto& p : g.generators) gens.push_back(to_json(p));
  return {{"generators", gens}, {"bounds", g.bounds}};
}

inline IntGap int_gap_from(const json& j, const std::string& at) {
  const json& gens = field(j, "generators", at);
  const json& bounds = field(j, "bounds", at);
  if (!gens.is_array() || !bounds.is_array() || gens.size() != bounds.size())
    fail(at, "generators and bounds must be lists of equal length");
  std::vector<IVec> g;
  std::vector<std::int64_t> L;
  int d = 0;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string p = at + "/generators/" + std::to_string(i);
    if (!gens[i].is_array() || gens[i].empty()) fail(p, "expected a nonempty integer list");
    IVec v(static_cast<Eigen::Index>(gens[i].size()));
    for (std::size_t c = 0; c < gens[i].size(); ++c)
      v(static_cast<Eigen::Index>(c)) = integer(gens[i][c], p + "/" + std::to_string(c));
    if (d == 0) d = static_cast<int>(v.size());
    if (v.size() != d) fail(p, "generator dimension mismatch");
    g.push_back(v);
    L.push_back(integer(bounds[i], at + "/bounds/" + std::to_string(i)));
  }
  if (d == 0) d = static_cast<int>(integer_or(j, "dimension", 1, at));
  try {
    return IntGap(d, g, L);
  } catch (const ValidationError& e) {
    fail(at, e.what());
  }
}

inline json to_json(const Inequality& c) {
  return {{"label", c.label}, {"lhs", finite_or_string(c.lhs)}, {"rhs", finite_or_string(c.rhs)}, {"holds", c.holds}};
}

inline json to_json(const StageRecord& r) {
  json checks = json::array();
  for (const Inequality& c : r.checks) checks.push_back(to_json(c));
  json constants = json::object();
  for (const auto& [k, v] : r.constants) constants[k] = finite_or_string(v);
  return {{"name", r.name}, {"completed", r.completed}, {"holds", r.holds()},
          {"checks", checks}, {"constants", constants}, {"note", r.note}};
}

inline json to_json(const GapPipelineReport& r) {
  json stages = json::array();
  for (const StageRecord& s : r.stages) stages.push_back(to_json(s));
  json F = json::array();
  for (const IVec& z : r.rounding.F) F.push_back(to_json(z));
  json witnesses = json::array();
  for (const Part3Witness& w : r.verification.part3_witnesses)
    witnesses.push_back({{"point", to_json(w.vertex)}, {"coefficients", w.coefficients}});
  json dists = json::array();
  for (double x : r.verification.part2_distances) dists.push_back(finite_or_string(x));
  return {{"n_prime", r.n_prime},
          {"A", r.A},
          {"epsilon", r.epsilon},
          {"rho", r.rho},
          {"rho_certificate", r.rho_certificate},
          {"body_constants", to_json(r.body_constants)},
          {"alpha", r.alpha},
          {"D", r.D},
          {"k", r.k},
          {"m", r.level_set.m},
          {"M", r.level_set.M},
          {"S_size", r.level_set.S.size()},
          {"bad", r.split.bad},
          {"F", F},
          {"Q_prime", to_json(r.fit.gap)},
          {"Q", to_json(r.Q)},
          {"fit_method", r.fit.method},
          {"part2_distances", dists},
          {"part3_witnesses", witnesses},
          {"constants",
           {{"C", r.constants.C}, {"C_Ade", r.constants.C_Ade}, {"C_eta", r.constants.C_eta}}},
          {"properness_convention", "proper means the coefficient map is injective, |Q| = prod(2L_j+1)"},
          {"stages", stages}};
}

inline ConstantsConfig constants_config_from(const json& j, const std::string& at) {
  ConstantsConfig c;
  c.C = number_or(j, "C", 1.0, at);
  c.C_Ade = number_or(j, "C_Ade", 1.0, at);
  c.C_eta = number_or(j, "C_eta", 1.0, at);
  if (!(c.C > 0.0 && c.C_Ade > 0.0 && c.C_eta > 0.0)) fail(at, "constants must be positive");
  return c;
}

}  // namespace quasilo::io

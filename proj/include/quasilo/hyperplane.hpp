// Near-hyperplane concentration: distance order statistics over linear
// hyperplanes, separated bases, and the closed-form bounds of the
// hyperplane inverse theorem.
#pragma once

#include "quasilo/esseen.hpp"

#include <Eigen/SVD>

#include <limits>
#include <optional>

namespace quasilo {

/// |⟨v, normal⟩| / |normal|₂ for the linear hyperplane normal^⊥.
inline double dist_to_hyperplane(const Vec& v, const Vec& normal) {
  require(v.size() == normal.size(), "vector and normal dimensions differ");
  const double nn = normal.norm();
  require(nn > 0.0 && std::isfinite(nn), "hyperplane normal must be nonzero");
  return std::abs(v.dot(normal)) / nn;
}

// ---------------------------------------------------------------------------
// Separated bases.

struct SeparatedBasis {
  std::vector<Vec> vectors;
  std::vector<std::size_t> indices;  ///< positions in the input list
  std::vector<double> distances;     ///< dist₂(w_i, span{w_1..w_{i−1}})
  int depth = 0;
};

/// Residual of v after projecting out the orthonormal columns of `basis`.
inline Vec orthogonal_residual(const Vec& v, const std::vector<Vec>& basis) {
  Vec r = v;
  for (int pass = 0; pass < 2; ++pass)
    for (const Vec& e : basis) r -= r.dot(e) * e;
  return r;
}

/// Greedy, lowest index first: each step takes the first vector at
/// distance ≥ R from the span of those already chosen.
inline SeparatedBasis extract_separated_basis(const std::vector<Vec>& vectors, double R) {
  require(!vectors.empty(), "vector list must be nonempty");
  require(R > 0.0, "R must be positive");
  const Eigen::Index d = vectors.front().size();
  for (const Vec& v : vectors) require(v.size() == d, "vector dimension mismatch");
  SeparatedBasis out;
  std::vector<Vec> ortho;
  std::vector<bool> used(vectors.size(), false);
  while (out.depth < d) {
    bool found = false;
    for (std::size_t i = 0; i < vectors.size() && !found; ++i) {
      if (used[i]) continue;
      const Vec r = orthogonal_residual(vectors[i], ortho);
      const double dist = r.norm();
      if (dist >= R * (1.0 - kBoundaryTolerance)) {
        used[i] = true;
        out.vectors.push_back(vectors[i]);
        out.indices.push_back(i);
        out.distances.push_back(dist);
        ortho.push_back(r / dist);
        ++out.depth;
        found = true;
      }
    }
    if (!found) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Order statistics of hyperplane distances.

enum class HyperplaneMethod { exhaustive, svd_heuristic };

inline const char* to_string(HyperplaneMethod m) {
  return m == HyperplaneMethod::exhaustive ? "exhaustive" : "svd_heuristic";
}

struct HyperplaneReport {
  Vec normal;
  double R = 0.0;
  std::size_t k = 0;
  std::size_t near_count = 0;  ///< #{j : |⟨v_j, normal⟩| ≤ R}
  std::size_t far_count = 0;
  std::vector<double> distances;  ///< ascending
  double objective = 0.0;         ///< (k+1)-th largest distance at `normal`
  HyperplaneMethod method = HyperplaneMethod::exhaustive;
  std::size_t candidates = 0;
  std::size_t winner = 0;        ///< index of the winning candidate
  std::string winner_source;     ///< "subset", "svd" or "line"
};

/// Candidate budget for exhaustive mode (number of (d−1)-subsets).
inline constexpr std::size_t kDefaultHyperplaneBudget = 2000000;

namespace detail {

/// r-th largest of |⟨v_j, n⟩| (1-based); 0 when r > n.
inline double rth_largest(const std::vector<Vec>& V, const Vec& n, std::size_t r, std::vector<double>& scratch) {
  if (r == 0 || r > V.size()) return 0.0;
  scratch.resize(V.size());
  for (std::size_t j = 0; j < V.size(); ++j) scratch[j] = std::abs(V[j].dot(n));
  auto it = scratch.begin() + static_cast<std::ptrdiff_t>(r - 1);
  std::nth_element(scratch.begin(), it, scratch.end(), std::greater<double>());
  return *it;
}

inline double binomial_count(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
  return c;
}

/// Unit normal to span(rows) when the rows have rank d−1.
inline std::optional<Vec> subset_normal(const Eigen::MatrixXd& rows) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const Eigen::Index d = rows.cols();
  if (s.size() < d - 1 || s(0) <= 0.0) return std::nullopt;
  if (s(d - 2) <= 1e-12 * s(0)) return std::nullopt;
  Vec n = svd.matrixV().col(d - 1);
  return n / n.norm();
}

struct Candidate {
  Vec normal;
  std::string source;
};

/// Normals orthogonal to every (d−1)-subset of {v_i} ∪ {v_i ± v_j}, then the
/// d−1 smallest right singular vectors of V. Order statistics of |⟨v_j, n⟩|
/// are piecewise |linear| on the cells cut out by these vectors and attain
/// their minimum on a cell's extreme ray, so the list is exact when the
/// family spans R^d; otherwise a singular vector gives objective 0.
inline std::vector<Candidate> candidate_normals(const std::vector<Vec>& V, std::size_t budget, bool& exhaustive) {
  const Eigen::Index d = V.front().size();
  std::vector<Candidate> out;
  Eigen::MatrixXd M(static_cast<Eigen::Index>(V.size()), d);
  for (std::size_t j = 0; j < V.size(); ++j) M.row(static_cast<Eigen::Index>(j)) = V[j].transpose();

  std::vector<Vec> family;
  for (const Vec& v : V)
    if (v.norm() > 0.0) family.push_back(v);
  for (std::size_t i = 0; i < V.size(); ++i)
    for (std::size_t j = i + 1; j < V.size(); ++j) {
      const Vec a = V[i] + V[j], b = V[i] - V[j];
      if (a.norm() > 0.0) family.push_back(a);
      if (b.norm() > 0.0) family.push_back(b);
    }

  const std::size_t r = static_cast<std::size_t>(d - 1);
  exhaustive = binomial_count(family.size(), r) <= double(budget);
  if (exhaustive && r >= 1) {
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(r), d);
    while (r <= family.size()) {
      for (std::size_t i = 0; i < r; ++i) rows.row(static_cast<Eigen::Index>(i)) = family[idx[i]].transpose();
      if (auto n = subset_normal(rows)) out.push_back({*n, "subset"});
      std::size_t pos = r;
      while (pos > 0 && idx[pos - 1] == family.size() - r + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < r; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  for (Eigen::Index c = d - 1; c >= 1; --c) out.push_back({svd.matrixV().col(c).normalized(), "svd"});
  return out;
}

struct OrderStatisticMin {
  Vec normal;
  double value = 0.0;
  HyperplaneMethod method = HyperplaneMethod::exhaustive;
  std::size_t candidates = 0;
  std::size_t winner = 0;
  std::string source;
};

/// min over linear hyperplanes of the r-th largest distance.
inline OrderStatisticMin minimize_order_statistic(const std::vector<Vec>& V, std::size_t r, std::size_t budget) {
  const Eigen::Index d = V.front().size();
  OrderStatisticMin out;
  if (d == 1) {
    std::vector<double> scratch;
    out.normal = Vec::Ones(1);
    out.value = rth_largest(V, out.normal, r, scratch);
    out.candidates = 1;
    out.source = "line";
    return out;
  }
  bool exhaustive = false;
  const std::vector<Candidate> cands = candidate_normals(V, budget, exhaustive);
  std::vector<double> values(cands.size());
  const std::size_t blocks = (cands.size() + 255) / 256;
  parallel_blocks(blocks, [&](std::size_t b) {
    std::vector<double> scratch;
    const std::size_t end = std::min(cands.size(), (b + 1) * 256);
    for (std::size_t i = b * 256; i < end; ++i) values[i] = rth_largest(V, cands[i].normal, r, scratch);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  out.normal = cands[best].normal;
  out.value = values[best];
  out.method = exhaustive ? HyperplaneMethod::exhaustive : HyperplaneMethod::svd_heuristic;
  out.candidates = cands.size();
  out.winner = best;
  out.source = cands[best].source;
  return out;
}

inline void validate_vectors(const std::vector<Vec>& V) {
  require(!V.empty(), "vector list must be nonempty");
  const Eigen::Index d = V.front().size();
  require(d >= 1, "dimension must be positive");
  bool nonzero = false;
  for (const Vec& v : V) {
    require(v.size() == d, "vector dimension mismatch");
    require(v.allFinite(), "vectors must be finite");
    nonzero = nonzero || v.norm() > 0.0;
  }
  require(nonzero, "all vectors are zero");
}

}  // namespace detail

/// Linear hyperplane minimizing the (k+1)-th largest distance |⟨v_j, n̂⟩|,
/// i.e. the one keeping as many vectors as possible within distance R.
inline HyperplaneReport best_hyperplane(const std::vector<Vec>& V, std::size_t k, double R,
                                        std::size_t budget = kDefaultHyperplaneBudget) {
  detail::validate_vectors(V);
  require(R >= 0.0, "R must be nonnegative");
  const detail::OrderStatisticMin m = detail::minimize_order_statistic(V, k + 1, budget);
  HyperplaneReport rep;
  rep.normal = m.normal;
  rep.R = R;
  rep.k = k;
  rep.objective = m.value;
  rep.method = m.method;
  rep.candidates = m.candidates;
  rep.winner = m.winner;
  rep.winner_source = m.source;
  double scale = 0.0;
  for (const Vec& v : V) scale = std::max(scale, v.norm());
  const double cut = R * (1.0 + kBoundaryTolerance) + 1e-12 * scale;
  for (const Vec& v : V) {
    const double dist = std::abs(v.dot(m.normal));
    rep.distances.push_back(dist);
    if (dist <= cut) ++rep.near_count;
  }
  std::sort(rep.distances.begin(), rep.distances.end());
  rep.far_count = V.size() - rep.near_count;
  return rep;
}

struct FarStatistic {
  double value = 0.0;  ///< min over hyperplanes of the (n−k)-th largest distance
  Vec normal;          ///< hyperplane attaining it
  HyperplaneMethod method = HyperplaneMethod::exhaustive;
  bool vacuous = false;  ///< k ≥ n
};

/// The hypothesis "every hyperplane has ≥ n−k vectors at distance ≥ R"
/// holds iff value ≥ R: the (n−k)-th largest distance is the (k+1)-th
/// smallest.
inline FarStatistic min_far_statistic(const std::vector<Vec>& V, std::size_t k,
                                      std::size_t budget = kDefaultHyperplaneBudget) {
  detail::validate_vectors(V);
  FarStatistic out;
  if (k >= V.size()) {
    out.vacuous = true;
    out.value = std::numeric_limits<double>::infinity();
    out.normal = Vec::Unit(V.front().size(), 0);
    return out;
  }
  const detail::OrderStatisticMin m = detail::minimize_order_statistic(V, V.size() - k, budget);
  out.value = m.value;
  out.normal = m.normal;
  out.method = m.method;
  return out;
}

struct SweepCertificate {
  double value = 0.0;
  double angle = 0.0;
  std::size_t steps = 0;
};

/// d = 2 only: the r-th largest distance minimized over normals
/// (cos θ, sin θ), θ = πi/steps.
inline SweepCertificate angular_sweep_certificate(const std::vector<Vec>& V, std::size_t r,
                                                  std::size_t steps = 10000) {
  detail::validate_vectors(V);
  require(V.front().size() == 2, "angular sweep needs d = 2");
  require(steps >= 1, "sweep needs at least one step");
  SweepCertificate out{std::numeric_limits<double>::infinity(), 0.0, steps};
  std::vector<double> scratch;
  for (std::size_t i = 0; i < steps; ++i) {
    const double th = kPi * double(i) / double(steps);
    const double v = detail::rth_largest(V, make_vec({std::cos(th), std::sin(th)}), r, scratch);
    if (v < out.value) {
      out.value = v;
      out.angle = th;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form bounds.

/// (80 (R+1)/R √(d/(d + c_η k)))^d.
inline double prop_hyper_rhs(int d, double R, double c_eta, double k) {
  require(d >= 1 && R > 0.0 && c_eta > 0.0 && k >= 0.0, "prop_hyper_rhs: need d ≥ 1, R > 0, c_eta > 0, k ≥ 0");
  return std::pow(80.0 * (R + 1.0) / R * std::sqrt(double(d) / (double(d) + c_eta * k)), d);
}

inline constexpr double kDefaultHyperConstant = 80.0;

/// (constant·κ)^d (d/(d + c_η k))^{d/2}.
inline double thm_hyper_threshold(int d, double kappa, double c_eta, double k,
                                  double constant = kDefaultHyperConstant) {
  require(d >= 1 && kappa > 0.0 && c_eta > 0.0 && k >= 0.0 && constant > 0.0, "thm_hyper_threshold: bad arguments");
  return std::pow(constant * kappa, d) * std::pow(double(d) / (double(d) + c_eta * k), 0.5 * d);
}

/// Largest k with thm_hyper_threshold(k) ≥ n^{−A}, clamped at 0.
inline double corollary_k_bound(int d, double kappa, double c_eta, double A, double n,
                                double constant = kDefaultHyperConstant) {
  require(n >= 2.0, "corollary_k_bound needs n ≥ 2");
  require(A > 0.0, "corollary_k_bound needs A > 0");
  require(d >= 1 && kappa > 0.0 && c_eta > 0.0 && constant > 0.0, "corollary_k_bound: bad arguments");
  const double ck = constant * kappa;
  const double k = double(d) * (ck * ck * std::pow(n, 2.0 * A / d) - 1.0) / c_eta;
  return std::max(0.0, k);
}

struct PropHyperCheck {
  bool hypothesis_holds = false;
  double far_statistic = 0.0;
  HyperplaneMethod method = HyperplaneMethod::exhaustive;
  bool checked = false;  ///< false when the hypothesis fails and the inequality is not asserted
  std::string reason;
  double I_estimate = 0.0;
  double I_std_error = 0.0;
  double rhs = 0.0;
  bool inequality_holds = false;
};

/// Checks I(X_V) ≤ prop_hyper_rhs + 4·SE whenever every hyperplane keeps
/// ≥ n−k vectors at distance ≥ R.
inline PropHyperCheck verify_prop_hyper(const VectorSystem& system, const NoiseModel& model, std::size_t k,
                                        std::size_t samples, std::uint64_t seed,
                                        std::size_t budget = kDefaultHyperplaneBudget) {
  require(model.c_eta.has_value(), "noise model has no c_eta");
  PropHyperCheck out;
  const FarStatistic far = min_far_statistic(system.vectors, k, budget);
  out.far_statistic = far.value;
  out.method = far.method;
  out.hypothesis_holds = far.value >= system.R * (1.0 - kBoundaryTolerance);
  out.rhs = prop_hyper_rhs(system.dimension(), system.R, *model.c_eta, double(k));
  const EsseenEstimate I = esseen_integral(system, model, samples, seed);
  out.I_estimate = I.value;
  out.I_std_error = I.std_error;
  out.inequality_holds = I.value <= out.rhs + 4.0 * I.std_error;
  if (out.hypothesis_holds) {
    out.checked = true;
    if (far.method == HyperplaneMethod::svd_heuristic) out.reason = "hypothesis from svd_heuristic candidates only";
  } else {
    out.reason = "some hyperplane keeps more than k vectors within distance R";
  }
  return out;
}

}  // namespace quasilo

// Small-ball probabilities ρ_R^K(X_V) = sup_x P(X_V ∈ x + RK) of random
// sums X_V = Σ η_j v_j: exact atom enumeration, exact max-depth kernels for
// intervals, boxes, planar diamonds and disks, a certified lower bound for
// every other body, and Monte Carlo estimates.
#pragma once

#include "quasilo/geometry.hpp"
#include "quasilo/noise.hpp"

#include <numeric>

namespace quasilo {

/// The data (V, R, K) defining X_V = Σ η_j v_j.
struct VectorSystem {
  std::vector<Vec> vectors;
  double R = 1.0;
  StarBody body;

  VectorSystem(std::vector<Vec> vs, double radius, StarBody k)
      : vectors(std::move(vs)), R(radius), body(std::move(k)) {
    require(R > 0.0 && std::isfinite(R), "R must be positive");
    for (const Vec& v : vectors) require(v.size() == body.dimension(), "vector dimension does not match the body");
  }

  int dimension() const { return body.dimension(); }
  std::size_t size() const { return vectors.size(); }

  /// V_R = {v / R}.
  std::vector<Vec> rescaled() const { return scaled_vectors(1.0 / R); }

  std::vector<Vec> scaled_vectors(double factor) const {
    std::vector<Vec> out;
    out.reserve(vectors.size());
    for (const Vec& v : vectors) out.push_back(v * factor);
    return out;
  }
};

/// Finite law of X_V: distinct points with probability weights.
struct AtomDistribution {
  int dimension = 1;
  std::vector<Vec> points;
  std::vector<double> weights;
  double merge_tolerance = kMergeTolerance;

  std::size_t size() const { return points.size(); }
  double total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

  AtomDistribution translated(const Vec& shift) const {
    AtomDistribution out = *this;
    for (Vec& p : out.points) p += shift;
    return out;
  }

  AtomDistribution scaled(double factor) const {
    AtomDistribution out = *this;
    for (Vec& p : out.points) p *= factor;
    return out;
  }
};

/// Identifies points within `tol` in ℓ∞. Representatives are the first
/// point (in lexicographic order) of each cluster and stay pairwise > tol
/// apart.
inline AtomDistribution merge_atoms(int d, std::vector<Vec> points, std::vector<double> weights, double tol) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Vec& x = points[a];
    const Vec& y = points[b];
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x(i) != y(i)) return x(i) < y(i);
    return a < b;
  });
  AtomDistribution out;
  out.dimension = d;
  out.merge_tolerance = tol;
  for (std::size_t idx : order) {
    const Vec& p = points[idx];
    bool merged = false;
    for (std::size_t r = out.points.size(); r-- > 0;) {
      const Vec& rep = out.points[r];
      if (d > 0 && rep(0) < p(0) - tol) break;
      if (linf(rep - p) <= tol) {
        out.weights[r] += weights[idx];
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.points.push_back(p);
      out.weights.push_back(weights[idx]);
    }
  }
  return out;
}

inline constexpr double kDefaultEnumerationBudget = 16777216.0;  // 2^24

/// Exact law of X_V by convolving one coefficient at a time, merging
/// coincident points after every step.
inline AtomDistribution atoms(const VectorSystem& system, const NoiseModel& model,
                              double budget = kDefaultEnumerationBudget) {
  const int d = system.dimension();
  const double log_assignments = double(system.size()) * std::log(double(model.support_size()));
  if (log_assignments > std::log(budget) + 1e-9) {
    throw BudgetError("atom enumeration needs " + std::to_string(model.support_size()) + "^" +
                      std::to_string(system.size()) + " assignments, over budget");
  }
  AtomDistribution dist;
  dist.dimension = d;
  dist.points.push_back(Vec::Zero(d));
  dist.weights.push_back(1.0);
  for (const Vec& v : system.vectors) {
    std::vector<Vec> pts;
    std::vector<double> ws;
    pts.reserve(dist.size() * model.support_size());
    ws.reserve(pts.capacity());
    for (std::size_t i = 0; i < dist.size(); ++i) {
      for (const Atom1& a : model.atoms()) {
        pts.push_back(dist.points[i] + a.value * v);
        ws.push_back(dist.weights[i] * a.probability);
      }
    }
    dist = merge_atoms(d, std::move(pts), std::move(ws), kMergeTolerance);
  }
  return dist;
}

enum class Certificate { exact, lower_bound };

inline const char* to_string(Certificate c) { return c == Certificate::exact ? "exact" : "lower_bound"; }

struct SmallBallResult {
  double rho = 0.0;
  Certificate certificate = Certificate::exact;
  Vec center;
  std::string method;
  double std_error = 0.0;  ///< nonzero only for Monte Carlo results
};

/// P(X ∈ center + RK) from the atoms, closed boundary.
inline double probability_in_translate(const AtomDistribution& dist, const StarBody& body, double R,
                                       const Vec& center) {
  double p = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (body.contains(dist.points[i] - center, R)) p += dist.weights[i];
  return p;
}

namespace detail {

struct Placement {
  double weight = -1.0;
  Vec center;
};

inline Vec span_midpoint(const std::vector<Vec>& pts, const std::vector<std::size_t>& covered) {
  Vec lo = pts[covered.front()], hi = lo;
  for (std::size_t i : covered) {
    lo = lo.cwiseMin(pts[i]);
    hi = hi.cwiseMax(pts[i]);
  }
  return 0.5 * (lo + hi);
}

/// Best placement of an axis-aligned box with half-widths `half` (already
/// multiplied by R). Fixes the lower edge on axes [axis, d-1) at atom
/// coordinates and finishes the last axis with a sliding window.
inline void box_search(const std::vector<Vec>& pts, const std::vector<double>& w, const Vec& half,
                       const std::vector<std::size_t>& subset, Eigen::Index axis, Placement& best) {
  const Eigen::Index d = half.size();
  const double width = 2.0 * half(axis) * (1.0 + kBoundaryTolerance);
  std::vector<std::size_t> sorted = subset;
  std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return pts[a](axis) < pts[b](axis); });
  if (axis == d - 1) {
    double sum = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      while (j < sorted.size() && pts[sorted[j]](axis) - pts[sorted[i]](axis) <= width) sum += w[sorted[j++]];
      if (sum > best.weight + 1e-15) {
        best.weight = sum;
        best.center = span_midpoint(pts, std::vector<std::size_t>(sorted.begin() + i, sorted.begin() + j));
      }
      sum -= w[sorted[i]];
    }
    return;
  }
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && pts[sorted[i]](axis) == pts[sorted[i - 1]](axis)) continue;
    std::vector<std::size_t> slab;
    double slab_weight = 0.0;
    for (std::size_t j = i; j < sorted.size() && pts[sorted[j]](axis) - pts[sorted[i]](axis) <= width; ++j) {
      slab.push_back(sorted[j]);
      slab_weight += w[sorted[j]];
    }
    if (slab_weight <= best.weight + 1e-15) continue;
    box_search(pts, w, half, slab, axis + 1, best);
  }
}

inline Placement box_kernel(const std::vector<Vec>& pts, const std::vector<double>& w, const Vec& half) {
  std::vector<std::size_t> all(pts.size());
  std::iota(all.begin(), all.end(), 0);
  Placement best;
  box_search(pts, w, half, all, 0, best);
  return best;
}

/// Interval [x − R·left, x + R·right] slid over sorted 1-d atoms.
inline Placement interval_kernel(const AtomDistribution& dist, double left, double right, double R) {
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist.points[a](0) < dist.points[b](0); });
  const double length = R * (left + right);
  Placement best;
  double sum = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double x0 = dist.points[order[i]](0);
    while (j < order.size() && dist.points[order[j]](0) - x0 <= length * (1.0 + kBoundaryTolerance))
      sum += dist.weights[order[j++]];
    if (sum > best.weight + 1e-15) {
      best.weight = sum;
      const double span = dist.points[order[j - 1]](0) - x0;
      const double slack = std::max(0.0, length - span);
      best.center = make_vec({x0 - 0.5 * slack + R * left});
    }
    sum -= dist.weights[order[i]];
  }
  return best;
}

/// Max weight in a closed disk of radius r: some optimal disk has an atom
/// on its boundary, so rotate a disk around every atom and sweep angles.
inline Placement disk_kernel(const std::vector<Vec>& pts, const std::vector<double>& w, double r) {
  Placement best;
  const double reach = 2.0 * r * (1.0 + kBoundaryTolerance);
  struct Event {
    double angle;
    int delta;  // +1 enter, -1 leave
    double weight;
  };
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::vector<Event> events;
    double active = w[p];
    for (std::size_t q = 0; q < pts.size(); ++q) {
      if (q == p) continue;
      const Vec diff = pts[q] - pts[p];
      const double dist = diff.norm();
      if (dist > reach) continue;
      const double phi = std::atan2(diff(1), diff(0));
      const double beta = std::acos(std::min(1.0, dist / (2.0 * r)));
      double start = phi - beta, end = phi + beta;
      auto wrap = [](double a) {
        a = std::fmod(a, 2.0 * kPi);
        return a < 0.0 ? a + 2.0 * kPi : a;
      };
      start = wrap(start);
      end = wrap(end);
      if (start > end) active += w[q];  // interval covers angle 0
      events.push_back({start, +1, w[q]});
      events.push_back({end, -1, w[q]});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      if (a.angle != b.angle) return a.angle < b.angle;
      return a.delta > b.delta;
    });
    auto consider = [&](double weight, double angle) {
      if (weight > best.weight + 1e-15) {
        best.weight = weight;
        best.center = pts[p] + r * make_vec({std::cos(angle), std::sin(angle)});
      }
    };
    double first = events.empty() ? 0.0 : events.front().angle;
    consider(active, events.empty() ? 0.0 : 0.5 * first);
    for (std::size_t e = 0; e < events.size(); ++e) {
      active += events[e].delta * events[e].weight;
      if (events[e].delta > 0) {
        const double next = e + 1 < events.size() ? events[e + 1].angle : 2.0 * kPi;
        consider(active, 0.5 * (events[e].angle + next));
      }
    }
  }
  return best;
}

inline Placement candidate_kernel(const AtomDistribution& dist, const StarBody& body, double R,
                                  std::size_t grid_budget) {
  const int d = dist.dimension;
  std::vector<Vec> candidates = dist.points;
  if (dist.size() <= 200) {
    for (std::size_t i = 0; i < dist.size(); ++i)
      for (std::size_t j = i + 1; j < dist.size(); ++j) candidates.push_back(0.5 * (dist.points[i] + dist.points[j]));
  }
  Vec lo = dist.points.front(), hi = lo;
  for (const Vec& p : dist.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const auto per_axis = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::floor(std::pow(double(grid_budget), 1.0 / double(d)))));
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    Vec c(d);
    for (int i = 0; i < d; ++i) c(i) = lo(i) + (hi(i) - lo(i)) * double(idx[i]) / double(per_axis - 1);
    candidates.push_back(c);
    int axis = 0;
    while (axis < d && ++idx[axis] == per_axis) idx[axis++] = 0;
    if (axis == d) break;
  }
  Placement best;
  for (const Vec& c : candidates) {
    const double p = probability_in_translate(dist, body, R, c);
    if (p > best.weight + 1e-15) {
      best.weight = p;
      best.center = c;
    }
  }
  return best;
}

}  // namespace detail

inline constexpr std::size_t kDefaultCandidateGrid = 20000;

/// Certified lower bound from a finite family of candidate centers (atoms,
/// pairwise midpoints for small supports, and a lattice over the support).
inline SmallBallResult rho_lower_bound(const AtomDistribution& dist, const StarBody& body, double R,
                                       std::size_t grid_budget = kDefaultCandidateGrid) {
  require(dist.size() > 0, "atom distribution is empty");
  require(dist.dimension == body.dimension(), "atom dimension does not match the body");
  const detail::Placement best = detail::candidate_kernel(dist, body, R, grid_budget);
  return {best.weight, Certificate::lower_bound, best.center, "candidate_grid", 0.0};
}

/// ρ_R^K from the exact law, dispatching to an exact max-depth kernel when
/// one exists for the body and to rho_lower_bound otherwise.
inline SmallBallResult rho_exact(const AtomDistribution& dist, const StarBody& body, double R) {
  require(dist.size() > 0, "atom distribution is empty");
  require(dist.dimension == body.dimension(), "atom dimension does not match the body");
  require(R > 0.0, "R must be positive");
  const int d = dist.dimension;

  detail::Placement placement;
  std::string method;
  if (d == 1) {
    const double right = 1.0 / body.norm(make_vec({1.0}));
    const double left = 1.0 / body.norm(make_vec({-1.0}));
    placement = detail::interval_kernel(dist, left, right, R);
    method = "interval_sweep";
  } else if (body.is_box_like()) {
    placement = detail::box_kernel(dist.points, dist.weights, R * body.box_half_widths());
    method = "box_sweep";
  } else if (d == 2 && body.is_lp(1.0)) {
    // |x|_1 = max(|x+y|, |x−y|): a box in rotated coordinates.
    std::vector<Vec> rotated;
    for (const Vec& p : dist.points) rotated.push_back(make_vec({p(0) + p(1), p(0) - p(1)}));
    placement = detail::box_kernel(rotated, dist.weights, Vec::Constant(2, R * body.scale()));
    const Vec& c = placement.center;
    placement.center = make_vec({0.5 * (c(0) + c(1)), 0.5 * (c(0) - c(1))});
    method = "rotated_box_sweep";
  } else if (d == 2 && body.is_lp(2.0)) {
    placement = detail::disk_kernel(dist.points, dist.weights, R * body.scale());
    method = "disk_sweep";
  } else {
    return rho_lower_bound(dist, body, R);
  }
  SmallBallResult out{0.0, Certificate::exact, placement.center, method, 0.0};
  out.rho = probability_in_translate(dist, body, R, out.center);
  if (out.rho < placement.weight - 1e-12) {
    // The witness lost an atom to rounding at the boundary: keep the
    // certified value only.
    out.certificate = Certificate::lower_bound;
  }
  return out;
}

inline SmallBallResult rho_exact(const VectorSystem& system, const NoiseModel& model,
                                 double budget = kDefaultEnumerationBudget) {
  return rho_exact(atoms(system, model, budget), system.body, system.R);
}

/// max over `centers` of a Monte Carlo estimate of P(X_V ∈ x + RK).
inline SmallBallResult rho_mc(const VectorSystem& system, const NoiseModel& model, double R, std::size_t samples,
                              const std::vector<Vec>& centers, std::uint64_t seed) {
  require(!centers.empty(), "rho_mc needs at least one center");
  require(samples > 0, "rho_mc needs a positive sample count");
  const int d = system.dimension();
  for (const Vec& c : centers) require(c.size() == d, "center dimension does not match the system");

  std::vector<double> probs;
  std::vector<double> values;
  for (const Atom1& a : model.atoms()) {
    probs.push_back(a.probability);
    values.push_back(a.value);
  }
  const std::size_t blocks = (samples + kSampleBlock - 1) / kSampleBlock;
  std::vector<std::vector<std::size_t>> hits(blocks, std::vector<std::size_t>(centers.size(), 0));
  parallel_blocks(blocks, [&](std::size_t b) {
    Rng rng = block_rng(seed, b);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    const std::size_t end = std::min(samples, (b + 1) * kSampleBlock);
    for (std::size_t s = b * kSampleBlock; s < end; ++s) {
      Vec x = Vec::Zero(d);
      for (const Vec& v : system.vectors) x += values[pick(rng)] * v;
      for (std::size_t c = 0; c < centers.size(); ++c)
        if (system.body.contains(x - centers[c], R)) ++hits[b][c];
    }
  });
  std::size_t best = 0;
  std::vector<std::size_t> total(centers.size(), 0);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t b = 0; b < blocks; ++b) total[c] += hits[b][c];
    if (total[c] > total[best]) best = c;
  }
  const double p = double(total[best]) / double(samples);
  return {p, Certificate::lower_bound, centers[best], "monte_carlo", std::sqrt(p * (1.0 - p) / double(samples))};
}

// ---------------------------------------------------------------------------
// Sharp Littlewood–Offord quantities.

struct BinomialSum {
  std::uint64_t value = 0;  ///< S(n, m), exact
  double probability = 0.0; ///< 2^{-n} S(n, m)
};

/// Sum of the m largest binomial coefficients C(n, ·).
inline BinomialSum binomial_sum_S(int n, int m) {
  require(n >= 0 && n <= 62, "binomial_sum_S supports 0 <= n <= 62");
  require(m >= 1 && m <= n + 1, "m must lie in [1, n+1]");
  std::vector<std::uint64_t> row(n + 1, 1);
  for (int k = 1; k <= n; ++k) row[k] = row[k - 1] * std::uint64_t(n - k + 1) / std::uint64_t(k);
  std::sort(row.begin(), row.end(), std::greater<>());
  std::uint64_t s = 0;
  for (int i = 0; i < m; ++i) s += row[i];
  return {s, std::ldexp(double(s), -n)};
}

struct SharpLoReport {
  int n = 0;
  double R = 0.0;
  double rho = 0.0;
  double bound = 0.0;  ///< 2^{-n} S(n, ⌊R⌋+1)
  double ratio = 0.0;
  bool exact_equality = false;  ///< 2^n ρ == S(n, ⌊R⌋+1) as integers
};

/// ρ for the canonical system V = {1, …, 1} ⊂ R, K = [−1, 1], signs,
/// against 2^{−n} S(n, ⌊R⌋+1).
inline SharpLoReport sharp_lo_report(int n, double R) {
  require(n >= 1 && n <= 24, "sharp_lo_report enumerates exactly and needs 1 <= n <= 24");
  require(R > 0.0, "R must be positive");
  const int m = static_cast<int>(std::floor(R)) + 1;
  require(m <= n + 1, "floor(R) + 1 exceeds n + 1");
  VectorSystem system(std::vector<Vec>(std::size_t(n), make_vec({1.0})), R, StarBody::lp_ball(2.0, 1));
  const SmallBallResult rho = rho_exact(system, NoiseModel::bernoulli());
  const BinomialSum s = binomial_sum_S(n, m);
  SharpLoReport out;
  out.n = n;
  out.R = R;
  out.rho = rho.rho;
  out.bound = s.probability;
  out.ratio = rho.rho / s.probability;
  out.exact_equality = std::ldexp(rho.rho, n) == double(s.value);
  return out;
}

}  // namespace quasilo

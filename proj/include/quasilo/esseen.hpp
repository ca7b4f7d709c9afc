// Characteristic-function side of the small-ball problem: the Gaussian
// weighted integral I(X), Esseen-type upper bounds for ρ_R^K(X_V), the
// one-dimensional torus integral estimate, and the dilation optimizer.
#pragma once

#include "quasilo/geometry.hpp"
#include "quasilo/noise.hpp"
#include "quasilo/smallball.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace quasilo {

enum class EstimateKind { I_integral, esseen_k_bound, esseen_eta_bound, euclidean_bound };

inline const char* to_string(EstimateKind k) {
  switch (k) {
    case EstimateKind::I_integral: return "I_integral";
    case EstimateKind::esseen_k_bound: return "esseen_k_bound";
    case EstimateKind::esseen_eta_bound: return "esseen_eta_bound";
    case EstimateKind::euclidean_bound: return "euclidean_bound";
  }
  return "unknown";
}

struct EsseenEstimate {
  EstimateKind kind = EstimateKind::I_integral;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinEsseenSamples = 1000;

/// |φ_{X_V}(ξ)| = Π_j |E exp(iη⟨v_j, ξ⟩)|.
inline double char_system_abs(const std::vector<Vec>& vectors, const NoiseModel& model, const Vec& xi) {
  double prod = 1.0;
  for (const Vec& v : vectors) {
    prod *= char_abs(model, v.dot(xi));
    if (prod == 0.0) break;
  }
  return prod;
}

inline double char_system_abs(const VectorSystem& system, const NoiseModel& model, const Vec& xi) {
  return char_system_abs(system.vectors, model, xi);
}

/// I(X_V) = ∫ |φ(ξ)| e^{−|ξ|²/2} dξ = (2π)^{d/2} E_g |φ(g)|, g ~ N(0, I_d).
inline EsseenEstimate esseen_integral(const std::vector<Vec>& vectors, int d, const NoiseModel& model,
                                      std::size_t samples, std::uint64_t seed) {
  require(samples >= kMinEsseenSamples, "esseen_integral needs at least 1000 samples");
  for (const Vec& v : vectors) require(v.size() == d, "vector dimension mismatch");
  const MeanEstimate m = mc_mean(samples, seed, [&](Rng& rng) {
    return char_system_abs(vectors, model, gaussian_vector(rng, d));
  });
  const double scale = std::pow(2.0 * kPi, 0.5 * d);
  return {EstimateKind::I_integral, scale * m.mean, scale * m.std_error, samples, seed};
}

inline EsseenEstimate esseen_integral(const VectorSystem& system, const NoiseModel& model, std::size_t samples,
                                      std::uint64_t seed) {
  return esseen_integral(system.vectors, system.dimension(), model, samples, seed);
}

/// κ(K)^d · I(X_{V_R}). The Monte Carlo error is reported, never subtracted.
inline EsseenEstimate esseen_bound(const VectorSystem& system, const NoiseModel& model, const BodyConstants& constants,
                                   std::size_t samples, std::uint64_t seed) {
  require(constants.dimension == system.dimension(), "body constants dimension mismatch");
  const EsseenEstimate I = esseen_integral(system.rescaled(), system.dimension(), model, samples, seed);
  const double kd = std::pow(constants.kappa, system.dimension());
  return {EstimateKind::esseen_k_bound, kd * I.value, kd * I.std_error, samples, seed};
}

/// κ(K)^d (2π)^{d/2} E_g exp(−½ Σ_{v ∈ V_R} ‖⟨v, g⟩‖_η²).
inline EsseenEstimate esseen_eta_bound(const VectorSystem& system, const NoiseModel& model,
                                       const BodyConstants& constants, std::size_t samples, std::uint64_t seed) {
  require(samples >= kMinEsseenSamples, "esseen_eta_bound needs at least 1000 samples");
  require(constants.dimension == system.dimension(), "body constants dimension mismatch");
  const int d = system.dimension();
  const std::vector<Vec> scaled = system.rescaled();
  const MeanEstimate m = mc_mean(samples, seed, [&](Rng& rng) {
    const Vec g = gaussian_vector(rng, d);
    double s = 0.0;
    for (const Vec& v : scaled) s += eta_norm_squared(model, v.dot(g));
    return std::exp(-0.5 * s);
  });
  const double scale = std::pow(constants.kappa, d) * std::pow(2.0 * kPi, 0.5 * d);
  return {EstimateKind::esseen_eta_bound, scale * m.mean, scale * m.std_error, samples, seed};
}

inline double euclidean_ball_volume(int d, double radius) {
  return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(radius, d);
}

/// C^d (R/√d + √d/ε)^d ∫_{εB_2} |φ_{X_V}(ξ)| dξ, the integral by uniform
/// sampling of εB_2. C is unpinned upstream and defaults to 1, so this is
/// a comparison figure, not a certified bound.
inline EsseenEstimate esseen_euclidean_bound(const VectorSystem& system, const NoiseModel& model, double epsilon,
                                             std::size_t samples, std::uint64_t seed, double absolute_constant = 1.0) {
  require(epsilon > 0.0, "epsilon must be positive");
  require(samples >= kMinEsseenSamples, "esseen_euclidean_bound needs at least 1000 samples");
  const int d = system.dimension();
  const MeanEstimate m = mc_mean(samples, seed, [&](Rng& rng) {
    Vec g = gaussian_vector(rng, d);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double radius = epsilon * std::pow(u(rng), 1.0 / d);
    g *= radius / g.norm();
    return char_system_abs(system.vectors, model, g);
  });
  const double sd = std::sqrt(double(d));
  const double prefactor = std::pow(absolute_constant * (system.R / sd + sd / epsilon), d) *
                           euclidean_ball_volume(d, epsilon);
  return {EstimateKind::euclidean_bound, prefactor * m.mean, prefactor * m.std_error, samples, seed};
}

// ---------------------------------------------------------------------------
// One-dimensional torus integral.

struct LemmaTvCheck {
  double lambda = 0.0;
  double w = 0.0;
  double alpha = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double quadrature_error = 0.0;
  bool holds = false;
};

inline constexpr double kLemmaTvTruncation = 12.0;

/// lhs = ∫ exp(−λ‖ξw+α‖_T² − ξ²/2) dξ over |ξ| ≤ 12 by adaptive
/// Gauss–Kronrod on `quad_points` panels, split at every kink of ‖·‖_T;
/// rhs = 40(|w|+1) / (|w| √(1+λ)).
inline LemmaTvCheck lemma_tv_check(double lambda, double w, double alpha, std::size_t quad_points = 2000) {
  require(lambda > 0.0, "lambda must be positive");
  require(w != 0.0 && std::isfinite(w), "w must be nonzero");
  require(quad_points >= 1000, "quadrature budget must be at least 1000 panels");
  const double L = kLemmaTvTruncation;
  auto f = [&](double xi) {
    const double t = t_norm(xi * w + alpha);
    return std::exp(-lambda * t * t - 0.5 * xi * xi);
  };
  std::vector<double> cuts;
  for (std::size_t i = 0; i <= quad_points; ++i) cuts.push_back(-L + 2.0 * L * double(i) / double(quad_points));
  // ‖·‖_T has kinks on (π/2)Z.
  const double a = -L * w + alpha, b = L * w + alpha;
  const double lo = std::min(a, b), hi = std::max(a, b);
  for (double k = std::ceil(lo / (0.5 * kPi)); k * 0.5 * kPi <= hi; k += 1.0) {
    const double xi = (k * 0.5 * kPi - alpha) / w;
    if (xi > -L && xi < L) cuts.push_back(xi);
  }
  std::sort(cuts.begin(), cuts.end());
  using boost::math::quadrature::gauss_kronrod;
  LemmaTvCheck out{lambda, w, alpha};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    double err = 0.0;
    out.lhs += gauss_kronrod<double, 15>::integrate(f, cuts[i], cuts[i + 1], 10, 1e-10, &err);
    out.quadrature_error += err;
  }
  out.rhs = 40.0 * (std::abs(w) + 1.0) / (std::abs(w) * std::sqrt(1.0 + lambda));
  out.holds = out.lhs <= out.rhs;
  return out;
}

// ---------------------------------------------------------------------------
// Dilation optimizer.

struct ScaledBoundPoint {
  double t = 1.0;
  double kappa = 0.0;
  double integral = 0.0;
  double std_error = 0.0;
  double value = 0.0;  ///< κ(tK)^d · I((t/R) X_V)
};

struct ScaledBoundResult {
  double t_star = 1.0;
  double best = 0.0;
  double best_std_error = 0.0;
  std::vector<ScaledBoundPoint> profile;
};

/// min over t in the grid of κ(tK)^d · I((t/R) X_V), using ρ_R^K = ρ_{R/t}^{tK}.
/// Every t shares the same Gaussian samples, so the t = 1 entry equals
/// esseen_bound with constants from estimate_constants(body, samples, seed).
inline ScaledBoundResult optimize_scaled_bound(const VectorSystem& system, const NoiseModel& model,
                                               const std::vector<double>& t_grid, std::size_t samples,
                                               std::uint64_t seed) {
  require(!t_grid.empty(), "t grid must be nonempty");
  const int d = system.dimension();
  const std::vector<KappaPoint> kappas = kappa_scaling_profile(system.body, t_grid, samples, seed);
  ScaledBoundResult out;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const EsseenEstimate I = esseen_integral(system.scaled_vectors(t / system.R), d, model, samples, seed);
    const double kd = std::pow(kappas[i].kappa, d);
    ScaledBoundPoint p{t, kappas[i].kappa, I.value, kd * I.std_error, kd * I.value};
    out.profile.push_back(p);
    if (i == 0 || p.value < out.best) {
      out.best = p.value;
      out.best_std_error = p.std_error;
      out.t_star = t;
    }
  }
  return out;
}

}  // namespace quasilo

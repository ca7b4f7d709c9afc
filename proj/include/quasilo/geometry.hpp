// Star-shaped bodies K ⊂ R^d, their Minkowski functionals ‖·‖_K and the
// body constants (volume, Gaussian measure, κ, embedding constants).
#pragma once

#include "quasilo/core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

namespace quasilo {

enum class BodyKind { lp_ball, scaled_box, radial };

inline const char* to_string(BodyKind kind) {
  switch (kind) {
    case BodyKind::lp_ball: return "lp";
    case BodyKind::scaled_box: return "box";
    case BodyKind::radial: return "radial";
  }
  return "unknown";
}

/// Boundary radius of a radial body along a unit direction.
using RadiusFunction = std::function<double(const Vec&)>;

/// A compact star-shaped body with 0 in its interior, possibly asymmetric.
///
/// Three families are supported: ℓ_p balls (p in (0, ∞]), axis-aligned boxes
/// and radial bodies given by a boundary-radius function. Every body carries
/// a dilation factor so that tK is represented without losing its closed
/// forms: ‖x‖_{tK} = ‖x‖_K / t.
class StarBody {
 public:
  static StarBody lp_ball(double p, int d) {
    require(d >= 1, "body dimension must be positive");
    require(p > 0.0 && !std::isnan(p), "lp exponent must lie in (0, inf]");
    StarBody b(BodyKind::lp_ball, d);
    b.p_ = p;
    b.quasi_constant_ = p < 1.0 ? std::pow(2.0, 1.0 / p - 1.0) : 1.0;
    return b;
  }

  static StarBody scaled_box(Vec half_widths) {
    require(half_widths.size() >= 1, "box needs at least one half-width");
    for (double h : half_widths) require(h > 0.0 && std::isfinite(h), "box half-widths must be positive");
    StarBody b(BodyKind::scaled_box, static_cast<int>(half_widths.size()));
    b.half_widths_ = std::move(half_widths);
    return b;
  }

  /// `max_radius` bounds the boundary radius; without it volume estimation
  /// has no bounding box and fails. Star-shapedness is assumed.
  static StarBody radial(int d, RadiusFunction boundary_radius, double quasi_constant,
                         std::optional<double> max_radius = std::nullopt) {
    require(d >= 1, "body dimension must be positive");
    require(static_cast<bool>(boundary_radius), "radial body needs a boundary-radius function");
    require(quasi_constant >= 1.0, "quasi-triangle constant must be >= 1");
    if (max_radius) require(*max_radius > 0.0 && std::isfinite(*max_radius), "max_radius must be positive");
    StarBody b(BodyKind::radial, d);
    b.radius_ = std::make_shared<RadiusFunction>(std::move(boundary_radius));
    b.quasi_constant_ = quasi_constant;
    b.max_radius_ = max_radius;
    return b;
  }

  /// The dilate tK.
  StarBody scaled(double t) const {
    require(t > 0.0 && std::isfinite(t), "dilation factor must be positive");
    StarBody b = *this;
    b.scale_ *= t;
    return b;
  }

  int dimension() const { return d_; }
  BodyKind kind() const { return kind_; }
  double p() const { return p_; }
  double scale() const { return scale_; }
  double quasi_constant() const { return quasi_constant_; }
  const Vec& half_widths() const { return half_widths_; }
  std::optional<double> max_radius() const {
    if (!max_radius_) return std::nullopt;
    return *max_radius_ * scale_;
  }

  bool is_lp(double q) const { return kind_ == BodyKind::lp_ball && p_ == q; }
  bool is_box_like() const {
    return kind_ == BodyKind::scaled_box || is_lp(std::numeric_limits<double>::infinity());
  }

  /// Half-widths of a box-like body including the dilation.
  Vec box_half_widths() const {
    require(is_box_like(), "body is not a box");
    if (kind_ == BodyKind::scaled_box) return half_widths_ * scale_;
    return Vec::Constant(d_, scale_);
  }

  /// ‖x‖_K = inf{t > 0 : x ∈ tK}.
  double norm(const Vec& x) const {
    require(x.size() == d_, "vector dimension does not match the body");
    double raw = 0.0;
    switch (kind_) {
      case BodyKind::lp_ball: raw = lp_norm(x, p_); break;
      case BodyKind::scaled_box: raw = (x.cwiseAbs().array() / half_widths_.array()).maxCoeff(); break;
      case BodyKind::radial: {
        const double r = x.norm();
        if (r == 0.0) return 0.0;
        const double boundary = (*radius_)(x / r);
        if (!(boundary > 0.0) || !std::isfinite(boundary)) {
          throw ValidationError("radial boundary radius must be finite and positive");
        }
        raw = r / boundary;
        break;
      }
    }
    return raw / scale_;
  }

  bool contains(const Vec& x, double radius = 1.0) const {
    return norm(x) <= radius * (1.0 + kBoundaryTolerance);
  }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(kind_) << "(d=" << d_;
    if (kind_ == BodyKind::lp_ball) os << ", p=" << p_;
    if (scale_ != 1.0) os << ", scale=" << scale_;
    os << ")";
    return os.str();
  }

  static double lp_norm(const Vec& x, double p) {
    const double m = linf(x);
    if (m == 0.0 || std::isinf(p)) return m;
    if (p == 2.0) return x.norm();
    if (p == 1.0) return x.cwiseAbs().sum();
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v) / m, p);
    return m * std::pow(s, 1.0 / p);
  }

 private:
  StarBody(BodyKind kind, int d) : kind_(kind), d_(d) {}

  BodyKind kind_;
  int d_;
  double p_ = 2.0;
  Vec half_widths_;
  std::shared_ptr<RadiusFunction> radius_;
  std::optional<double> max_radius_;
  double quasi_constant_ = 1.0;
  double scale_ = 1.0;
};

/// dist_K(v, S) = min_s ‖v − s‖_K, argument order exactly v − s.
inline double dist_to_set(const StarBody& body, const Vec& v, const std::vector<Vec>& points) {
  require(!points.empty(), "dist_to_set needs a nonempty point set");
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& s : points) best = std::min(best, body.norm(v - s));
  return best;
}

// ---------------------------------------------------------------------------
// Embedding constants.

inline double reciprocal(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }

struct EmbeddingConstants {
  double omega = 1.0;  ///< smallest t with B_p ⊆ tK
  double W = 1.0;      ///< 1 / sup{t : tK ⊆ B_p}
};

/// ω_p and W_p of K = B_q^d, giving (1/W)|x|_p ≤ |x|_q ≤ ω|x|_p.
inline EmbeddingConstants lp_embedding_constants(double p, double q, int d) {
  require(p > 0.0 && q > 0.0 && !std::isnan(p) && !std::isnan(q), "exponents must lie in (0, inf]");
  require(d >= 1, "dimension must be positive");
  const double e = reciprocal(q) - reciprocal(p);
  return {std::max(1.0, std::pow(double(d), e)), std::max(1.0, std::pow(double(d), -e))};
}

/// ω_p(K) = sup_{x ∈ B_p} ‖x‖_K. Closed form for ℓ_p balls and boxes; for
/// radial bodies a sampled lower estimate over the B_p sphere.
inline double omega(const StarBody& body, double p, std::size_t samples = 20000, std::uint64_t seed = 7) {
  const int d = body.dimension();
  switch (body.kind()) {
    case BodyKind::lp_ball: return lp_embedding_constants(p, body.p(), d).omega / body.scale();
    case BodyKind::scaled_box: return 1.0 / (body.half_widths().minCoeff() * body.scale());
    case BodyKind::radial: break;
  }
  double best = 0.0;
  auto visit = [&](const Vec& x) {
    const double n = StarBody::lp_norm(x, p);
    if (n > 0.0) best = std::max(best, body.norm(x / n));
  };
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e(i) = 1.0;
    visit(e);
    visit(-e);
  }
  if (d <= 12) {
    for (std::uint64_t mask = 0; mask < (1ULL << d); ++mask) {
      Vec v(d);
      for (int i = 0; i < d; ++i) v(i) = (mask >> i) & 1 ? 1.0 : -1.0;
      visit(v);
    }
  }
  Rng rng = block_rng(seed, 0);
  for (std::size_t i = 0; i < samples; ++i) visit(gaussian_vector(rng, d));
  return best;
}

/// W_p(K) = sup_{x ∈ K} |x|_p.
inline double W(const StarBody& body, double p, std::size_t samples = 20000, std::uint64_t seed = 11) {
  const int d = body.dimension();
  switch (body.kind()) {
    case BodyKind::lp_ball: return lp_embedding_constants(p, body.p(), d).W * body.scale();
    case BodyKind::scaled_box: return StarBody::lp_norm(body.half_widths(), p) * body.scale();
    case BodyKind::radial: break;
  }
  double best = 0.0;
  Rng rng = block_rng(seed, 0);
  for (std::size_t i = 0; i < samples; ++i) {
    const Vec x = gaussian_vector(rng, d);
    const double n = body.norm(x);
    if (n > 0.0) best = std::max(best, StarBody::lp_norm(x / n, p));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Volume, Gaussian measure and κ.

/// Lebesgue measure when a closed form exists.
inline std::optional<double> closed_form_volume(const StarBody& body) {
  const int d = body.dimension();
  const double dilation = std::pow(body.scale(), d);
  switch (body.kind()) {
    case BodyKind::lp_ball: {
      if (std::isinf(body.p())) return std::pow(2.0, d) * dilation;
      const double p = body.p();
      const double log_mu = d * std::log(2.0 * std::tgamma(1.0 / p + 1.0)) - std::lgamma(d / p + 1.0);
      return std::exp(log_mu) * dilation;
    }
    case BodyKind::scaled_box: return (2.0 * body.half_widths()).prod() * dilation;
    case BodyKind::radial: return std::nullopt;
  }
  return std::nullopt;
}

/// Half-width of an axis-aligned cube containing K.
inline std::optional<double> bounding_half_width(const StarBody& body) {
  if (body.kind() == BodyKind::radial) return body.max_radius();
  return W(body, std::numeric_limits<double>::infinity());
}

/// Hit-or-miss volume estimate inside the bounding cube.
inline MeanEstimate mc_volume(const StarBody& body, std::size_t samples, std::uint64_t seed) {
  const auto half = bounding_half_width(body);
  if (!half) throw ValidationError("radial body has no finite bounding box (max_radius missing)");
  const int d = body.dimension();
  const double box_volume = std::pow(2.0 * *half, d);
  MeanEstimate frac = mc_mean(samples, seed, [&](Rng& rng) {
    std::uniform_real_distribution<double> u(-*half, *half);
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = u(rng);
    return body.norm(x) <= 1.0 ? 1.0 : 0.0;
  });
  const double f = frac.mean;
  return {box_volume * f, box_volume * std::sqrt(f * (1.0 - f) / double(samples)), samples};
}

/// γ_d(K) by counting standard Gaussian samples with ‖g‖_K ≤ 1.
inline MeanEstimate mc_gaussian_measure(const StarBody& body, std::size_t samples, std::uint64_t seed) {
  const int d = body.dimension();
  MeanEstimate hits = mc_mean(samples, seed, [&](Rng& rng) {
    return body.norm(gaussian_vector(rng, d)) <= 1.0 ? 1.0 : 0.0;
  });
  const double f = hits.mean;
  return {f, std::sqrt(f * (1.0 - f) / double(samples)), samples};
}

/// γ_d(K) from closed forms (boxes, Euclidean balls, intervals) or a
/// one-dimensional adaptive quadrature (planar ℓ_p balls).
inline std::optional<double> reference_gaussian_measure(const StarBody& body) {
  const int d = body.dimension();
  const double t = body.scale();
  if (body.is_box_like()) {
    double g = 1.0;
    for (double h : body.box_half_widths()) g *= 2.0 * normal_cdf(h) - 1.0;
    return g;
  }
  if (d == 1) {
    const double right = 1.0 / body.norm(make_vec({1.0}));
    const double left = 1.0 / body.norm(make_vec({-1.0}));
    return normal_cdf(right) - normal_cdf(-left);
  }
  if (body.kind() != BodyKind::lp_ball) return std::nullopt;
  if (body.p() == 2.0) return boost::math::gamma_p(0.5 * d, 0.5 * t * t);
  if (d != 2) return std::nullopt;
  const double p = body.p();
  auto slice = [&](double x) {
    const double u = std::abs(x) / t;
    if (u >= 1.0) return 0.0;
    const double y = t * std::pow(1.0 - std::pow(u, p), 1.0 / p);
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi) * (2.0 * normal_cdf(y) - 1.0);
  };
  using boost::math::quadrature::gauss_kronrod;
  return 2.0 * gauss_kronrod<double, 61>::integrate(slice, 0.0, t, 20, 1e-14);
}

struct BodyConstants {
  int dimension = 1;
  double quasi_constant = 1.0;
  double mu = 0.0;
  double gamma = 0.0;
  double kappa = 0.0;
  double se_mu = 0.0;
  double se_gamma = 0.0;
  std::size_t samples = 0;  ///< 0 when every value is closed form
  std::uint64_t seed = 0;
};

/// κ(K) = C_K √(2/π) (μ_d / γ_d)^{1/d}.
inline double assemble_kappa(double quasi_constant, double mu, double gamma, int d) {
  return quasi_constant * std::sqrt(2.0 / kPi) * std::pow(mu / gamma, 1.0 / d);
}

inline BodyConstants make_constants(const StarBody& body, double mu, double gamma, double se_mu, double se_gamma,
                                    std::size_t samples, std::uint64_t seed) {
  require(mu > 0.0, "volume estimate must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "Gaussian measure estimate must lie in (0, 1]");
  BodyConstants c;
  c.dimension = body.dimension();
  c.quasi_constant = body.quasi_constant();
  c.mu = mu;
  c.gamma = gamma;
  c.se_mu = se_mu;
  c.se_gamma = se_gamma;
  c.kappa = assemble_kappa(c.quasi_constant, mu, gamma, c.dimension);
  c.samples = samples;
  c.seed = seed;
  return c;
}

inline constexpr std::size_t kMinConstantSamples = 1000;

/// μ_d from its closed form when available (hit-or-miss otherwise), γ_d by
/// Gaussian Monte Carlo, κ assembled from the two.
inline BodyConstants estimate_constants(const StarBody& body, std::size_t samples, std::uint64_t seed) {
  require(samples >= kMinConstantSamples, "estimate_constants needs at least 1000 samples");
  double mu = 0.0, se_mu = 0.0;
  if (auto exact = closed_form_volume(body)) {
    mu = *exact;
  } else {
    const MeanEstimate v = mc_volume(body, samples, splitmix64(seed ^ 0xa5a5a5a5ULL));
    mu = v.mean;
    se_mu = v.std_error;
  }
  const MeanEstimate g = mc_gaussian_measure(body, samples, seed);
  return make_constants(body, mu, g.mean, se_mu, g.std_error, samples, seed);
}

/// Constants from closed forms and quadrature only; nullopt when either
/// the volume or the Gaussian measure lacks one.
inline std::optional<BodyConstants> reference_constants(const StarBody& body) {
  const auto mu = closed_form_volume(body);
  const auto gamma = reference_gaussian_measure(body);
  if (!mu || !gamma) return std::nullopt;
  return make_constants(body, *mu, *gamma, 0.0, 0.0, 0, 0);
}

struct KappaPoint {
  double t = 1.0;
  double kappa = 0.0;
  double gamma = 0.0;
  double se_gamma = 0.0;
};

/// κ(tK) over a grid of dilations. μ_d(tK) = t^d μ_d(K); γ_d(tK) is
/// re-estimated per t with common random numbers (same seed), so t = 1
/// reproduces estimate_constants exactly.
inline std::vector<KappaPoint> kappa_scaling_profile(const StarBody& body, const std::vector<double>& t_grid,
                                                     std::size_t samples, std::uint64_t seed) {
  require(!t_grid.empty(), "t grid must be nonempty");
  const BodyConstants base = estimate_constants(body, samples, seed);
  std::vector<KappaPoint> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    require(t > 0.0 && std::isfinite(t), "t grid entries must be positive");
    const StarBody tk = body.scaled(t);
    const double mu = std::pow(t, body.dimension()) * base.mu;
    const MeanEstimate g = mc_gaussian_measure(tk, samples, seed);
    require(g.mean > 0.0, "Gaussian measure estimate of tK is zero; increase samples or t");
    out.push_back({t, assemble_kappa(body.quasi_constant(), mu, g.mean, body.dimension()), g.mean, g.std_error});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-triangle audit.

struct QuasiTriangleReport {
  double max_ratio = 0.0;
  double quasi_constant = 1.0;
  bool within_constant = true;
};

/// Largest observed ‖x+y‖ / (‖x‖+‖y‖) over all pairs of signed coordinate
/// vectors and `trials` random Gaussian pairs.
inline QuasiTriangleReport quasi_triangle_check(const StarBody& body, std::size_t trials, std::uint64_t seed) {
  const int d = body.dimension();
  double best = 0.0;
  auto visit = [&](const Vec& x, const Vec& y) {
    const double denom = body.norm(x) + body.norm(y);
    if (denom > 0.0) best = std::max(best, body.norm(x + y) / denom);
  };
  std::vector<Vec> axes;
  for (int i = 0; i < d; ++i) {
    for (double s : {1.0, -1.0}) {
      Vec e = Vec::Zero(d);
      e(i) = s;
      axes.push_back(e);
    }
  }
  for (const Vec& x : axes)
    for (const Vec& y : axes) visit(x, y);
  Rng rng = block_rng(seed, 0);
  for (std::size_t i = 0; i < trials; ++i) {
    const Vec x = gaussian_vector(rng, d);
    const Vec y = gaussian_vector(rng, d);
    visit(x, y);
  }
  const double ck = body.quasi_constant();
  return {best, ck, best <= ck * (1.0 + 1e-12)};
}

}  // namespace quasilo

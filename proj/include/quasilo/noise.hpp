// Coefficient laws η, the torus distance ‖·‖_T, the η-norm and the two
// anti-concentration conditions the inverse theorems rely on.
#pragma once

#include "quasilo/core.hpp"

#include <complex>
#include <map>
#include <optional>
#include <utility>

namespace quasilo {

/// ‖a‖_T = dist(a, πZ), in [0, π/2].
inline double t_norm(double a) {
  double r = std::fmod(a, kPi);
  if (r < 0.0) r += kPi;
  return std::min(r, kPi - r);
}

struct Atom1 {
  double value = 0.0;
  double probability = 0.0;
};

/// Law of one coefficient η with finite support.
class NoiseModel {
 public:
  /// Symmetric ±1 signs with the constants the inverse theorems quote.
  static NoiseModel bernoulli() {
    NoiseModel m({{-1.0, 0.5}, {1.0, 0.5}});
    m.name_ = "bernoulli";
    m.c_eta = 2.0 / (kPi * kPi);
    m.C_eta = 2.0;
    m.alpha = 2.0;
    return m;
  }

  static NoiseModel finite(std::vector<Atom1> atoms) { return NoiseModel(std::move(atoms)); }

  const std::vector<Atom1>& atoms() const { return atoms_; }
  std::size_t support_size() const { return atoms_.size(); }
  const std::string& name() const { return name_; }

  /// Law of δ = η₁ − η₂ for independent copies, atoms merged exactly.
  const std::vector<Atom1>& difference_law() const { return difference_; }

  /// c when the law is ±c with probability 1/2 each; then |E e^{iηa}| = |cos(ca)|.
  std::optional<double> symmetric_sign_scale() const { return sign_scale_; }

  /// c_η in |E e^{iηa}| ≤ exp(−c_η ‖a‖_T²), when known.
  std::optional<double> c_eta;
  /// C_η in P(1 ≤ |η₁−η₂| ≤ C_η) ≥ 1/2, when known.
  std::optional<double> C_eta;
  std::optional<double> alpha;

 private:
  explicit NoiseModel(std::vector<Atom1> atoms) : name_("finite") {
    require(!atoms.empty(), "noise law needs at least one atom");
    std::map<double, double> merged;
    double total = 0.0;
    for (const Atom1& a : atoms) {
      require(std::isfinite(a.value), "noise atom values must be finite");
      require(a.probability >= 0.0, "noise probabilities must be nonnegative");
      merged[a.value] += a.probability;
      total += a.probability;
    }
    require(std::abs(total - 1.0) <= 1e-12, "noise probabilities must sum to 1");
    for (auto [v, p] : merged)
      if (p > 0.0) atoms_.push_back({v, p});
    std::map<double, double> diff;
    for (const Atom1& x : atoms_)
      for (const Atom1& y : atoms_) diff[x.value - y.value] += x.probability * y.probability;
    for (auto [v, p] : diff) difference_.push_back({v, p});
    if (atoms_.size() == 2 && atoms_[0].value == -atoms_[1].value && atoms_[0].probability == 0.5 &&
        atoms_[1].probability == 0.5) {
      sign_scale_ = atoms_[1].value;
    }
  }

  std::vector<Atom1> atoms_;
  std::vector<Atom1> difference_;
  std::optional<double> sign_scale_;
  std::string name_;
};

/// |E exp(iηa)|.
inline double char_abs(const NoiseModel& model, double a) {
  if (a == 0.0) return 1.0;
  if (auto c = model.symmetric_sign_scale()) return std::abs(std::cos(*c * a));
  std::complex<double> s{0.0, 0.0};
  for (const Atom1& x : model.atoms()) s += x.probability * std::polar(1.0, x.value * a);
  return std::min(1.0, std::abs(s));
}

/// ‖a‖_η² = (4/π²) E‖a(η₁−η₂)‖_T².
inline double eta_norm_squared(const NoiseModel& model, double a) {
  double e = 0.0;
  for (const Atom1& d : model.difference_law()) {
    const double t = t_norm(a * d.value);
    e += d.probability * t * t;
  }
  return 4.0 / (kPi * kPi) * e;
}

/// ‖a‖_η = (2/π) (E‖a(η₁−η₂)‖_T²)^{1/2}, enumerating every pair.
inline double eta_norm(const NoiseModel& model, double a) { return std::sqrt(eta_norm_squared(model, a)); }

struct GrowthCheck {
  bool holds = true;
  double max_violation = 0.0;  ///< largest char_abs / exp(−c‖a‖_T²) − 1, clipped at 0
  double worst_a = 0.0;
};

/// Checks |E e^{iηa}| ≤ exp(−c‖a‖_T²) at every grid point.
inline GrowthCheck growth_check(const NoiseModel& model, double c, const std::vector<double>& grid) {
  require(c > 0.0, "growth constant must be positive");
  require(!grid.empty(), "growth grid must be nonempty");
  GrowthCheck out;
  for (double a : grid) {
    const double t = t_norm(a);
    const double lhs = char_abs(model, a);
    const double rhs = std::exp(-c * t * t);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-15) {
      out.holds = false;
      const double excess = lhs / rhs - 1.0;
      if (excess > out.max_violation) {
        out.max_violation = excess;
        out.worst_a = a;
      }
    }
  }
  return out;
}

struct AnticoncentrationAudit {
  bool satisfied = false;
  double C_eta_min = 0.0;
  double alpha = 0.0;
  double mass = 0.0;  ///< P(1 ≤ |η₁−η₂| ≤ C_eta_min)
  std::vector<Atom1> abs_difference_law;
};

/// Enumerates the law of |η₁−η₂|, finds the smallest C with
/// P(1 ≤ |η₁−η₂| ≤ C) ≥ 1/2, and picks α as the support point of
/// |η₁−η₂| in [1, C] with the largest mass (smallest such point on ties).
inline AnticoncentrationAudit anticoncentration_audit(const NoiseModel& model) {
  std::map<double, double> abs_law;
  for (const Atom1& d : model.difference_law()) abs_law[std::abs(d.value)] += d.probability;
  AnticoncentrationAudit out;
  for (auto [v, p] : abs_law) out.abs_difference_law.push_back({v, p});

  double mass = 0.0;
  for (auto [v, p] : abs_law) {
    if (v < 1.0) continue;
    mass += p;
    if (mass >= 0.5 - 1e-12) {
      out.satisfied = true;
      out.C_eta_min = v;
      out.mass = mass;
      break;
    }
  }
  if (!out.satisfied) return out;
  double best = -1.0;
  for (auto [v, p] : abs_law) {
    if (v < 1.0 || v > out.C_eta_min) continue;
    if (p > best) {
      best = p;
      out.alpha = v;
    }
  }
  return out;
}

struct AlphaInequalityAudit {
  bool holds = true;
  std::size_t violations = 0;
  double worst_gap = 0.0;  ///< largest ½‖αa‖_T² − E‖(η₁−η₂)a‖_T²
  double worst_a = 0.0;
};

/// Grid audit of E‖(η₁−η₂)a‖_T² ≥ ½‖αa‖_T²; violations are reported, not
/// assumed away.
inline AlphaInequalityAudit alpha_inequality_audit(const NoiseModel& model, double alpha,
                                                   const std::vector<double>& grid) {
  AlphaInequalityAudit out;
  for (double a : grid) {
    double e = 0.0;
    for (const Atom1& d : model.difference_law()) {
      const double t = t_norm(a * d.value);
      e += d.probability * t * t;
    }
    const double t = t_norm(alpha * a);
    const double gap = 0.5 * t * t - e;
    if (gap > 1e-12) {
      out.holds = false;
      ++out.violations;
      if (gap > out.worst_gap) {
        out.worst_gap = gap;
        out.worst_a = a;
      }
    }
  }
  return out;
}

/// Evenly spaced grid of `points` values on [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  require(points >= 2, "grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo + (hi - lo) * double(i) / double(points - 1);
  return g;
}

}  // namespace quasilo

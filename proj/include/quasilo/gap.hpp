// Generalized arithmetic progressions and the desk-scale GAP inverse
// pipeline: level sets of the torus sum, bad-vector removal, lattice
// rounding, the dual volume bound, GAP fitting and verification.
#pragma once

#include "quasilo/esseen.hpp"
#include "quasilo/smallball.hpp"

#include <Eigen/QR>

#include <map>
#include <optional>
#include <unordered_map>

namespace quasilo {

template <typename T>
using PointT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Coefficients = std::vector<std::int64_t>;

inline constexpr std::size_t kDefaultGapBudget = 1000000;

namespace detail {

template <typename T>
bool lex_less(const PointT<T>& a, const PointT<T>& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return a(i) < b(i);
  return false;
}

struct CoefficientHash {
  std::size_t operator()(const Coefficients& x) const {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (std::int64_t v : x) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

inline Coefficients key_of(const IVec& p) { return Coefficients(p.data(), p.data() + p.size()); }

}  // namespace detail

/// Sorted, duplicate-free copy. Integer points compare exactly; real points
/// within kMergeTolerance in ℓ∞.
template <typename T>
std::vector<PointT<T>> dedup_points(std::vector<PointT<T>> pts) {
  if (pts.empty()) return pts;
  if constexpr (std::is_floating_point_v<T>) {
    const int d = static_cast<int>(pts.front().size());
    std::vector<double> ones(pts.size(), 1.0);
    return merge_atoms(d, std::move(pts), std::move(ones), kMergeTolerance).points;
  } else {
    std::sort(pts.begin(), pts.end(), detail::lex_less<T>);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }
}

/// {Σ x_j g_j : x_j ∈ Z, |x_j| ≤ L_j}.
template <typename T>
struct BasicGap {
  using Point = PointT<T>;

  int dimension = 1;
  std::vector<Point> generators;
  std::vector<std::int64_t> bounds;

  BasicGap() = default;
  BasicGap(int d, std::vector<Point> g, std::vector<std::int64_t> L)
      : dimension(d), generators(std::move(g)), bounds(std::move(L)) {
    require(d >= 1, "GAP dimension must be positive");
    require(generators.size() == bounds.size(), "one bound per generator");
    for (const Point& p : generators) require(p.size() == d, "generator dimension mismatch");
    for (std::int64_t l : bounds) require(l >= 1, "GAP bounds must be positive integers");
  }

  std::size_t rank() const { return generators.size(); }

  /// ∏(2L_j + 1), the size of the coefficient box.
  double box_size() const {
    double s = 1.0;
    for (std::int64_t l : bounds) s *= double(2 * l + 1);
    return s;
  }

  Point point(const Coefficients& x) const {
    Point p = Point::Zero(dimension);
    for (std::size_t j = 0; j < generators.size(); ++j) p += static_cast<T>(x[j]) * generators[j];
    return p;
  }

  bool within_bounds(const Coefficients& x) const {
    for (std::size_t j = 0; j < bounds.size(); ++j)
      if (std::abs(x[j]) > bounds[j]) return false;
    return true;
  }

  /// Visits every coefficient vector of the box in odometer order.
  template <typename Fn>
  void for_each_coefficient(Fn&& fn) const {
    Coefficients x(bounds.size());
    for (std::size_t j = 0; j < bounds.size(); ++j) x[j] = -bounds[j];
    while (true) {
      fn(static_cast<const Coefficients&>(x));
      std::size_t j = 0;
      while (j < x.size() && x[j] == bounds[j]) {
        x[j] = -bounds[j];
        ++j;
      }
      if (j == x.size()) return;
      ++x[j];
    }
  }

  BasicGap<double> scaled(double factor) const {
    std::vector<Vec> g;
    for (const Point& p : generators) g.push_back(p.template cast<double>() * factor);
    return BasicGap<double>(dimension, std::move(g), bounds);
  }
};

using IntGap = BasicGap<std::int64_t>;
using RealGap = BasicGap<double>;

template <typename T>
void require_enumerable(const BasicGap<T>& gap, std::size_t budget) {
  if (gap.box_size() > double(budget))
    throw BudgetError("GAP box has " + std::to_string(gap.box_size()) + " coefficient vectors, over budget");
}

/// Every point of the GAP, deduplicated.
template <typename T>
std::vector<PointT<T>> enumerate_gap(const BasicGap<T>& gap, std::size_t budget = kDefaultGapBudget) {
  require_enumerable(gap, budget);
  std::vector<PointT<T>> pts;
  pts.reserve(static_cast<std::size_t>(gap.box_size()));
  gap.for_each_coefficient([&](const Coefficients& x) { pts.push_back(gap.point(x)); });
  return dedup_points<T>(std::move(pts));
}

/// Injectivity of x ↦ Σ x_j g_j on the coefficient box.
template <typename T>
bool is_proper(const BasicGap<T>& gap, std::size_t budget = kDefaultGapBudget) {
  return double(enumerate_gap(gap, budget).size()) == gap.box_size();
}

// ---------------------------------------------------------------------------
// Integer coefficient witnesses.

namespace detail {

/// Greedy maximal linearly independent prefix-ordered subset.
template <typename T>
std::vector<std::size_t> independent_subset(const std::vector<PointT<T>>& g, int d) {
  std::vector<std::size_t> chosen;
  Eigen::MatrixXd B(d, 0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    Eigen::MatrixXd C(d, B.cols() + 1);
    C << B, g[j].template cast<double>();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
    lu.setThreshold(1e-10);
    if (lu.rank() == C.cols()) {
      B = C;
      chosen.push_back(j);
    }
    if (static_cast<int>(chosen.size()) == d) break;
  }
  return chosen;
}

inline constexpr double kMaxExtraAssignments = 4e6;

}  // namespace detail

/// Integer x with Σ x_j g_j = target, found by solving exactly on a maximal
/// independent subset of generators while the remaining ones range over
/// [−r, r] (r = min(extra_radius, L_j) when bounds are given). Among all
/// solutions found, returns the one with the smallest max |x_j|, then the
/// smallest Σ|x_j|. Real targets are matched within kMergeTolerance.
template <typename T>
std::optional<Coefficients> solve_coefficients(const std::vector<PointT<T>>& g, const PointT<T>& target, int d,
                                               const std::vector<std::int64_t>* bounds = nullptr,
                                               std::int64_t extra_radius = 10) {
  const std::vector<std::size_t> base = detail::independent_subset<T>(g, d);
  std::vector<std::size_t> extra;
  {
    std::vector<bool> in(g.size(), false);
    for (std::size_t j : base) in[j] = true;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (!in[j]) extra.push_back(j);
  }
  std::vector<std::int64_t> radius(extra.size());
  double combos = 1.0;
  for (std::size_t e = 0; e < extra.size(); ++e) {
    radius[e] = extra_radius;
    if (bounds) radius[e] = std::min(radius[e], (*bounds)[extra[e]]);
    combos *= double(2 * radius[e] + 1);
  }
  if (combos > detail::kMaxExtraAssignments) throw BudgetError("coefficient search over budget");

  Eigen::MatrixXd B(d, static_cast<Eigen::Index>(base.size()));
  for (std::size_t c = 0; c < base.size(); ++c) B.col(static_cast<Eigen::Index>(c)) = g[base[c]].template cast<double>();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  const double tol = kMergeTolerance * std::max(1.0, double(target.template cast<double>().cwiseAbs().maxCoeff()));

  std::optional<Coefficients> best;
  std::int64_t best_max = 0, best_sum = 0;
  std::vector<std::int64_t> ex(extra.size());
  for (std::size_t e = 0; e < extra.size(); ++e) ex[e] = -radius[e];
  while (true) {
    PointT<T> rhs = target;
    for (std::size_t e = 0; e < extra.size(); ++e) rhs -= static_cast<T>(ex[e]) * g[extra[e]];
    Coefficients x(g.size(), 0);
    for (std::size_t e = 0; e < extra.size(); ++e) x[extra[e]] = ex[e];
    bool ok = true;
    if (!base.empty()) {
      const Vec y = qr.solve(rhs.template cast<double>());
      for (std::size_t c = 0; c < base.size(); ++c) {
        if (!std::isfinite(y(static_cast<Eigen::Index>(c))) || std::abs(y(static_cast<Eigen::Index>(c))) > 9e15) {
          ok = false;
          break;
        }
        x[base[c]] = static_cast<std::int64_t>(std::llround(y(static_cast<Eigen::Index>(c))));
      }
    }
    if (ok) {
      PointT<T> back = PointT<T>::Zero(d);
      for (std::size_t j = 0; j < g.size(); ++j) back += static_cast<T>(x[j]) * g[j];
      if constexpr (std::is_floating_point_v<T>) {
        ok = (back - target).cwiseAbs().maxCoeff() <= tol;
      } else {
        ok = back == target;
      }
    }
    if (ok && bounds) {
      for (std::size_t j = 0; j < g.size() && ok; ++j) ok = std::abs(x[j]) <= (*bounds)[j];
    }
    if (ok) {
      std::int64_t mx = 0, sm = 0;
      for (std::int64_t v : x) {
        mx = std::max<std::int64_t>(mx, std::abs(v));
        sm += std::abs(v);
      }
      if (!best || mx < best_max || (mx == best_max && sm < best_sum)) {
        best = x;
        best_max = mx;
        best_sum = sm;
      }
    }
    std::size_t e = 0;
    while (e < ex.size() && ex[e] == radius[e]) {
      ex[e] = -radius[e];
      ++e;
    }
    if (e == ex.size()) break;
    ++ex[e];
  }
  return best;
}

/// Integer witness x with |x_j| ≤ L_j and Σ x_j g_j = target. Uses the full
/// table when the box is within budget (complete); otherwise the bounded
/// solver, which is complete for independent generators.
template <typename T>
class GapMembership {
 public:
  GapMembership(const BasicGap<T>& gap, std::size_t budget = kDefaultGapBudget) : gap_(gap) {
    if constexpr (!std::is_floating_point_v<T>) {
      if (gap.box_size() <= double(budget)) {
        indexed_ = true;
        gap.for_each_coefficient([&](const Coefficients& x) {
          table_.emplace(detail::key_of(gap.point(x)), x);
        });
      }
    }
  }

  bool indexed() const { return indexed_; }

  std::optional<Coefficients> witness(const PointT<T>& target) const {
    if constexpr (!std::is_floating_point_v<T>) {
      if (indexed_) {
        auto it = table_.find(detail::key_of(target));
        if (it == table_.end()) return std::nullopt;
        return it->second;
      }
    }
    return solve_coefficients<T>(gap_.generators, target, gap_.dimension, &gap_.bounds);
  }

 private:
  const BasicGap<T>& gap_;
  bool indexed_ = false;
  std::unordered_map<Coefficients, Coefficients, detail::CoefficientHash> table_;
};

template <typename T>
std::optional<Coefficients> find_coefficients(const BasicGap<T>& gap, const PointT<T>& target,
                                              std::size_t budget = kDefaultGapBudget) {
  return GapMembership<T>(gap, budget).witness(target);
}

// ---------------------------------------------------------------------------
// Sumsets.

template <typename T>
std::vector<PointT<T>> minkowski_sum(const std::vector<PointT<T>>& a, const std::vector<PointT<T>>& b,
                                     std::size_t budget = kDefaultGapBudget) {
  if (double(a.size()) * double(b.size()) > double(budget)) throw BudgetError("Minkowski sum over budget");
  std::vector<PointT<T>> out;
  out.reserve(a.size() * b.size());
  for (const auto& x : a)
    for (const auto& y : b) out.push_back(x + y);
  return dedup_points<T>(std::move(out));
}

/// kF by k−1 successive Minkowski additions with deduplication.
template <typename T>
std::vector<PointT<T>> kfold_sumset(const std::vector<PointT<T>>& points, int k,
                                    std::size_t budget = kDefaultGapBudget) {
  require(k >= 1, "k must be a positive integer");
  require(!points.empty(), "sumset of an empty set");
  const std::vector<PointT<T>> base = dedup_points<T>(points);
  std::vector<PointT<T>> acc = base;
  for (int i = 1; i < k; ++i) acc = minkowski_sum<T>(acc, base, budget);
  return acc;
}

/// αF = {αx : x ∈ F}.
template <typename T>
std::vector<Vec> dilate(const std::vector<PointT<T>>& points, double alpha) {
  std::vector<Vec> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.template cast<double>() * alpha);
  return out;
}

/// |kX| / |X|.
template <typename T>
double doubling_ratio(const std::vector<PointT<T>>& points, int k, std::size_t budget = kDefaultGapBudget) {
  const double base = double(dedup_points<T>(points).size());
  return double(kfold_sumset<T>(points, k, budget).size()) / base;
}

// ---------------------------------------------------------------------------
// Level sets of the torus sum.

struct LevelSetResult {
  bool found = false;  ///< some m ≤ M met the size target
  int m = 0;
  double M = 0.0;
  int N = 0;
  double alpha = 0.0;
  double size_target = 0.0;        ///< (N/(2√d κ))^d ρ, 0 without ρ
  std::vector<Vec> S;              ///< grid points with Σ‖α⟨v,s⟩‖_T² ≤ 16m
  double average_statistic = 0.0;  ///< mean over S of Σ‖α⟨v,s⟩‖_T²
  double average_eta = 0.0;        ///< mean over S of Σ‖⟨v,s⟩‖_η²
  Vec eta_argmin;                  ///< grid point minimizing Σ‖⟨v,s⟩‖_η²
  double eta_min = 0.0;
  std::size_t grid_size = 0;
};

/// M = max(1, ⌊10 √(d log(κ n^A))⌋), 1 when κ n^A ≤ 1.
inline double level_set_M(int d, double kappa, double n, double A) {
  const double l = std::log(kappa) + A * std::log(n);
  if (!(l > 0.0)) return 1.0;
  return std::max(1.0, std::floor(10.0 * std::sqrt(double(d) * l)));
}

/// Scans s = j/N, |j_i| ≤ 2N, over the (4N+1)^d grid.
inline LevelSetResult level_set_search(const std::vector<Vec>& VR, const NoiseModel& model, int d, double A,
                                       int N, std::size_t grid_budget, double kappa, double alpha,
                                       std::optional<double> rho = std::nullopt) {
  require(N >= 1, "grid parameter N must be positive");
  require(A > 0.0, "A must be positive");
  require(kappa > 0.0, "kappa must be positive");
  require(alpha > 0.0, "alpha must be positive");
  for (const Vec& v : VR) require(v.size() == d, "vector dimension mismatch");
  const double side = double(4 * N + 1);
  if (std::pow(side, d) > double(grid_budget)) throw BudgetError("level-set grid over budget");
  const std::size_t total = static_cast<std::size_t>(std::pow(side, d) + 0.5);

  auto grid_point = [&](std::size_t idx) {
    Vec s(d);
    for (int i = 0; i < d; ++i) {
      s(i) = double(static_cast<std::int64_t>(idx % (4 * N + 1)) - 2 * N) / double(N);
      idx /= (4 * N + 1);
    }
    return s;
  };
  std::vector<double> torus(total), eta(total);
  const std::size_t blocks = (total + 1023) / 1024;
  parallel_blocks(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(total, (b + 1) * 1024);
    for (std::size_t i = b * 1024; i < end; ++i) {
      const Vec s = grid_point(i);
      double t = 0.0, e = 0.0;
      for (const Vec& v : VR) {
        const double a = v.dot(s);
        const double tn = t_norm(alpha * a);
        t += tn * tn;
        e += eta_norm_squared(model, a);
      }
      torus[i] = t;
      eta[i] = e;
    }
  });

  LevelSetResult out;
  out.N = N;
  out.alpha = alpha;
  out.grid_size = total;
  out.M = level_set_M(d, kappa, double(std::max<std::size_t>(VR.size(), 1)), A);
  if (rho) out.size_target = std::pow(double(N) / (2.0 * std::sqrt(double(d)) * kappa), d) * *rho;
  std::size_t best = 0;
  for (std::size_t i = 1; i < total; ++i)
    if (eta[i] < eta[best]) best = i;
  out.eta_argmin = grid_point(best);
  out.eta_min = eta[best];

  const int max_m = static_cast<int>(out.M);
  std::vector<std::size_t> members;
  for (int m = 1; m <= max_m; ++m) {
    members.clear();
    for (std::size_t i = 0; i < total; ++i)
      if (torus[i] <= 16.0 * m) members.push_back(i);
    out.m = m;
    if (!members.empty() && double(members.size()) >= out.size_target) {
      out.found = true;
      break;
    }
  }
  double st = 0.0, se = 0.0;
  for (std::size_t i : members) {
    out.S.push_back(grid_point(i));
    st += torus[i];
    se += eta[i];
  }
  if (!members.empty()) {
    out.average_statistic = st / double(members.size());
    out.average_eta = se / double(members.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bad vectors, k, rounding, dual volume.

struct BadVectorSplit {
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
  std::vector<double> scores;  ///< (1/|S|) Σ_s ‖α⟨v,s⟩‖_T² per vector
  double threshold = 0.0;      ///< 8π²m / n'
  bool markov_applies = false; ///< Σ_v score ≤ 8π²m
  bool markov_holds = true;    ///< |bad| ≤ n' whenever markov_applies
};

inline BadVectorSplit bad_vector_split(const std::vector<Vec>& VR, const std::vector<Vec>& S, int m, double n_prime,
                                       double alpha) {
  require(!S.empty(), "level set S is empty");
  require(m >= 1 && n_prime > 0.0, "need m ≥ 1 and n' > 0");
  BadVectorSplit out;
  out.threshold = 8.0 * kPi * kPi * m / n_prime;
  double total = 0.0;
  for (std::size_t j = 0; j < VR.size(); ++j) {
    double acc = 0.0;
    for (const Vec& s : S) {
      const double t = t_norm(alpha * VR[j].dot(s));
      acc += t * t;
    }
    const double score = acc / double(S.size());
    out.scores.push_back(score);
    total += score;
    (score >= out.threshold ? out.bad : out.good).push_back(j);
  }
  out.markov_applies = total <= 8.0 * kPi * kPi * m;
  if (out.markov_applies) out.markov_holds = double(out.bad.size()) <= n_prime;
  return out;
}

struct KChoice {
  int k = 1;
  double raw = 0.0;    ///< √(n'/(64π²m)) before flooring
  double lower = 0.0;  ///< √(n'/(640π² √(d log(n^A κ))))
  double upper = 0.0;  ///< √n'
};

inline KChoice choose_k(double n_prime, int m, int d = 1, double A = 1.0, double kappa = 1.0, double n = 0.0) {
  require(n_prime >= 1.0 && m >= 1, "choose_k needs n' ≥ 1 and m ≥ 1");
  KChoice out;
  out.raw = std::sqrt(n_prime / (64.0 * kPi * kPi * m));
  out.k = std::max(1, static_cast<int>(std::floor(out.raw)));
  out.upper = std::sqrt(n_prime);
  const double l = std::log(std::pow(n > 0.0 ? n : n_prime, A) * kappa);
  out.lower = l > 0.0 ? std::sqrt(n_prime / (640.0 * kPi * kPi * std::sqrt(double(d) * l))) : 0.0;
  return out;
}

struct DualVolumeCheck {
  double lhs_volume = 0.0;  ///< outer cell count × cell volume
  double rhs = 0.0;
  bool holds = false;
  double radius = 0.0;  ///< 1/(256dα)
  double cell_side = 0.0;
  std::size_t cells = 0;
  std::size_t sumset_size = 0;
};

/// Outer measure of k(V' ∪ {0}) + B_∞(0, r), r = 1/(256dα), by counting
/// cells of side r/cells_per_radius whose interior meets the union, against
/// 36π² (2√d κ/α)^d / ρ.
inline DualVolumeCheck dual_volume_check(const std::vector<Vec>& V_good, int d, int k, double alpha, double kappa,
                                         double rho, int cells_per_radius = 4,
                                         std::size_t budget = kDefaultGapBudget) {
  require(d >= 1 && d <= 2, "dual volume check supports d ≤ 2");
  require(k >= 1 && alpha > 0.0 && kappa > 0.0 && rho > 0.0 && cells_per_radius >= 1,
          "dual volume check: bad arguments");
  std::vector<Vec> base = V_good;
  base.push_back(Vec::Zero(d));
  const std::vector<Vec> sum = kfold_sumset<double>(base, k, budget);
  DualVolumeCheck out;
  out.radius = 1.0 / (256.0 * d * alpha);
  out.cell_side = out.radius / cells_per_radius;
  out.sumset_size = sum.size();
  const double per_point = std::pow(2.0 * cells_per_radius + 1.0, d);
  if (per_point * double(sum.size()) > double(budget) * 16.0) throw BudgetError("dual volume cell count over budget");
  std::vector<std::pair<std::int64_t, std::int64_t>> cells;
  for (const Vec& p : sum) {
    std::int64_t lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int i = 0; i < d; ++i) {
      const double x = p(i) / out.cell_side;
      lo[i] = static_cast<std::int64_t>(std::floor(x - cells_per_radius));
      hi[i] = static_cast<std::int64_t>(std::ceil(x + cells_per_radius)) - 1;
    }
    for (std::int64_t a = lo[0]; a <= hi[0]; ++a)
      for (std::int64_t b = lo[1]; b <= hi[1]; ++b) cells.emplace_back(a, b);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  out.cells = cells.size();
  out.lhs_volume = double(cells.size()) * std::pow(out.cell_side, d);
  out.rhs = 36.0 * kPi * kPi * std::pow(2.0 * std::sqrt(double(d)) * kappa / alpha, d) / rho;
  out.holds = out.lhs_volume <= out.rhs;
  return out;
}

struct LatticeRounding {
  std::vector<IVec> z;            ///< one per input vector
  std::vector<bool> zero_shortcut;
  std::vector<double> errors;     ///< ‖v' − z/(Dk)‖_∞
  std::vector<IVec> F;            ///< distinct z
  std::vector<std::size_t> assignment;  ///< index into F per input vector
};

/// z = round(Dk·v') with ties to even; z = 0 when ‖v'‖_∞ ≤ 1/(Dk).
inline LatticeRounding round_to_lattice(const std::vector<Vec>& V_good, double D, int k) {
  require(D * k > 0.0, "D·k must be positive");
  const double Dk = D * k;
  LatticeRounding out;
  for (const Vec& v : V_good) {
    IVec z = IVec::Zero(v.size());
    const bool shortcut = linf(v) <= 1.0 / Dk;
    if (!shortcut)
      for (Eigen::Index i = 0; i < v.size(); ++i) z(i) = static_cast<std::int64_t>(std::nearbyint(Dk * v(i)));
    out.z.push_back(z);
    out.zero_shortcut.push_back(shortcut);
    out.errors.push_back(linf(v - z.cast<double>() / Dk));
  }
  out.F = dedup_points<std::int64_t>(out.z);
  for (const IVec& z : out.z) {
    auto it = std::lower_bound(out.F.begin(), out.F.end(), z, detail::lex_less<std::int64_t>);
    out.assignment.push_back(static_cast<std::size_t>(it - out.F.begin()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// GAP fitting.

struct GapFit {
  IntGap gap;
  std::string method;  ///< "greedy" or "box_fallback"
  std::vector<IVec> target;  ///< F + {−1,1}^d
  std::vector<Coefficients> witnesses;  ///< one per target point
  bool containment_verified = false;
  double box_fallback_size = 0.0;
};

namespace detail {

inline std::vector<IVec> plus_cube(const std::vector<IVec>& F, int d) {
  std::vector<IVec> out;
  for (const IVec& z : F)
    for (std::uint64_t mask = 0; mask < (1ULL << d); ++mask) {
      IVec p = z;
      for (int i = 0; i < d; ++i) p(i) += (mask >> i) & 1 ? 1 : -1;
      out.push_back(p);
    }
  return dedup_points<std::int64_t>(std::move(out));
}

inline IVec sign_normalized(IVec g) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g(i) == 0) continue;
    if (g(i) < 0) g = -g;
    break;
  }
  return g;
}

struct Coverage {
  std::size_t covered = 0;
  std::vector<std::int64_t> bounds;
  std::vector<Coefficients> witnesses;  ///< empty entries for uncovered points
};

inline Coverage coverage(const std::vector<IVec>& gens, const std::vector<IVec>& target, int d) {
  Coverage c;
  c.bounds.assign(gens.size(), 1);
  for (const IVec& t : target) {
    auto x = solve_coefficients<std::int64_t>(gens, t, d);
    if (x) {
      ++c.covered;
      for (std::size_t j = 0; j < gens.size(); ++j) c.bounds[j] = std::max<std::int64_t>(c.bounds[j], std::abs((*x)[j]));
      c.witnesses.push_back(*x);
    } else {
      c.witnesses.emplace_back();
    }
  }
  return c;
}

inline double log_box(const std::vector<std::int64_t>& L) {
  double s = 0.0;
  for (std::int64_t l : L) s += std::log(double(2 * l + 1));
  return s;
}

}  // namespace detail

inline constexpr std::size_t kGapPoolCap = 48;

/// Smallest GAP found containing F + {−1,1}^d: a greedy search over
/// generators drawn from unit vectors, F and differences of F (scored by
/// covered points per coefficient-box size), against the coordinate box.
inline GapFit fit_gap(const std::vector<IVec>& F_in, int r_max, std::size_t size_budget = kDefaultGapBudget) {
  require(!F_in.empty(), "fit_gap needs a nonempty set");
  const int d = static_cast<int>(F_in.front().size());
  require(d >= 1 && d <= 16, "fit_gap supports 1 ≤ d ≤ 16");
  require(r_max >= 1, "r_max must be positive");
  for (const IVec& z : F_in) require(z.size() == d, "point dimension mismatch");
  const std::vector<IVec> F = dedup_points<std::int64_t>(F_in);
  if (double(F.size()) * double(1ULL << d) > double(size_budget)) throw BudgetError("fit_gap target over budget");
  const std::vector<IVec> target = detail::plus_cube(F, d);

  // Box fallback.
  std::vector<IVec> unit;
  std::vector<std::int64_t> box_bounds(d, 1);
  for (int i = 0; i < d; ++i) {
    unit.push_back(IVec::Unit(d, i));
    for (const IVec& t : target) box_bounds[i] = std::max<std::int64_t>(box_bounds[i], std::abs(t(i)));
  }
  GapFit out;
  out.gap = IntGap(d, unit, box_bounds);
  out.method = "box_fallback";
  out.box_fallback_size = out.gap.box_size();
  double best_log = detail::log_box(box_bounds);

  // Generator pool.
  std::vector<IVec> pool = unit;
  for (const IVec& z : F)
    if (z.cwiseAbs().maxCoeff() > 0) pool.push_back(detail::sign_normalized(z));
  for (std::size_t i = 0; i < F.size(); ++i)
    for (std::size_t j = i + 1; j < F.size(); ++j) pool.push_back(detail::sign_normalized(F[j] - F[i]));
  pool = dedup_points<std::int64_t>(std::move(pool));
  std::stable_sort(pool.begin(), pool.end(), [](const IVec& a, const IVec& b) {
    const auto na = a.cwiseAbs().maxCoeff(), nb = b.cwiseAbs().maxCoeff();
    if (na != nb) return na < nb;
    return detail::lex_less<std::int64_t>(a, b);
  });
  if (pool.size() > kGapPoolCap) pool.resize(kGapPoolCap);

  std::vector<IVec> current;
  std::vector<bool> used(pool.size(), false);
  for (int r = 1; r <= r_max && r <= static_cast<int>(pool.size()); ++r) {
    std::optional<std::size_t> pick;
    double pick_score = -std::numeric_limits<double>::infinity();
    detail::Coverage pick_cov;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      std::vector<IVec> gens = current;
      gens.push_back(pool[c]);
      detail::Coverage cov;
      try {
        cov = detail::coverage(gens, target, d);
      } catch (const BudgetError&) {
        continue;
      }
      if (cov.covered == 0) continue;
      const double score = std::log(double(cov.covered)) - detail::log_box(cov.bounds);
      if (score > pick_score) {
        pick_score = score;
        pick = c;
        pick_cov = std::move(cov);
      }
    }
    if (!pick) {
      // Nothing covers a point yet; take the shortest unused generator.
      for (std::size_t c = 0; c < pool.size() && !pick; ++c)
        if (!used[c]) pick = c;
      if (!pick) break;
      used[*pick] = true;
      current.push_back(pool[*pick]);
      continue;
    }
    used[*pick] = true;
    current.push_back(pool[*pick]);
    if (pick_cov.covered == target.size()) {
      const double lb = detail::log_box(pick_cov.bounds);
      if (lb < best_log - 1e-12) {
        best_log = lb;
        out.gap = IntGap(d, current, pick_cov.bounds);
        out.method = "greedy";
      }
    }
  }

  // Containment: an integer witness within bounds for every target point.
  const GapMembership<std::int64_t> member(out.gap, size_budget);
  out.target = target;
  out.containment_verified = true;
  for (const IVec& t : target) {
    auto x = member.witness(t);
    if (!x) {
      out.containment_verified = false;
      out.witnesses.emplace_back();
    } else {
      out.witnesses.push_back(*x);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification of the four conclusions and the pipeline.

/// Unpinned absolute constants, each defaulting to 1.
struct ConstantsConfig {
  double C = 1.0;        ///< rank, Part 3
  double C_Ade = 1.0;    ///< C(A, d, ε): cardinality, Part 4
  double C_eta = 1.0;    ///< C(η): Part 2
};

struct Inequality {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct StageRecord {
  std::string name;
  bool completed = false;
  std::vector<Inequality> checks;
  std::map<std::string, double> constants;
  std::string note;

  bool holds() const {
    return completed && std::all_of(checks.begin(), checks.end(), [](const Inequality& c) { return c.holds; });
  }
};

struct Part3Witness {
  IVec vertex;           ///< s·u for u ∈ {−1,1}^d
  Coefficients coefficients;
};

struct GapVerification {
  StageRecord part1, part2, part3, part4;
  std::vector<double> part2_distances;  ///< per kept vector, original order
  std::vector<Part3Witness> part3_witnesses;
  std::int64_t part3_multiplier = 0;    ///< largest s with s·{−1,1}^d ⊆ Q'
};

struct GapVerificationInput {
  const VectorSystem* system = nullptr;
  double A = 1.0;
  double epsilon = 0.5;
  double n_prime = 1.0;
  double rho = 0.0;
  double alpha = 1.0;
  double D = 1.0;
  int k = 1;
  const IntGap* Q_prime = nullptr;
  const LatticeRounding* rounding = nullptr;
  const std::vector<std::size_t>* kept = nullptr;  ///< indices of non-discarded vectors
  ConstantsConfig constants;
  std::size_t budget = kDefaultGapBudget;
};

inline constexpr std::int64_t kPart3ScanLimit = 200000;

inline GapVerification verify_thm_gap(const GapVerificationInput& in) {
  require(in.system && in.Q_prime && in.rounding && in.kept, "verify_thm_gap: missing inputs");
  const VectorSystem& sys = *in.system;
  const IntGap& Qp = *in.Q_prime;
  const int d = sys.dimension();
  const double n = double(sys.size());
  const double Dk = in.D * in.k;
  const double scale = sys.R / Dk;
  const double omega_inf = omega(sys.body, std::numeric_limits<double>::infinity());
  const bool enumerable = Qp.box_size() <= double(in.budget);
  GapVerification out;

  // Part 1.
  {
    StageRecord& r = out.part1;
    r.name = "part1_rank_cardinality";
    const double rank = double(Qp.rank());
    const double card = enumerable ? double(enumerate_gap(Qp, in.budget).size()) : Qp.box_size();
    const double rank_rhs = in.constants.C * (d + in.A / in.epsilon);
    const double card_rhs = in.constants.C_Ade * std::pow(in.n_prime, (d - rank) / 2.0) / in.rho;
    r.checks.push_back({"rank", rank, rank_rhs, rank <= rank_rhs});
    r.checks.push_back({"cardinality", card, card_rhs, card <= card_rhs});
    r.constants = {{"C", in.constants.C}, {"C_Ade", in.constants.C_Ade}};
    r.note = enumerable ? "cardinality by enumeration; proper means injective coefficient map"
                        : "cardinality is the coefficient-box size; proper means injective coefficient map";
    r.completed = true;
  }

  // Part 2.
  {
    StageRecord& r = out.part2;
    r.name = "part2_approximation";
    const double bound = in.constants.C_eta * omega_inf * sys.R / (d * in.k);
    const GapMembership<std::int64_t> member(Qp, in.budget);
    std::vector<Vec> Qpts;
    if (enumerable) {
      for (const IVec& q : enumerate_gap(Qp, in.budget)) Qpts.push_back(q.cast<double>() * scale);
    }
    std::size_t within = 0;
    double worst = 0.0;
    for (std::size_t pos = 0; pos < in.kept->size(); ++pos) {
      const Vec& v = sys.vectors[(*in.kept)[pos]];
      double dist = std::numeric_limits<double>::infinity();
      if (enumerable) {
        dist = dist_to_set(sys.body, v, Qpts);
      } else {
        const IVec& z = in.rounding->z[pos];
        std::vector<IVec> tries{z};
        for (const IVec& t : detail::plus_cube({z}, d)) tries.push_back(t);
        for (const IVec& t : tries)
          if (member.witness(t)) dist = std::min(dist, sys.body.norm(v - t.cast<double>() * scale));
      }
      out.part2_distances.push_back(dist);
      worst = std::max(worst, dist);
      if (dist <= bound * (1.0 + kBoundaryTolerance)) ++within;
    }
    r.checks.push_back({"count_within", double(within), n - in.n_prime, double(within) >= n - in.n_prime});
    r.checks.push_back({"max_distance", worst, bound, worst <= bound * (1.0 + kBoundaryTolerance)});
    r.constants = {{"C_eta", in.constants.C_eta},
                   {"omega_inf", omega_inf},
                   {"effective_C_eta", worst * d * in.k / (omega_inf * sys.R)}};
    r.note = enumerable ? "exact distance over the enumerated Q" : "distance to a witnessed point of Q (upper bound)";
    r.completed = true;
  }

  // Part 3: {−1,1}^d ⊆ (C'k/R) Q  ⟺  (D/C') u ∈ Q' for every sign vector u.
  {
    StageRecord& r = out.part3;
    r.name = "part3_full_dimension";
    const GapMembership<std::int64_t> member(Qp, in.budget);
    std::int64_t reach = 0;
    for (std::size_t j = 0; j < Qp.rank(); ++j) reach += Qp.bounds[j] * Qp.generators[j].cwiseAbs().maxCoeff();
    const std::int64_t lowest = std::max<std::int64_t>(1, reach - kPart3ScanLimit);
    for (std::int64_t s = reach; s >= lowest && out.part3_multiplier == 0; --s) {
      std::vector<Part3Witness> ws;
      bool all = true;
      for (std::uint64_t mask = 0; mask < (1ULL << d) && all; ++mask) {
        IVec u(d);
        for (int i = 0; i < d; ++i) u(i) = (mask >> i) & 1 ? s : -s;
        auto x = member.witness(u);
        if (!x) all = false;
        else ws.push_back({u, *x});
      }
      if (all) {
        out.part3_multiplier = s;
        out.part3_witnesses = std::move(ws);
      }
    }
    const double Cprime = out.part3_multiplier > 0 ? in.D / double(out.part3_multiplier)
                                                   : std::numeric_limits<double>::infinity();
    const double rhs = in.constants.C * d * in.alpha;
    r.checks.push_back({"C_prime", Cprime, rhs, Cprime <= rhs});
    r.constants = {{"C", in.constants.C}, {"alpha", in.alpha}, {"multiplier", double(out.part3_multiplier)}};
    r.note = out.part3_multiplier > 0 ? "every vertex has an integer coefficient witness"
                                      : "no multiplier with integer witnesses found";
    r.completed = true;
  }

  // Part 4, in the form the proof establishes: generators of Q' against
  // C_K^{k+1} (Dk/R · max‖v‖_K + ω_∞).
  {
    StageRecord& r = out.part4;
    r.name = "part4_generator_norms";
    double gmax = 0.0;
    for (const IVec& g : Qp.generators) gmax = std::max(gmax, sys.body.norm(g.cast<double>()));
    double vmax = 0.0;
    for (const Vec& v : sys.vectors) vmax = std::max(vmax, sys.body.norm(v));
    const double CK = sys.body.quasi_constant();
    const double growth = std::pow(CK, in.k + 1);
    const double rhs = in.constants.C_Ade * growth * (Dk / sys.R * vmax + omega_inf);
    r.checks.push_back({"max_generator_norm", gmax, rhs, gmax <= rhs});
    const double gmax_q = gmax * scale;
    const double rhs_stmt = in.constants.C_Ade * growth * (d * in.alpha * in.k / sys.R * vmax + omega_inf);
    r.checks.push_back({"max_generator_norm_of_Q", gmax_q, rhs_stmt, gmax_q <= rhs_stmt});
    r.constants = {{"C_Ade", in.constants.C_Ade}, {"C_K", CK}, {"omega_inf", omega_inf}};
    r.note = "first check: generators of Q' with the Dk/R factor; second: generators of Q with the dαk/R factor";
    r.completed = true;
  }
  return out;
}

struct GapPipelineOptions {
  int N = 32;
  std::size_t grid_budget = 1000000;
  std::size_t enumeration_budget = kDefaultGapBudget;
  int r_max = 0;  ///< 0 selects d + 2
  int cells_per_radius = 4;
  std::size_t samples = 100000;  ///< for body constants without a closed form
  std::optional<double> rho;     ///< supplied ρ; computed exactly otherwise
  ConstantsConfig constants;
};

struct GapPipelineReport {
  double n_prime = 0.0;
  double A = 0.0;
  double epsilon = 0.0;
  double rho = 0.0;
  std::string rho_certificate;
  BodyConstants body_constants;
  double alpha = 0.0;
  double D = 0.0;
  int k = 1;
  KChoice k_choice;
  LevelSetResult level_set;
  BadVectorSplit split;
  LatticeRounding rounding;
  std::optional<DualVolumeCheck> dual_volume;
  GapFit fit;
  RealGap Q;
  GapVerification verification;
  ConstantsConfig constants;
  std::vector<StageRecord> stages;
};

/// level_set_search → bad_vector_split → choose_k → round_to_lattice
/// (D = 512dα) → dual_volume_check → fit_gap → Q = (R/(Dk))Q' → verify.
/// Failed existence claims are recorded in the stage records.
inline GapPipelineReport thm_gap_pipeline(const VectorSystem& system, const NoiseModel& model, double A,
                                          double epsilon, double n_prime, const GapPipelineOptions& opt,
                                          std::uint64_t seed) {
  require(!system.vectors.empty(), "pipeline needs at least one vector");
  require(A > 0.0, "A must be positive");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  const int d = system.dimension();
  require(d <= 2, "grid stages support d ≤ 2");
  const double n = double(system.size());
  require(n_prime >= 1.0 && n_prime <= n, "n' must lie in [1, n]");

  GapPipelineReport rep;
  rep.n_prime = n_prime;
  rep.A = A;
  rep.epsilon = epsilon;
  rep.constants = opt.constants;

  if (auto ref = reference_constants(system.body)) rep.body_constants = *ref;
  else rep.body_constants = estimate_constants(system.body, opt.samples, seed);
  const double kappa = rep.body_constants.kappa;

  {
    StageRecord r;
    r.name = "precondition_rho";
    if (opt.rho) {
      rep.rho = *opt.rho;
      rep.rho_certificate = "supplied";
    } else {
      const SmallBallResult sb = rho_exact(system, model);
      rep.rho = sb.rho;
      rep.rho_certificate = to_string(sb.certificate);
    }
    const double floor_value = std::pow(n, -A);
    r.checks.push_back({"rho_at_least_n_pow_minus_A", rep.rho, floor_value, rep.rho >= floor_value});
    r.note = "rho " + rep.rho_certificate;
    r.completed = true;
    rep.stages.push_back(r);
  }

  const AnticoncentrationAudit audit = anticoncentration_audit(model);
  require(model.alpha || audit.satisfied, "noise law fails P(1 ≤ |η₁−η₂| ≤ C) ≥ 1/2 for every C");
  rep.alpha = model.alpha ? *model.alpha : audit.alpha;
  rep.D = 512.0 * d * rep.alpha;

  const std::vector<Vec> VR = system.rescaled();
  rep.level_set = level_set_search(VR, model, d, A, opt.N, opt.grid_budget, kappa, rep.alpha, rep.rho);
  {
    StageRecord r;
    r.name = "level_set_search";
    r.checks.push_back({"average_statistic", rep.level_set.average_statistic, 8.0 * kPi * kPi * rep.level_set.m,
                        rep.level_set.average_statistic <= 8.0 * kPi * kPi * rep.level_set.m});
    r.checks.push_back({"size", double(rep.level_set.S.size()), rep.level_set.size_target,
                        double(rep.level_set.S.size()) >= rep.level_set.size_target});
    r.constants = {{"m", double(rep.level_set.m)}, {"M", rep.level_set.M}, {"N", double(opt.N)},
                   {"alpha", rep.alpha}};
    r.note = rep.level_set.found ? "size target met" : "no m ≤ M met the size target; continuing with m = M";
    r.completed = true;
    rep.stages.push_back(r);
  }

  rep.split = bad_vector_split(VR, rep.level_set.S, rep.level_set.m, n_prime, rep.alpha);
  {
    StageRecord r;
    r.name = "bad_vector_split";
    r.checks.push_back({"bad_count", double(rep.split.bad.size()), n_prime, double(rep.split.bad.size()) <= n_prime});
    r.constants = {{"threshold", rep.split.threshold}, {"markov_applies", rep.split.markov_applies ? 1.0 : 0.0}};
    r.completed = true;
    rep.stages.push_back(r);
  }

  rep.k_choice = choose_k(n_prime, rep.level_set.m, d, A, kappa, n);
  rep.k = rep.k_choice.k;
  {
    StageRecord r;
    r.name = "choose_k";
    r.checks.push_back({"k_upper", double(rep.k), rep.k_choice.upper, double(rep.k) <= rep.k_choice.upper});
    r.checks.push_back({"k_lower", double(rep.k), rep.k_choice.lower, double(rep.k) >= rep.k_choice.lower});
    r.constants = {{"raw_k", rep.k_choice.raw}};
    r.note = rep.k_choice.raw < 1.0 ? "k clamped to 1" : "";
    r.completed = true;
    rep.stages.push_back(r);
  }

  std::vector<Vec> good;
  for (std::size_t j : rep.split.good) good.push_back(VR[j]);
  rep.rounding = round_to_lattice(good, rep.D, rep.k);
  if (rep.rounding.F.empty()) rep.rounding.F.push_back(IVec::Zero(d));
  {
    StageRecord r;
    r.name = "round_to_lattice";
    double worst = 0.0;
    for (double e : rep.rounding.errors) worst = std::max(worst, e);
    const double Dk = rep.D * rep.k;
    r.checks.push_back({"max_error", worst, 1.0 / Dk, worst <= 1.0 / Dk * (1.0 + 1e-12)});
    r.constants = {{"D", rep.D}, {"k", double(rep.k)}};
    r.note = good.empty() ? "every vector discarded; F = {0}" : "";
    r.completed = true;
    rep.stages.push_back(r);
  }

  {
    StageRecord r;
    r.name = "dual_volume_check";
    try {
      rep.dual_volume = dual_volume_check(good, d, rep.k, rep.alpha, kappa, rep.rho, opt.cells_per_radius,
                                          opt.enumeration_budget);
      r.checks.push_back({"volume", rep.dual_volume->lhs_volume, rep.dual_volume->rhs, rep.dual_volume->holds});
      r.constants = {{"radius", rep.dual_volume->radius}, {"cell_side", rep.dual_volume->cell_side}};
      r.completed = true;
    } catch (const BudgetError& e) {
      r.note = std::string("skipped: ") + e.what();
    }
    rep.stages.push_back(r);
  }

  const int r_max = opt.r_max > 0 ? opt.r_max : d + 2;
  rep.fit = fit_gap(rep.rounding.F, r_max, opt.enumeration_budget);
  {
    StageRecord r;
    r.name = "fit_gap";
    r.checks.push_back({"cardinality_vs_box", rep.fit.gap.box_size(), rep.fit.box_fallback_size,
                        rep.fit.gap.box_size() <= rep.fit.box_fallback_size});
    r.checks.push_back({"containment", rep.fit.containment_verified ? 1.0 : 0.0, 1.0, rep.fit.containment_verified});
    r.constants = {{"rank", double(rep.fit.gap.rank())}, {"r_max", double(r_max)}};
    r.note = rep.fit.method;
    r.completed = true;
    rep.stages.push_back(r);
  }
  rep.Q = rep.fit.gap.scaled(system.R / (rep.D * rep.k));

  GapVerificationInput vin;
  vin.system = &system;
  vin.A = A;
  vin.epsilon = epsilon;
  vin.n_prime = n_prime;
  vin.rho = rep.rho;
  vin.alpha = rep.alpha;
  vin.D = rep.D;
  vin.k = rep.k;
  vin.Q_prime = &rep.fit.gap;
  vin.rounding = &rep.rounding;
  vin.kept = &rep.split.good;
  vin.constants = opt.constants;
  vin.budget = opt.enumeration_budget;
  rep.verification = verify_thm_gap(vin);
  for (const StageRecord* p : {&rep.verification.part1, &rep.verification.part2, &rep.verification.part3,
                               &rep.verification.part4})
    rep.stages.push_back(*p);
  return rep;
}

}  // namespace quasilo

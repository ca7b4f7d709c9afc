#include "quasilo/smallball.hpp"

#include <map>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace quasilo;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

struct Law {
  std::vector<Vec> points;
  std::vector<double> weights;
};

// Law of Σ ±v_j by listing all 2^n sign patterns, unmerged.
Law brute_law(const std::vector<Vec>& V, int d) {
  Law out;
  const int n = static_cast<int>(V.size());
  for (const auto& s : oracle::sign_patterns(n)) {
    Vec x = Vec::Zero(d);
    for (int j = 0; j < n; ++j) x += s[j] * V[j];
    out.points.push_back(x);
    out.weights.push_back(std::ldexp(1.0, -n));
  }
  return out;
}

double mass_in(const Law& law, const std::function<bool(const Vec&)>& inside) {
  double m = 0.0;
  for (std::size_t i = 0; i < law.points.size(); ++i)
    if (inside(law.points[i])) m += law.weights[i];
  return m;
}

const double kSlack = 1e-9;

// Max mass in a closed axis box of half-widths h: some optimum has its lower
// edges on atom coordinates.
double box_oracle(const Law& law, const Vec& h) {
  const int d = static_cast<int>(h.size());
  double best = 0.0;
  std::vector<std::size_t> idx(d, 0);
  const std::size_t m = law.points.size();
  while (true) {
    Vec c(d);
    for (int i = 0; i < d; ++i) c(i) = law.points[idx[i]](i) + h(i);
    best = std::max(best, mass_in(law, [&](const Vec& x) {
      return ((x - c).cwiseAbs().array() <= h.array() * (1 + kSlack)).all();
    }));
    int axis = 0;
    while (axis < d && ++idx[axis] == m) idx[axis++] = 0;
    if (axis == d) break;
  }
  return best;
}

// Max mass in a closed disk of radius r: centers at atoms and at both
// centers of radius-r circles through each close pair.
double disk_oracle(const Law& law, double r) {
  std::vector<Vec> centers = law.points;
  for (std::size_t i = 0; i < law.points.size(); ++i) {
    for (std::size_t j = i + 1; j < law.points.size(); ++j) {
      const Vec a = law.points[i], b = law.points[j];
      const double dd = (b - a).norm();
      if (dd == 0.0 || dd > 2 * r) continue;
      const Vec mid = 0.5 * (a + b);
      const Vec perp = make_vec({-(b - a)(1), (b - a)(0)}) / dd;
      const double h = std::sqrt(std::max(0.0, r * r - 0.25 * dd * dd));
      centers.push_back(mid + h * perp);
      centers.push_back(mid - h * perp);
    }
  }
  double best = 0.0;
  for (const Vec& c : centers)
    best = std::max(best, mass_in(law, [&](const Vec& x) { return (x - c).norm() <= r * (1 + kSlack); }));
  return best;
}

std::vector<Vec> random_vectors(std::mt19937_64& rng, int n, int d, bool integer) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> k(-2, 2);
  std::vector<Vec> V;
  for (int j = 0; j < n; ++j) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = integer ? k(rng) : u(rng);
    V.push_back(v);
  }
  return V;
}

void expect_witness(const AtomDistribution& dist, const StarBody& body, double R, const SmallBallResult& r) {
  EXPECT_NEAR(probability_in_translate(dist, body, R, r.center), r.rho, 1e-12);
}

}  // namespace

TEST(Atoms, Examples) {
  const NoiseModel b = NoiseModel::bernoulli();
  const StarBody k = StarBody::lp_ball(2.0, 1);
  const auto a = atoms(VectorSystem({make_vec({1}), make_vec({1})}, 1.0, k), b);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.points[0](0), -2.0);
  EXPECT_EQ(a.points[1](0), 0.0);
  EXPECT_EQ(a.points[2](0), 2.0);
  EXPECT_EQ(a.weights[0], 0.25);
  EXPECT_EQ(a.weights[1], 0.5);
  EXPECT_EQ(a.weights[2], 0.25);

  const StarBody k2 = StarBody::lp_ball(2.0, 2);
  const auto one = atoms(VectorSystem({make_vec({1, 2})}, 1.0, k2), b);
  ASSERT_EQ(one.size(), 2u);
  EXPECT_EQ(one.points[0], make_vec({-1, -2}));
  EXPECT_EQ(one.weights[0], 0.5);

  const auto zero = atoms(VectorSystem(std::vector<Vec>(5, Vec::Zero(2)), 1.0, k2), b);
  ASSERT_EQ(zero.size(), 1u);
  EXPECT_EQ(zero.weights[0], 1.0);
}

TEST(Atoms, MatchBruteForceAndSumToOne) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Vec> V = random_vectors(rng, 7, 2, trial % 2 == 0);
    const auto a = atoms(VectorSystem(V, 1.0, StarBody::lp_ball(2.0, 2)), NoiseModel::bernoulli());
    EXPECT_NEAR(a.total_weight(), 1.0, 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_GT(linf(a.points[i] - a.points[j]), kMergeTolerance);
    // Every brute-force point carries the merged weight of its cluster.
    const Law law = brute_law(V, 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double m = mass_in(law, [&](const Vec& x) { return linf(x - a.points[i]) <= 1e-9; });
      EXPECT_NEAR(m, a.weights[i], 1e-12);
    }
  }
}

TEST(Atoms, FiniteNoise) {
  const NoiseModel u = NoiseModel::finite({{0, 0.25}, {1, 0.5}, {3, 0.25}});
  const auto a = atoms(VectorSystem({make_vec({1}), make_vec({1})}, 1.0, StarBody::lp_ball(2.0, 1)), u);
  std::map<double, double> expect{{0, 1.0 / 16}, {1, 0.25}, {2, 0.25}, {3, 1.0 / 8}, {4, 0.25}, {6, 1.0 / 16}};
  ASSERT_EQ(a.size(), expect.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.weights[i], expect.at(a.points[i](0)), 1e-15);
}

TEST(Atoms, BudgetExceeded) {
  const VectorSystem s(std::vector<Vec>(25, make_vec({1})), 1.0, StarBody::lp_ball(2.0, 1));
  EXPECT_THROW(atoms(s, NoiseModel::bernoulli()), BudgetError);
  EXPECT_THROW(atoms(s, NoiseModel::bernoulli(), 1000.0), BudgetError);
}

TEST(RhoExact, Examples) {
  const NoiseModel b = NoiseModel::bernoulli();
  const StarBody k = StarBody::lp_ball(2.0, 1);
  const auto r = rho_exact(VectorSystem({make_vec({1}), make_vec({1})}, 0.5, k), b);
  EXPECT_EQ(r.rho, 0.5);
  EXPECT_EQ(r.certificate, Certificate::exact);
  EXPECT_NEAR(r.center(0), 0.0, 1e-12);

  const auto r10 = rho_exact(VectorSystem(std::vector<Vec>(10, make_vec({1})), 0.5, k), b);
  EXPECT_EQ(r10.rho, 252.0 / 1024.0);
  EXPECT_EQ(double(oracle::binom(10, 5)) / 1024.0, r10.rho);

  const auto big = rho_exact(VectorSystem(std::vector<Vec>(6, make_vec({1, -1})), 100.0, StarBody::lp_ball(2.0, 2)), b);
  EXPECT_EQ(big.rho, 1.0);
  AtomDistribution empty;
  EXPECT_THROW(rho_exact(empty, k, 1.0), ValidationError);
}

TEST(RhoExact, AgreesWithOraclesOnRandomSystems) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> R(0.2, 3.0);
  const NoiseModel b = NoiseModel::bernoulli();
  for (int trial = 0; trial < 40; ++trial) {
    const bool integer = trial % 2 == 0;
    const double radius = R(rng);
    // d = 1, asymmetric interval [−0.5, 2] as a box around its midpoint.
    {
      const auto V = random_vectors(rng, 8, 1, integer);
      const StarBody k = StarBody::radial(1, [](const Vec& u) { return u(0) > 0 ? 2.0 : 0.5; }, 1.0, 2.0);
      const auto dist = atoms(VectorSystem(V, radius, k), b);
      const auto r = rho_exact(dist, k, radius);
      EXPECT_EQ(r.certificate, Certificate::exact);
      const Law law = brute_law(V, 1);
      EXPECT_NEAR(r.rho, box_oracle(law, make_vec({1.25 * radius})), 1e-12);
      expect_witness(dist, k, radius, r);
    }
    const auto V = random_vectors(rng, 7, 2, integer);
    const Law law = brute_law(V, 2);
    {
      const StarBody k = StarBody::scaled_box(make_vec({1.0, 0.5}));
      const auto dist = atoms(VectorSystem(V, radius, k), b);
      const auto r = rho_exact(dist, k, radius);
      EXPECT_EQ(r.certificate, Certificate::exact);
      EXPECT_NEAR(r.rho, box_oracle(law, make_vec({radius, 0.5 * radius})), 1e-12);
      expect_witness(dist, k, radius, r);
    }
    {
      const StarBody k = StarBody::lp_ball(1.0, 2);
      const auto dist = atoms(VectorSystem(V, radius, k), b);
      const auto r = rho_exact(dist, k, radius);
      // B_1 in rotated coordinates u = x+y, v = x−y is a box of half-width R.
      Law rotated = law;
      for (Vec& p : rotated.points) p = make_vec({p(0) + p(1), p(0) - p(1)});
      EXPECT_NEAR(r.rho, box_oracle(rotated, make_vec({radius, radius})), 1e-12);
      expect_witness(dist, k, radius, r);
    }
    {
      const StarBody k = StarBody::lp_ball(2.0, 2);
      const auto dist = atoms(VectorSystem(V, radius, k), b);
      const auto r = rho_exact(dist, k, radius);
      EXPECT_EQ(r.certificate, Certificate::exact);
      EXPECT_NEAR(r.rho, disk_oracle(law, radius), 1e-12);
      expect_witness(dist, k, radius, r);
    }
  }
}

TEST(RhoExact, MonotoneInR) {
  std::mt19937_64 rng(8);
  for (const StarBody& k : {StarBody::lp_ball(1.0, 2), StarBody::lp_ball(2.0, 2), StarBody::lp_ball(kInf, 2)}) {
    const auto V = random_vectors(rng, 8, 2, false);
    const auto dist = atoms(VectorSystem(V, 1.0, k), NoiseModel::bernoulli());
    double prev = 0.0;
    for (double R = 0.1; R < 6.0; R += 0.1) {
      const double rho = rho_exact(dist, k, R).rho;
      EXPECT_GE(rho, prev - 1e-15);
      prev = rho;
    }
  }
}

TEST(RhoExact, TranslationScalingAndDuality) {
  std::mt19937_64 rng(9);
  for (const StarBody& k : {StarBody::lp_ball(1.0, 2), StarBody::lp_ball(2.0, 2), StarBody::lp_ball(kInf, 2),
                            StarBody::lp_ball(2.0, 1)}) {
    const int d = k.dimension();
    for (int trial = 0; trial < 5; ++trial) {
      const auto V = random_vectors(rng, 8, d, trial % 2 == 1);
      const double R = 0.75;
      const VectorSystem sys(V, R, k);
      const auto dist = atoms(sys, NoiseModel::bernoulli());
      const double rho = rho_exact(dist, k, R).rho;
      Vec shift(d);
      for (int i = 0; i < d; ++i) shift(i) = 0.37 * (i + 1);
      EXPECT_NEAR(rho_exact(dist.translated(shift), k, R).rho, rho, 1e-12) << k.describe();
      // ρ_R(X_V) = ρ_1(X_{V/R}).
      const VectorSystem unit(sys.rescaled(), 1.0, k);
      EXPECT_NEAR(rho_exact(unit, NoiseModel::bernoulli()).rho, rho, 1e-12) << k.describe();
      for (double t : {0.5, 2.0}) EXPECT_NEAR(rho_exact(dist, k.scaled(t), R / t).rho, rho, 1e-12) << k.describe();
    }
  }
}

TEST(RhoExact, LowerBoundIsSound) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto V = random_vectors(rng, 6, 2, trial % 2 == 0);
    for (const StarBody& k : {StarBody::lp_ball(1.0, 2), StarBody::lp_ball(2.0, 2), StarBody::lp_ball(kInf, 2)}) {
      const auto dist = atoms(VectorSystem(V, 1.0, k), NoiseModel::bernoulli());
      const auto exact = rho_exact(dist, k, 1.0);
      const auto lower = rho_lower_bound(dist, k, 1.0);
      EXPECT_EQ(lower.certificate, Certificate::lower_bound);
      EXPECT_LE(lower.rho, exact.rho + 1e-12);
      expect_witness(dist, k, 1.0, lower);
    }
  }
  // Non-kernel bodies fall back to the labelled lower bound.
  const StarBody half = StarBody::lp_ball(0.5, 2);
  const auto r = rho_exact(VectorSystem({make_vec({1, 0}), make_vec({0, 1})}, 1.0, half), NoiseModel::bernoulli());
  EXPECT_EQ(r.certificate, Certificate::lower_bound);
  EXPECT_GT(r.rho, 0.0);
}

TEST(RhoMc, Examples) {
  const NoiseModel b = NoiseModel::bernoulli();
  const StarBody k = StarBody::lp_ball(2.0, 1);
  const VectorSystem zero(std::vector<Vec>(3, make_vec({0})), 1.0, k);
  const auto one = rho_mc(zero, b, 0.5, 5000, {make_vec({0})}, 1);
  EXPECT_EQ(one.rho, 1.0);
  EXPECT_EQ(one.std_error, 0.0);

  const VectorSystem ten(std::vector<Vec>(10, make_vec({1})), 0.5, k);
  const auto mc = rho_mc(ten, b, 0.5, 200000, {make_vec({0}), make_vec({2})}, 2);
  EXPECT_NEAR(mc.rho, 252.0 / 1024.0, 4 * mc.std_error);
  EXPECT_EQ(mc.certificate, Certificate::lower_bound);

  const auto far = rho_mc(ten, b, 0.5, 10000, {make_vec({100})}, 3);
  EXPECT_EQ(far.rho, 0.0);
  EXPECT_THROW(rho_mc(ten, b, 0.5, 100, {}, 1), ValidationError);
}

TEST(BinomialSum, Examples) {
  EXPECT_EQ(binomial_sum_S(4, 1).value, 6u);
  EXPECT_EQ(binomial_sum_S(4, 2).value, 10u);
  for (int n = 0; n <= 20; ++n) EXPECT_EQ(binomial_sum_S(n, n + 1).value, std::uint64_t(1) << n);
  EXPECT_THROW(binomial_sum_S(4, 0), ValidationError);
  EXPECT_THROW(binomial_sum_S(4, 6), ValidationError);
}

TEST(BinomialSum, MatchesSortedRow) {
  for (int n = 1; n <= 30; ++n) {
    std::vector<std::uint64_t> row;
    for (int k = 0; k <= n; ++k) row.push_back(oracle::binom(n, k));
    std::sort(row.rbegin(), row.rend());
    std::uint64_t s = 0;
    for (int m = 1; m <= n + 1; ++m) {
      s += row[m - 1];
      EXPECT_EQ(binomial_sum_S(n, m).value, s);
    }
  }
}

TEST(SharpLo, Examples) {
  const auto a = sharp_lo_report(10, 0.5);
  EXPECT_EQ(a.rho, std::ldexp(double(binomial_sum_S(10, 1).value), -10));
  EXPECT_TRUE(a.exact_equality);
  EXPECT_EQ(a.ratio, 1.0);
  const auto b = sharp_lo_report(10, 1.5);
  EXPECT_EQ(b.rho, std::ldexp(double(binomial_sum_S(10, 2).value), -10));
  EXPECT_TRUE(b.exact_equality);
  for (double R : {0.1, 0.5, 0.99}) EXPECT_EQ(sharp_lo_report(1, R).rho, 0.5);
  EXPECT_THROW(sharp_lo_report(25, 0.5), ValidationError);
}

TEST(SharpLo, EqualityNearIntegersAcrossN) {
  for (int n = 1; n <= 16; ++n)
    for (int m = 0; m <= std::min(n, 4); ++m) {
      const auto r = sharp_lo_report(n, m + 0.5);
      EXPECT_TRUE(r.exact_equality) << n << " " << m;
    }
}

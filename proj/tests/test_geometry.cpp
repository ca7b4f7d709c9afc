#include "quasilo/geometry.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace quasilo;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double lp(const Vec& x, double p) {
  if (std::isinf(p)) return x.cwiseAbs().maxCoeff();
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v), p);
  return std::pow(s, 1.0 / p);
}

// Brute-force embedding constants: extremes of |x|_q/|x|_p and |x|_p/|x|_q
// over axes, the all-ones diagonal and random directions.
std::pair<double, double> embedding_oracle(double p, double q, int d) {
  std::vector<Vec> xs;
  for (int i = 0; i < d; ++i) xs.push_back(Vec::Unit(d, i));
  xs.push_back(Vec::Ones(d));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int s = 0; s < 2000; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = g(rng);
    xs.push_back(x);
  }
  double omega = 0.0, W = 0.0;
  for (const Vec& x : xs) {
    omega = std::max(omega, lp(x, q) / lp(x, p));
    W = std::max(W, lp(x, p) / lp(x, q));
  }
  return {std::max(1.0, omega), std::max(1.0, W)};
}

StarBody unit_disk_radial() {
  return StarBody::radial(2, [](const Vec&) { return 1.0; }, 1.0, 1.0);
}

}  // namespace

TEST(Norm, Examples) {
  EXPECT_DOUBLE_EQ(StarBody::lp_ball(2.0, 2).norm(make_vec({3, 4})), 5.0);
  EXPECT_DOUBLE_EQ(StarBody::lp_ball(0.5, 2).norm(make_vec({1, 1})), 4.0);
  for (const StarBody& b : {StarBody::lp_ball(0.5, 3), StarBody::lp_ball(kInf, 3), StarBody::scaled_box(make_vec({1, 2, 3}))})
    EXPECT_EQ(b.norm(Vec::Zero(3)), 0.0);
  EXPECT_EQ(unit_disk_radial().norm(Vec::Zero(2)), 0.0);
}

TEST(Norm, BoxAndDilation) {
  const StarBody box = StarBody::scaled_box(make_vec({2.0, 0.5}));
  EXPECT_DOUBLE_EQ(box.norm(make_vec({1.0, 1.0})), 2.0);
  EXPECT_DOUBLE_EQ(box.scaled(4.0).norm(make_vec({1.0, 1.0})), 0.5);
}

TEST(Norm, Errors) {
  EXPECT_THROW(StarBody::lp_ball(2.0, 2).norm(make_vec({1, 2, 3})), ValidationError);
  const StarBody bad = StarBody::radial(2, [](const Vec&) { return -1.0; }, 1.0);
  EXPECT_THROW(bad.norm(make_vec({1, 0})), ValidationError);
  const StarBody nan = StarBody::radial(2, [](const Vec&) { return std::nan(""); }, 1.0);
  EXPECT_THROW(nan.norm(make_vec({1, 0})), ValidationError);
  EXPECT_THROW(StarBody::lp_ball(0.0, 2), ValidationError);
  EXPECT_THROW(StarBody::scaled_box(make_vec({1.0, 0.0})), ValidationError);
}

TEST(Norm, HomogeneityProperty) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.01, 50.0);
  const std::vector<StarBody> bodies{StarBody::lp_ball(0.5, 3), StarBody::lp_ball(1.0, 3), StarBody::lp_ball(2.0, 3),
                                     StarBody::lp_ball(kInf, 3), StarBody::lp_ball(3.7, 3),
                                     StarBody::scaled_box(make_vec({0.3, 1.0, 7.0}))};
  for (const StarBody& b : bodies) {
    for (int i = 0; i < 100; ++i) {
      const Vec x = make_vec({g(rng), g(rng), g(rng)});
      const double t = u(rng);
      EXPECT_LE(std::abs(b.norm(t * x) - t * b.norm(x)), 1e-12 * b.norm(t * x)) << b.describe();
    }
  }
}

TEST(Norm, RadialAsymmetricBody) {
  // Radius 1 towards +x, 0.5 elsewhere.
  const StarBody k = StarBody::radial(2, [](const Vec& u) { return u(0) > 0.0 ? 1.0 : 0.5; }, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(k.norm(make_vec({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(k.norm(make_vec({-1, 0})), 2.0);
  // dist_K(v, S) uses v − s.
  EXPECT_DOUBLE_EQ(dist_to_set(k, make_vec({1, 0}), {Vec::Zero(2)}), 1.0);
  EXPECT_DOUBLE_EQ(dist_to_set(k, Vec::Zero(2), {make_vec({1, 0})}), 2.0);
}

TEST(DistToSet, Examples) {
  const StarBody b2 = StarBody::lp_ball(2.0, 2);
  EXPECT_NEAR(dist_to_set(b2, make_vec({0.4, 0}), {make_vec({0, 0}), make_vec({1, 0})}), 0.4, 1e-15);
  EXPECT_EQ(dist_to_set(b2, make_vec({1, 0}), {make_vec({0, 0}), make_vec({1, 0})}), 0.0);
  EXPECT_DOUBLE_EQ(dist_to_set(StarBody::lp_ball(kInf, 2), make_vec({0.5, 0.3}), {Vec::Zero(2)}), 0.5);
  EXPECT_THROW(dist_to_set(b2, make_vec({0, 0}), {}), ValidationError);
}

TEST(Embedding, Examples) {
  auto c = lp_embedding_constants(kInf, 2.0, 4);
  EXPECT_DOUBLE_EQ(c.omega, 2.0);
  EXPECT_DOUBLE_EQ(c.W, 1.0);
  auto [o1, w1] = embedding_oracle(kInf, 2.0, 4);
  EXPECT_NEAR(c.omega, o1, 1e-12);
  EXPECT_NEAR(c.W, w1, 1e-12);

  c = lp_embedding_constants(2.0, kInf, 9);
  EXPECT_DOUBLE_EQ(c.omega, 1.0);
  EXPECT_DOUBLE_EQ(c.W, 3.0);
  auto [o2, w2] = embedding_oracle(2.0, kInf, 9);
  EXPECT_NEAR(c.omega, o2, 1e-12);
  EXPECT_NEAR(c.W, w2, 1e-12);

  for (double p : {0.5, 1.0, 2.0, kInf}) {
    c = lp_embedding_constants(p, p, 5);
    EXPECT_EQ(c.omega, 1.0);
    EXPECT_EQ(c.W, 1.0);
  }
  EXPECT_THROW(lp_embedding_constants(0.0, 1.0, 2), ValidationError);
}

TEST(Embedding, ConsistencyProperty) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (double p : {0.5, 1.0, 2.0, 3.0, kInf}) {
    for (double q : {0.5, 1.0, 2.0, kInf}) {
      for (int d : {1, 2, 5}) {
        const auto c = lp_embedding_constants(p, q, d);
        const auto [o, w] = embedding_oracle(p, q, d);
        EXPECT_NEAR(c.omega, o, 1e-9 * o) << p << " " << q << " " << d;
        EXPECT_NEAR(c.W, w, 1e-9 * w) << p << " " << q << " " << d;
        const StarBody bq = StarBody::lp_ball(q, d);
        for (int i = 0; i < 50; ++i) {
          Vec x(d);
          for (int j = 0; j < d; ++j) x(j) = g(rng);
          const double xp = StarBody::lp_norm(x, p), xq = bq.norm(x);
          EXPECT_LE(xp / c.W, xq * (1 + 1e-12));
          EXPECT_LE(xq, c.omega * xp * (1 + 1e-12));
        }
      }
    }
  }
}

TEST(Constants, IntervalExample) {
  const StarBody k = StarBody::lp_ball(2.0, 1);
  const BodyConstants c = estimate_constants(k, 1000000, 17);
  const double gamma = oracle::erf_series(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(gamma, 0.682689492137086, 1e-14);
  EXPECT_EQ(c.mu, 2.0);
  EXPECT_NEAR(c.gamma, gamma, 4 * c.se_gamma);
  EXPECT_NEAR(c.kappa, std::sqrt(2.0 / oracle::pi) * 2.0 / c.gamma, 1e-15);
  const auto ref = reference_constants(k);
  ASSERT_TRUE(ref);
  EXPECT_NEAR(ref->gamma, gamma, 1e-14);
  EXPECT_NEAR(ref->kappa, 2.337474269027267, 1e-12);
}

TEST(Constants, CubeAndDisk) {
  const double g1 = 2 * oracle::Phi(1.0) - 1;
  const auto cube = reference_constants(StarBody::lp_ball(kInf, 2));
  ASSERT_TRUE(cube);
  EXPECT_NEAR(cube->gamma, g1 * g1, 1e-14);
  EXPECT_NEAR(cube->gamma, 0.46606, 1e-5);
  const auto est = estimate_constants(StarBody::lp_ball(kInf, 2), 1000000, 3);
  EXPECT_NEAR(est.gamma, g1 * g1, 4 * est.se_gamma);

  const auto disk = estimate_constants(StarBody::lp_ball(2.0, 2), 1000000, 4);
  EXPECT_NEAR(disk.mu, oracle::pi, 1e-13);
  EXPECT_NEAR(disk.gamma, 1 - std::exp(-0.5), 4 * disk.se_gamma);
}

TEST(Constants, KappaAssemblyIsExact) {
  for (const StarBody& b : {StarBody::lp_ball(0.5, 2), StarBody::lp_ball(1.0, 3), StarBody::scaled_box(make_vec({1, 2}))}) {
    const BodyConstants c = estimate_constants(b, 20000, 8);
    const double again = c.quasi_constant * std::sqrt(2.0 / kPi) * std::pow(c.mu / c.gamma, 1.0 / c.dimension);
    EXPECT_EQ(c.kappa, again);
    EXPECT_LE(c.gamma, 1.0);
    EXPECT_GT(c.mu, 0.0);
  }
}

TEST(Constants, McCalibrationAtMillionSamples) {
  // Independent oracles for γ of planar ℓ_p balls by slicing.
  auto planar_gamma = [](double p) {
    return 2.0 * oracle::simpson(
                     [p](double x) {
                       const double y = std::pow(std::max(0.0, 1.0 - std::pow(std::abs(x), p)), 1.0 / p);
                       return std::exp(-0.5 * x * x) / std::sqrt(2 * oracle::pi) * (2 * oracle::Phi(y) - 1);
                     },
                     0.0, 1.0, 1e-13);
  };
  struct Case {
    StarBody body;
    double mu, gamma;
  };
  const std::vector<Case> cases{
      {StarBody::lp_ball(1.0, 2), 2.0, planar_gamma(1.0)},
      {StarBody::lp_ball(2.0, 2), oracle::pi, 1 - std::exp(-0.5)},
      {StarBody::lp_ball(0.5, 2), 2.0 / 3.0, planar_gamma(0.5)},
      {StarBody::lp_ball(kInf, 3), 8.0, std::pow(2 * oracle::Phi(1) - 1, 3)},
      {StarBody::scaled_box(make_vec({0.5, 2.0})), 4.0, (2 * oracle::Phi(0.5) - 1) * (2 * oracle::Phi(2) - 1)},
  };
  for (const Case& c : cases) {
    const BodyConstants k = estimate_constants(c.body, 1000000, 2024);
    EXPECT_NEAR(k.mu, c.mu, 1e-12 * c.mu) << c.body.describe();
    EXPECT_NEAR(k.gamma, c.gamma, 4 * k.se_gamma) << c.body.describe();
    const auto ref = reference_gaussian_measure(c.body);
    ASSERT_TRUE(ref);
    EXPECT_NEAR(*ref, c.gamma, 1e-9) << c.body.describe();
  }
}

TEST(Constants, RadialVolumeByHitOrMiss) {
  const BodyConstants c = estimate_constants(unit_disk_radial(), 1000000, 6);
  EXPECT_GT(c.se_mu, 0.0);
  EXPECT_NEAR(c.mu, oracle::pi, 4 * c.se_mu);
  EXPECT_NEAR(c.gamma, 1 - std::exp(-0.5), 4 * c.se_gamma);
}

TEST(Constants, Errors) {
  EXPECT_THROW(estimate_constants(StarBody::lp_ball(2.0, 2), 999, 1), ValidationError);
  const StarBody unbounded = StarBody::radial(2, [](const Vec&) { return 1.0; }, 1.0);
  EXPECT_THROW(estimate_constants(unbounded, 5000, 1), ValidationError);
}

TEST(QuasiTriangle, Examples) {
  const StarBody half = StarBody::lp_ball(0.5, 2);
  EXPECT_DOUBLE_EQ(half.quasi_constant(), 2.0);
  const Vec e1 = Vec::Unit(2, 0), e2 = Vec::Unit(2, 1);
  EXPECT_DOUBLE_EQ(half.norm(e1 + e2) / (half.norm(e1) + half.norm(e2)), 2.0);
  const auto r = quasi_triangle_check(half, 2000, 1);
  EXPECT_DOUBLE_EQ(r.max_ratio, 2.0);
  EXPECT_TRUE(r.within_constant);

  for (double p : {1.0, 1.5, 2.0, kInf}) {
    const auto q = quasi_triangle_check(StarBody::lp_ball(p, 3), 2000, 2);
    EXPECT_LE(q.max_ratio, 1.0 + 1e-12);
    EXPECT_TRUE(q.within_constant);
  }
  const StarBody b2 = StarBody::lp_ball(2.0, 3);
  const Vec x = make_vec({0.3, -1.0, 2.0});
  EXPECT_NEAR(b2.norm(2 * x) / (2 * b2.norm(x)), 1.0, 1e-15);
}

TEST(KappaProfile, Examples) {
  const StarBody k = StarBody::lp_ball(2.0, 1);
  const auto prof = kappa_scaling_profile(k, {1.0, 2.0}, 1000000, 11);
  EXPECT_EQ(prof[0].kappa, estimate_constants(k, 1000000, 11).kappa);
  const double g2 = 2 * oracle::Phi(2.0) - 1;
  const double kappa2 = std::sqrt(2 / oracle::pi) * 4 / g2;
  EXPECT_NEAR(kappa2, 3.3437, 1e-4);
  // δκ ≈ κ δγ / γ.
  EXPECT_NEAR(prof[1].kappa, kappa2, 4 * kappa2 * prof[1].se_gamma / g2);
  EXPECT_NEAR(prof[1].gamma, g2, 4 * prof[1].se_gamma);
}

TEST(KappaProfile, MonotoneTail) {
  const StarBody k = StarBody::lp_ball(2.0, 2);
  const std::vector<double> grid{2.0, 3.0, 4.0, 6.0, 10.0};
  const auto prof = kappa_scaling_profile(k, grid, 100000, 12);
  for (std::size_t i = 1; i < prof.size(); ++i) EXPECT_GT(prof[i].kappa, prof[i - 1].kappa);
  const double limit = std::sqrt(2 / kPi) * 10.0 * std::sqrt(kPi);
  EXPECT_NEAR(prof.back().kappa, limit, 1e-9 * limit);
  EXPECT_THROW(kappa_scaling_profile(k, {}, 1000, 1), ValidationError);
  EXPECT_THROW(kappa_scaling_profile(k, {-1.0}, 1000, 1), ValidationError);
}

TEST(Omega, BoxAndRadial) {
  const StarBody box = StarBody::scaled_box(make_vec({0.5, 2.0}));
  EXPECT_DOUBLE_EQ(omega(box, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(W(box, kInf), 2.0);
  const StarBody disk = unit_disk_radial();
  EXPECT_NEAR(omega(disk, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(W(disk, 2.0), 1.0, 1e-12);
}

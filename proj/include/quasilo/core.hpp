// Shared vocabulary for the quasilo headers: vector types, error classes,
// tolerances, seeded block-parallel Monte Carlo and a few special functions.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace quasilo {

inline constexpr const char* kVersion = "0.3.0";

using Vec = Eigen::VectorXd;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

inline constexpr double kPi = std::numbers::pi;

/// ℓ∞ radius under which two atoms (or GAP points) are identified.
inline constexpr double kMergeTolerance = 1e-9;
/// Relative slack applied to closed-body membership tests `norm(a - x) <= R`.
inline constexpr double kBoundaryTolerance = 1e-9;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs violate an operation's preconditions. The CLI maps this to exit 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An enumeration, grid or sampling budget would be exceeded. CLI exit 2.
class BudgetError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

inline Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline double linf(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// ---------------------------------------------------------------------------
// Deterministic seeded sampling.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

/// Generator for block `block` of a run seeded with `seed`. Results depend
/// only on (seed, block), never on how blocks are scheduled.
inline Rng block_rng(std::uint64_t seed, std::uint64_t block) {
  return Rng(splitmix64(seed ^ splitmix64(block + 0x51ed27a3ULL)));
}

inline constexpr std::size_t kSampleBlock = 4096;

inline unsigned worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs `fn(block)` for every block in [0, blocks) on up to worker_count()
/// threads. Callers write into per-block slots and reduce in index order.
template <typename Fn>
void parallel_blocks(std::size_t blocks, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), blocks));
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < blocks; b = next++) fn(b);
    });
  }
}

/// Mean and binomial/sample standard error of a Monte Carlo average.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Averages `sample(rng)` over `samples` draws split into fixed-size blocks,
/// each with its own generator; reduction runs in block order.
template <typename SampleFn>
MeanEstimate mc_mean(std::size_t samples, std::uint64_t seed, SampleFn&& sample) {
  require(samples > 0, "Monte Carlo sample count must be positive");
  const std::size_t blocks = (samples + kSampleBlock - 1) / kSampleBlock;
  std::vector<double> sums(blocks, 0.0), squares(blocks, 0.0);
  parallel_blocks(blocks, [&](std::size_t b) {
    Rng rng = block_rng(seed, b);
    const std::size_t begin = b * kSampleBlock;
    const std::size_t end = std::min(samples, begin + kSampleBlock);
    double s = 0.0, q = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double x = sample(rng);
      s += x;
      q += x * x;
    }
    sums[b] = s;
    squares[b] = q;
  });
  double s = 0.0, q = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    s += sums[b];
    q += squares[b];
  }
  const double n = static_cast<double>(samples);
  const double mean = s / n;
  const double var = samples > 1 ? std::max(0.0, (q - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n), samples};
}

inline Vec gaussian_vector(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vec g(d);
  for (Eigen::Index i = 0; i < d; ++i) g(i) = normal(rng);
  return g;
}

}  // namespace quasilo

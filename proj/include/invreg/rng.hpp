#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace invreg {

// Deterministic RNG used by every stochastic operation. Substreams are
// derived from a 64-bit seed via the splitmix64 finalizer, so parallel
// workers can draw independent, reproducible streams. Gaussian variates use
// Box-Muller on top of the mt19937_64 bit stream; std::normal_distribution
// is not pinned by the standard and would not be bit-reproducible across
// library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Child seed from (seed, parts...); order-sensitive.
  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = mix(seed);
    for (std::uint64_t p : parts) s = mix(s ^ p);
    return s;
  }

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n); rejection sampling keeps the draw exact
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();

 private:
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index size);
Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

// Haar-ish orthogonal matrix: QR of a Gaussian matrix with the sign of
// diag(R) fixed so the result is deterministic.
Eigen::MatrixXd random_orthogonal(Rng& rng, Eigen::Index dim);

// k distinct indices drawn uniformly from {0, ..., n-1}, in draw order.
std::vector<int> sample_without_replacement(Rng& rng, int n, int k);

}  // namespace invreg

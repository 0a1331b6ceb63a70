#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cfmimo {

using cxd = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Thrown when a factorization fails even after jitter escalation.
// Carries a rough condition estimate of the offending matrix.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double cond_estimate)
      : std::runtime_error(what + " (cond ~ " + std::to_string(cond_estimate) + ")"),
        cond_estimate_(cond_estimate) {}
  double cond_estimate() const { return cond_estimate_; }

 private:
  double cond_estimate_;
};

// splitmix64 finalizer; used to derive independent per-trial RNG streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t seed_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x9e3779b97f4a7c15ull));
}

inline std::uint64_t seed_combine(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return seed_combine(seed_combine(a, b), c);
}

}  // namespace cfmimo

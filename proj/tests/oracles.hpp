#pragma once

// Test-only brute-force oracles, kept independent of the library's solve
// paths: dense inverses and determinants via full eigendecompositions,
// direct joint-Gaussian conditioning, and naive moment enumeration.

#include "cfmimo/types.hpp"

#include <complex>
#include <random>
#include <vector>

namespace oracles {

using cfmimo::cxd;
using cfmimo::Mat;
using cfmimo::Vec;

inline cxd std_cn(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double re = n(rng);
  double im = n(rng);
  return cxd(re, im) / std::sqrt(2.0);
}

inline Vec random_cvec(std::mt19937_64& rng, int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = std_cn(rng);
  return v;
}

// Random Hermitian PD matrix with eigenvalues in (about) [0.1, 2.1].
inline Mat random_psd(std::mt19937_64& rng, int d) {
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = std_cn(rng);
  return a * a.adjoint() / double(d) + 0.1 * Mat::Identity(d, d);
}

// Dense-inverse evaluation of ln CN(x | m, C), deliberately using explicit
// inverse and determinant (the thing the library must agree with).
inline double dense_log_gaussian_pdf(const Vec& x, const Vec& m, const Mat& c) {
  Mat inv = c.inverse();
  cxd det = c.determinant();
  Vec r = x - m;
  return -std::log(M_PI) * double(x.size()) - std::log(det.real()) -
         (r.adjoint() * inv * r)(0, 0).real();
}

// Posterior of x for obs = A x + noise via dense precision algebra.
struct DensePosterior {
  Vec mean;
  Mat cov;
};
inline DensePosterior dense_gaussian_product(const Vec& obs, const Mat& a, const Mat& c_obs,
                                             const Vec& prior_mean, const Mat& c_prior) {
  Mat prec = a.adjoint() * c_obs.inverse() * a + c_prior.inverse();
  Mat cov = prec.inverse();
  Vec mean = cov * (a.adjoint() * c_obs.inverse() * obs + c_prior.inverse() * prior_mean);
  return {mean, cov};
}

// Conditional of a jointly-Gaussian stack: x ~ CN(mx, Cx) observed through
// y = H x + w, w ~ CN(0, Cw). Classic covariance-form conditioning.
inline DensePosterior dense_conditional(const Vec& mx, const Mat& cx, const Mat& h,
                                        const Mat& cw, const Vec& y) {
  Mat s = h * cx * h.adjoint() + cw;
  Mat gain = cx * h.adjoint() * s.inverse();
  return {mx + gain * (y - h * mx), cx - gain * h * cx};
}

}  // namespace oracles

#pragma once

// Complex-Gaussian density algebra: products, ratios, evidence terms,
// log-densities and the block-diagonal moment-matching projection.
// Every message, prior and belief in the estimators is one of the three
// types below, so all covariance safeguards live here.

#include "cfmimo/types.hpp"

#include <limits>
#include <utility>
#include <vector>

namespace cfmimo {

// Circularly-symmetric complex Gaussian in moment form.
// A vacuous instance stands for the flat (infinite-covariance) message with
// zero mean; it is an exact identity for products and ratios.
struct Gaussian {
  Vec mean;
  Mat cov;
  bool vacuous = false;

  Eigen::Index dim() const { return mean.size(); }

  static Gaussian flat(Eigen::Index d) {
    Gaussian g;
    g.mean = Vec::Zero(d);
    g.cov = Mat::Zero(d, d);
    g.vacuous = true;
    return g;
  }
};

// Scalar complex Gaussian; var == +inf is the vacuous sentinel (mean 0).
struct ScalarGaussian {
  cxd mean{0.0, 0.0};
  double var = std::numeric_limits<double>::infinity();

  bool vacuous() const { return !std::isfinite(var); }

  static ScalarGaussian flat() { return ScalarGaussian{}; }
  static ScalarGaussian of(cxd m, double v) { return ScalarGaussian{m, v}; }
};

// Gaussian over a length T*N vector whose covariance is block-diagonal in
// time: T blocks of size N×N. Block t covers entries [t*N, (t+1)*N).
struct BlockDiagGaussian {
  Vec mean;
  std::vector<Mat> blocks;
  bool vacuous = false;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  int block_dim() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].rows()); }

  Eigen::VectorBlock<Vec> mean_block(int t) {
    return mean.segment(t * block_dim(), block_dim());
  }
  Eigen::VectorBlock<const Vec> mean_block(int t) const {
    return mean.segment(t * block_dim(), block_dim());
  }

  static BlockDiagGaussian flat(int num_blocks, int block_dim) {
    BlockDiagGaussian g;
    g.mean = Vec::Zero(static_cast<Eigen::Index>(num_blocks) * block_dim);
    g.blocks.assign(num_blocks, Mat::Zero(block_dim, block_dim));
    g.vacuous = true;
    return g;
  }
};

// Relative Hermitian-deviation check; throws std::invalid_argument beyond rtol.
void check_hermitian(const Mat& m, double rtol = 1e-10, const char* what = "matrix");

// (m + m^H)/2; cheap cleanup applied to every computed covariance.
Mat hermitized(const Mat& m);

// Cholesky with the escalating jitter policy: eps*(trace/d)*I is added with
// eps = 1e-10, growing ×10 up to 1e-6; throws NumericalFailure past that.
struct JitteredChol {
  Eigen::LLT<Mat> llt;
  double jitter = 0.0;

  template <typename Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& b) const {
    return llt.solve(b);
  }
  Mat inverse() const;
  double log_det() const;  // of the jittered matrix
};

JitteredChol jittered_chol(const Mat& cov);

// ln CN(x | mean, cov) for the circularly-symmetric complex Gaussian:
// -ln det(pi*cov) - (x-mean)^H cov^-1 (x-mean), via factorization solves.
double log_gaussian_pdf(const Vec& x, const Vec& mean, const Mat& cov);
double log_gaussian_pdf(cxd x, cxd mean, double var);

// Product identity CN(m1 | A x, C1) * CN(x | m2, C2)
//   = CN(x | m3, C3) * CN(m1 | A m2, C1 + A C2 A^H)
// with C3 = (A^H C1^-1 A + C2^-1)^-1 and
//      m3 = C3 (A^H C1^-1 m1 + C2^-1 m2).
// Returns the posterior (m3, C3) and the evidence ln CN(m1 | A m2, C1 + A C2 A^H).
struct GaussianProduct {
  Gaussian posterior;
  double evidence_logpdf;
};
GaussianProduct gaussian_product(const Vec& obs_mean, const Mat& map, const Mat& obs_cov,
                                 const Gaussian& prior);

// Unnormalized density product (precision sum). Vacuous factors are identities.
Gaussian multiply(const Gaussian& a, const Gaussian& b);
ScalarGaussian multiply(const ScalarGaussian& a, const ScalarGaussian& b);

// EP ratio num/den in precision form. Exact cancellation gives the vacuous
// message. Directions whose resulting precision is positive are exact;
// non-positive-precision directions get the var_floor variance.
Gaussian gaussian_ratio(const Gaussian& num, const Gaussian& den, double var_floor);
ScalarGaussian gaussian_ratio(const ScalarGaussian& num, const ScalarGaussian& den,
                              double var_floor);

// Moment-matching projection onto the block-diagonal-in-time family:
// mean is kept, covariance keeps its T diagonal N×N blocks.
BlockDiagGaussian project_blockdiag(const Vec& mean, const Mat& full_cov, int num_blocks,
                                    int block_dim);

double min_eigenvalue(const Mat& hermitian);

}  // namespace cfmimo

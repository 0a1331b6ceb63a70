#include "cfmimo/gaussian.hpp"

#include <cmath>

namespace cfmimo {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kJitterEps0 = 1e-10;
constexpr double kJitterEpsMax = 1e-6;

// Rough 2-norm condition estimate for error reporting only.
double cond_estimate(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitized(m), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const auto& ev = es.eigenvalues();
  double lo = ev.minCoeff(), hi = ev.maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}
}  // namespace

void check_hermitian(const Mat& m, double rtol, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": not square");
  double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  double dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (dev > rtol * scale)
    throw std::invalid_argument(std::string(what) + ": not Hermitian (rel dev " +
                                std::to_string(dev / scale) + ")");
}

Mat hermitized(const Mat& m) { return 0.5 * (m + m.adjoint()); }

Mat JitteredChol::inverse() const {
  Eigen::Index d = llt.matrixL().rows();
  return llt.solve(Mat::Identity(d, d));
}

double JitteredChol::log_det() const {
  // det = prod diag(L)^2, diag(L) real positive
  double s = 0.0;
  auto L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i).real());
  return 2.0 * s;
}

JitteredChol jittered_chol(const Mat& cov) {
  Eigen::Index d = cov.rows();
  Mat h = hermitized(cov);
  double scale = h.trace().real() / static_cast<double>(d);
  if (scale <= 0.0) scale = 1.0;  // zero matrix: absolute jitter
  for (double eps = kJitterEps0; eps <= kJitterEpsMax * 1.0001; eps *= 10.0) {
    JitteredChol out;
    out.jitter = eps * scale;
    Mat jittered = h + out.jitter * Mat::Identity(d, d);
    out.llt.compute(jittered);
    if (out.llt.info() == Eigen::Success) return out;
  }
  throw NumericalFailure("cholesky failed after jitter escalation", cond_estimate(h));
}

double log_gaussian_pdf(const Vec& x, const Vec& mean, const Mat& cov) {
  if (x.size() != mean.size() || x.size() != cov.rows())
    throw std::invalid_argument("log_gaussian_pdf: dimension mismatch");
  JitteredChol ch = jittered_chol(cov);
  Vec r = x - mean;
  // quad = r^H C^-1 r through one triangular solve pair
  double quad = r.dot(ch.solve(r)).real();
  return -static_cast<double>(x.size()) * std::log(kPi) - ch.log_det() - quad;
}

double log_gaussian_pdf(cxd x, cxd mean, double var) {
  return -std::log(kPi * var) - std::norm(x - mean) / var;
}

GaussianProduct gaussian_product(const Vec& obs_mean, const Mat& map, const Mat& obs_cov,
                                 const Gaussian& prior) {
  check_hermitian(obs_cov, 1e-10, "gaussian_product obs_cov");
  check_hermitian(prior.cov, 1e-10, "gaussian_product prior cov");
  if (map.rows() != obs_mean.size() || map.cols() != prior.mean.size())
    throw std::invalid_argument("gaussian_product: map dimensions inconsistent");

  JitteredChol c1 = jittered_chol(obs_cov);
  JitteredChol c2 = jittered_chol(prior.cov);

  Mat c1inv_A = c1.solve(map);
  Mat post_prec = hermitized(map.adjoint() * c1inv_A + c2.inverse());
  JitteredChol prec_ch = jittered_chol(post_prec);
  Gaussian post;
  post.cov = hermitized(prec_ch.inverse());
  post.mean = prec_ch.solve(map.adjoint() * c1.solve(obs_mean) + c2.solve(prior.mean));

  Mat marg_cov = hermitized(obs_cov + map * prior.cov * map.adjoint());
  double ev = log_gaussian_pdf(obs_mean, map * prior.mean, marg_cov);
  return {std::move(post), ev};
}

Gaussian multiply(const Gaussian& a, const Gaussian& b) {
  if (a.vacuous) return b;
  if (b.vacuous) return a;
  if (a.dim() != b.dim()) throw std::invalid_argument("multiply: dimension mismatch");
  JitteredChol ca = jittered_chol(a.cov);
  JitteredChol cb = jittered_chol(b.cov);
  Mat prec = hermitized(ca.inverse() + cb.inverse());
  JitteredChol cp = jittered_chol(prec);
  Gaussian out;
  out.cov = hermitized(cp.inverse());
  out.mean = cp.solve(ca.solve(a.mean) + cb.solve(b.mean));
  return out;
}

ScalarGaussian multiply(const ScalarGaussian& a, const ScalarGaussian& b) {
  if (a.vacuous()) return b;
  if (b.vacuous()) return a;
  double p = 1.0 / a.var + 1.0 / b.var;
  double v = 1.0 / p;
  return {(a.mean / a.var + b.mean / b.var) * v, v};
}

Gaussian gaussian_ratio(const Gaussian& num, const Gaussian& den, double var_floor) {
  if (den.vacuous) return num;
  if (num.vacuous) throw std::invalid_argument("gaussian_ratio: vacuous numerator");
  if (num.dim() != den.dim()) throw std::invalid_argument("gaussian_ratio: dimension mismatch");

  JitteredChol cn = jittered_chol(num.cov);
  JitteredChol cd = jittered_chol(den.cov);
  Mat jn = cn.inverse(), jd = cd.inverse();
  Mat j = hermitized(jn - jd);
  Vec h = cn.solve(num.mean) - cd.solve(den.mean);

  double jscale = std::max(jn.cwiseAbs().maxCoeff(), jd.cwiseAbs().maxCoeff());
  if (j.cwiseAbs().maxCoeff() <= 1e-12 * jscale) return Gaussian::flat(num.dim());

  Eigen::SelfAdjointEigenSolver<Mat> es(j);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("gaussian_ratio: eigensolver failed", cond_estimate(j));

  Eigen::VectorXd vars(j.rows());
  for (Eigen::Index i = 0; i < j.rows(); ++i) {
    double lam = es.eigenvalues()(i);
    vars(i) = lam > 0.0 ? 1.0 / lam : var_floor;
  }
  Gaussian out;
  const Mat& u = es.eigenvectors();
  out.cov = hermitized(u * vars.asDiagonal() * u.adjoint());
  out.mean = out.cov * h;
  return out;
}

ScalarGaussian gaussian_ratio(const ScalarGaussian& num, const ScalarGaussian& den,
                              double var_floor) {
  if (den.vacuous()) return num;
  if (num.vacuous()) throw std::invalid_argument("gaussian_ratio: vacuous numerator");
  double pn = 1.0 / num.var, pd = 1.0 / den.var;
  double p = pn - pd;
  cxd h = num.mean * pn - den.mean * pd;
  if (std::abs(p) <= 1e-12 * std::max(pn, pd)) return ScalarGaussian::flat();
  double v = p > 0.0 ? 1.0 / p : var_floor;
  return {h * v, v};
}

BlockDiagGaussian project_blockdiag(const Vec& mean, const Mat& full_cov, int num_blocks,
                                    int block_dim) {
  if (mean.size() != static_cast<Eigen::Index>(num_blocks) * block_dim ||
      full_cov.rows() != mean.size())
    throw std::invalid_argument("project_blockdiag: dimension mismatch");
  BlockDiagGaussian out;
  out.mean = mean;
  out.blocks.reserve(num_blocks);
  for (int t = 0; t < num_blocks; ++t)
    out.blocks.push_back(hermitized(full_cov.block(t * block_dim, t * block_dim, block_dim, block_dim)));
  return out;
}

double min_eigenvalue(const Mat& hermitian) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitized(hermitian), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace cfmimo

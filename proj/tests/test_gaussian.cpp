#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cfmimo/gaussian.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace cfmimo;

namespace {
Gaussian scalar_gaussian(cxd m, double v) {
  Gaussian g;
  g.mean = Vec::Constant(1, m);
  g.cov = Mat::Constant(1, 1, v);
  return g;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }
}  // namespace

TEST_CASE("gaussian_product scalar cases") {
  // symmetric scalar case: equal precisions split the difference
  auto [post, ev] = gaussian_product(Vec::Constant(1, cxd(0, 0)), Mat::Identity(1, 1),
                                     Mat::Identity(1, 1), scalar_gaussian(0.0, 1.0));
  CHECK(std::abs(post.mean(0)) < 1e-9);
  CHECK(post.cov(0, 0).real() == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(ev == doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-8));

  // m1=2, A=2, C1=1, prior (0,1): C3 = (4+1)^-1 = 0.2, m3 = 0.2*2*2 = 0.8,
  // evidence ln CN(2 | 0, 5)
  auto [post2, ev2] = gaussian_product(Vec::Constant(1, cxd(2, 0)), Mat::Constant(1, 1, 2.0),
                                       Mat::Identity(1, 1), scalar_gaussian(0.0, 1.0));
  CHECK(post2.mean(0).real() == doctest::Approx(0.8).epsilon(1e-8));
  CHECK(post2.cov(0, 0).real() == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(ev2 == doctest::Approx(-std::log(5.0 * M_PI) - 4.0 / 5.0).epsilon(1e-8));
}

TEST_CASE("gaussian_product identity maps, equal precisions") {
  std::mt19937_64 rng(7);
  const int d = 4;
  Vec m1 = oracles::random_cvec(rng, d);
  Gaussian prior;
  prior.mean = Vec::Zero(d);
  prior.cov = Mat::Identity(d, d);
  auto [post, ev] = gaussian_product(m1, Mat::Identity(d, d), Mat::Identity(d, d), prior);
  CHECK((post.mean - 0.5 * m1).norm() < 1e-8);
  CHECK((post.cov - 0.5 * Mat::Identity(d, d)).norm() < 1e-8);
}

TEST_CASE("gaussian_product evidence factorization holds pointwise") {
  // exp(evidence) * posterior(x) must equal CN(m1|Ax,C1)*CN(x|m2,C2)
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    cxd m1 = oracles::std_cn(rng), m2 = oracles::std_cn(rng), a = oracles::std_cn(rng);
    double c1 = 0.2 + std::uniform_real_distribution<>(0., 2.)(rng);
    double c2 = 0.2 + std::uniform_real_distribution<>(0., 2.)(rng);
    auto [post, ev] =
        gaussian_product(Vec::Constant(1, m1), Mat::Constant(1, 1, a), Mat::Constant(1, 1, c1),
                         scalar_gaussian(m2, c2));
    for (int i = 0; i < 20; ++i) {
      cxd x = 2.0 * oracles::std_cn(rng);
      double lhs = ev + log_gaussian_pdf(x, post.mean(0), post.cov(0, 0).real());
      double rhs = log_gaussian_pdf(m1, a * x, c1) + log_gaussian_pdf(x, m2, c2);
      CHECK(rel_err(lhs, rhs) < 1e-8);
    }
  }
}

TEST_CASE("gaussian_product rejects non-Hermitian covariance") {
  Mat bad(2, 2);
  bad << cxd(1, 0), cxd(0.5, 0.1), cxd(0.1, 0.3), cxd(1, 0);
  Gaussian prior;
  prior.mean = Vec::Zero(2);
  prior.cov = Mat::Identity(2, 2);
  CHECK_THROWS_AS(gaussian_product(Vec::Zero(2), Mat::Identity(2, 2), bad, prior),
                  std::invalid_argument);
}

TEST_CASE("gaussian_ratio basics") {
  // dividing by the flat message is the identity
  Gaussian num = scalar_gaussian(1.0, 0.5);
  Gaussian out = gaussian_ratio(num, Gaussian::flat(1), 1e-8);
  CHECK(out.mean(0).real() == doctest::Approx(1.0));
  CHECK(out.cov(0, 0).real() == doctest::Approx(0.5));

  // precisions 2 - 1 = 1
  out = gaussian_ratio(scalar_gaussian(0.0, 0.5), scalar_gaussian(0.0, 1.0), 1e-8);
  CHECK(out.cov(0, 0).real() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(out.mean(0)) < 1e-9);

  // self-cancellation
  out = gaussian_ratio(scalar_gaussian(0.7, 0.3), scalar_gaussian(0.7, 0.3), 1e-8);
  CHECK(out.vacuous);

  ScalarGaussian s = gaussian_ratio(ScalarGaussian::of(0.0, 0.5), ScalarGaussian::of(0.0, 1.0), 1e-8);
  CHECK(s.var == doctest::Approx(1.0).epsilon(1e-8));
  s = gaussian_ratio(ScalarGaussian::of(0.3, 0.4), ScalarGaussian::flat(), 1e-8);
  CHECK(s.var == doctest::Approx(0.4));
  s = gaussian_ratio(ScalarGaussian::of(0.3, 0.4), ScalarGaussian::of(0.3, 0.4), 1e-8);
  CHECK(s.vacuous());
}

TEST_CASE("multiply then ratio round-trips") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 40; ++rep) {
    int d = 1 + static_cast<int>(rng() % 8);
    Gaussian g1{oracles::random_cvec(rng, d), oracles::random_psd(rng, d), false};
    Gaussian g2{oracles::random_cvec(rng, d), oracles::random_psd(rng, d), false};
    Gaussian prod = multiply(g1, g2);
    Gaussian back = gaussian_ratio(prod, g2, 0.0);
    CHECK((back.mean - g1.mean).norm() / g1.mean.norm() < 1e-8);
    CHECK((back.cov - g1.cov).cwiseAbs().maxCoeff() / g1.cov.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("gaussian_ratio floors negative precision directions") {
  // wider numerator than denominator: precision difference is negative
  Gaussian num = scalar_gaussian(0.0, 2.0);
  Gaussian den = scalar_gaussian(0.5, 1.0);
  double floor = 1e-8;
  Gaussian out = gaussian_ratio(num, den, floor);
  CHECK(out.cov(0, 0).real() == doctest::Approx(floor));
}

TEST_CASE("log_gaussian_pdf cases and properties") {
  CHECK(log_gaussian_pdf(Vec::Zero(1), Vec::Zero(1), Mat::Identity(1, 1)) ==
        doctest::Approx(-std::log(M_PI)).epsilon(1e-8));
  CHECK(log_gaussian_pdf(Vec::Zero(1), Vec::Zero(1), 2.0 * Mat::Identity(1, 1)) ==
        doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-8));

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    int d = 1 + static_cast<int>(rng() % 16);
    Vec x = oracles::random_cvec(rng, d), m = oracles::random_cvec(rng, d);
    Mat c = oracles::random_psd(rng, d);
    double lib = log_gaussian_pdf(x, m, c);
    double dense = oracles::dense_log_gaussian_pdf(x, m, c);
    CHECK(rel_err(lib, dense) < 1e-8);

    Vec shift = oracles::random_cvec(rng, d);
    CHECK(rel_err(log_gaussian_pdf(x + shift, m + shift, c), lib) < 1e-8);
  }
}

TEST_CASE("project_blockdiag") {
  // T=2, N=1: keeps the diagonal entries
  Mat cov(2, 2);
  cov << 2.0, 0.5, 0.5, 3.0;
  Vec mean(2);
  mean << cxd(1, 1), cxd(2, -1);
  BlockDiagGaussian b = project_blockdiag(mean, cov, 2, 1);
  CHECK(b.blocks[0](0, 0).real() == doctest::Approx(2.0));
  CHECK(b.blocks[1](0, 0).real() == doctest::Approx(3.0));
  CHECK((b.mean - mean).norm() == doctest::Approx(0.0));

  // idempotence: block-diagonal input is unchanged, per-block moments exact
  std::mt19937_64 rng(31);
  const int T = 3, N = 2;
  Mat full = Mat::Zero(T * N, T * N);
  for (int t = 0; t < T; ++t)
    full.block(t * N, t * N, N, N) = oracles::random_psd(rng, N);
  Vec m = oracles::random_cvec(rng, T * N);
  BlockDiagGaussian p = project_blockdiag(m, full, T, N);
  for (int t = 0; t < T; ++t)
    CHECK((p.blocks[t] - full.block(t * N, t * N, N, N)).cwiseAbs().maxCoeff() < 1e-14);

  // off-diagonal-in-time information is discarded, first moment kept
  Mat noisy = full;
  noisy.block(0, N, N, N).setConstant(cxd(0.3, 0.1));
  noisy.block(N, 0, N, N).setConstant(cxd(0.3, -0.1));
  BlockDiagGaussian q = project_blockdiag(m, hermitized(noisy), T, N);
  for (int t = 0; t < T; ++t)
    CHECK((q.blocks[t] - full.block(t * N, t * N, N, N)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((q.mean - m).norm() == doctest::Approx(0.0));
}

TEST_CASE("covariance outputs stay Hermitian PSD under the jitter policy") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 30; ++rep) {
    int d = 1 + static_cast<int>(rng() % 6);
    Gaussian g1{oracles::random_cvec(rng, d), oracles::random_psd(rng, d), false};
    Gaussian g2{oracles::random_cvec(rng, d), oracles::random_psd(rng, d), false};
    Gaussian prod = multiply(g1, g2);
    check_hermitian(prod.cov);
    CHECK(min_eigenvalue(prod.cov) >= 0.0);

    Gaussian rat = gaussian_ratio(prod, g2, 1e-10);
    check_hermitian(rat.cov);
    CHECK(min_eigenvalue(rat.cov) >= 0.0);
  }
}

TEST_CASE("scalar multiply handles the vacuous sentinel exactly") {
  ScalarGaussian flat = ScalarGaussian::flat();
  ScalarGaussian g = ScalarGaussian::of(cxd(1, 2), 0.5);
  ScalarGaussian out = multiply(flat, g);
  CHECK(out.mean == g.mean);
  CHECK(out.var == g.var);
  out = multiply(g, ScalarGaussian::of(cxd(0, 0), 0.5));
  CHECK(out.var == doctest::Approx(0.25));
  CHECK(out.mean.real() == doctest::Approx(0.5));
}

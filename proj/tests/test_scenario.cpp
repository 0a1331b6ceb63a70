#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cfmimo/scenario.hpp"

#include <cmath>
#include <complex>
#include <fstream>

using namespace cfmimo;

TEST_CASE("pathloss_variance") {
  CHECK(pathloss_variance(1.0) == doctest::Approx(std::pow(10.0, -3.05)).epsilon(1e-12));
  CHECK(pathloss_variance(10.0) == doctest::Approx(std::pow(10.0, -6.72)).epsilon(1e-12));
  CHECK(pathloss_variance(3.0) > pathloss_variance(7.0));
  CHECK(pathloss_variance(50.0) > pathloss_variance(51.0));
  CHECK_THROWS_AS(pathloss_variance(0.0), std::invalid_argument);
  CHECK_THROWS_AS(pathloss_variance(-2.0), std::invalid_argument);
}

TEST_CASE("constellation is zero mean with exact per-symbol power") {
  for (const char* name : {"4qam", "16qam"}) {
    double sx2 = dbm_to_linear(14.0);
    auto s = make_constellation(name, sx2);
    cxd mean = 0.0;
    double power = 0.0;
    for (cxd v : s) {
      mean += v;
      power += std::norm(v);
    }
    CHECK(std::abs(mean) < 1e-12 * std::sqrt(sx2));
    CHECK(power / s.size() == doctest::Approx(sx2).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_constellation("8psk", 1.0), std::invalid_argument);
}

TEST_CASE("pilot book rows are orthogonal with norm P*sigma_x2") {
  const int P = 8;
  const double sx2 = 2.5;
  Mat book = pilot_book(P, sx2);
  Mat gram = book * book.adjoint();
  for (int a = 0; a < P; ++a)
    for (int b = 0; b < P; ++b)
      CHECK(std::abs(gram(a, b) - (a == b ? P * sx2 : 0.0)) < 1e-10 * P * sx2);
}

namespace {
ScenarioConfig tiny_config() {
  ScenarioConfig cfg;
  cfg.area_side = 200.0;
  cfg.num_aps = 2;
  cfg.antennas_per_ap = 2;
  cfg.num_users = 4;
  cfg.pilot_len = 2;
  cfg.data_len = 8;
  cfg.users_per_pilot = 2;
  return cfg;
}
}  // namespace

TEST_CASE("config validation") {
  ScenarioConfig cfg = tiny_config();
  cfg.validate();
  cfg.users_per_pilot = 3;  // 4 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.pilot_len = 1;  // 2 groups > P
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.sigma_v2 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("ap grid follows the scaled lattice") {
  ScenarioConfig cfg;
  cfg.num_aps = 16;
  cfg.area_side = 400.0;
  Deployment dep = draw_deployment(cfg, 1);
  // 4x4 grid with spacing 400/3, height 10
  CHECK(dep.ap_pos(0, 0) == doctest::Approx(0.0));
  CHECK(dep.ap_pos(0, 1) == doctest::Approx(0.0));
  CHECK(dep.ap_pos(0, 2) == doctest::Approx(10.0));
  CHECK(dep.ap_pos(1, 1) == doctest::Approx(400.0 / 3.0));
  CHECK(dep.ap_pos(15, 0) == doctest::Approx(400.0));
  CHECK(dep.ap_pos(15, 1) == doctest::Approx(400.0));

  cfg.num_aps = 1;
  Deployment solo = draw_deployment(cfg, 1);
  CHECK(solo.ap_pos(0, 0) == doctest::Approx(200.0));
}

TEST_CASE("generate_realization is deterministic in (config, seed)") {
  ScenarioConfig cfg = tiny_config();
  Realization a = generate_realization(cfg, 42);
  Realization b = generate_realization(cfg, 42);
  CHECK(a.u_true == b.u_true);
  for (int l = 0; l < cfg.num_aps; ++l) {
    CHECK((a.H_true[l] - b.H_true[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.Yp[l] - b.Yp[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.Y[l] - b.Y[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  Realization c = generate_realization(cfg, 43);
  CHECK((a.Y[0] - c.Y[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("noiseless single active user reproduces Y = h x^T") {
  ScenarioConfig cfg;
  cfg.num_aps = 2;
  cfg.antennas_per_ap = 2;
  cfg.num_users = 1;
  cfg.users_per_pilot = 1;
  cfg.pilot_len = 2;
  cfg.data_len = 5;
  cfg.activity_prob = 1.0;
  cfg.sigma_v2 = 0.0;  // limit case, generation only
  Realization r = generate_realization(cfg, 3);
  REQUIRE(r.u_true(0) == 1);
  for (int l = 0; l < 2; ++l) {
    Mat expect = r.H_true[l].col(0) * r.X.row(0);
    CHECK((r.Y[l] - expect).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("all users inactive and no noise gives zero observations") {
  ScenarioConfig cfg = tiny_config();
  cfg.activity_prob = 0.0;
  cfg.sigma_v2 = 0.0;
  Realization r = generate_realization(cfg, 9);
  for (int l = 0; l < cfg.num_aps; ++l) {
    CHECK(r.Y[l].cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.Yp[l].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("channel sample covariance matches Xi within 2%") {
  ScenarioConfig cfg;
  cfg.num_aps = 1;
  cfg.antennas_per_ap = 2;
  cfg.num_users = 1;
  cfg.users_per_pilot = 1;
  cfg.pilot_len = 1;
  cfg.data_len = 0;
  auto dep = std::make_shared<Deployment>(draw_deployment(cfg, 77));
  const Mat xi = dep->xi[0][0];

  const int trials = 100000;
  Mat acc = Mat::Zero(2, 2);
  for (int i = 0; i < trials; ++i) {
    Realization r = draw_realization(dep, cfg, seed_combine(123, i));
    Vec h = r.H_true[0].col(0);
    acc += h * h.adjoint();
  }
  acc /= static_cast<double>(trials);
  CHECK((acc - xi).cwiseAbs().maxCoeff() < 0.02 * xi.cwiseAbs().maxCoeff());
}

TEST_CASE("despreading recovers the group channel sums") {
  // two orthogonal groups, no noise: group-g output is exactly that group's channel
  ScenarioConfig cfg;
  cfg.num_aps = 1;
  cfg.antennas_per_ap = 2;
  cfg.num_users = 2;
  cfg.users_per_pilot = 1;
  cfg.pilot_len = 2;
  cfg.data_len = 0;
  cfg.activity_prob = 1.0;
  cfg.sigma_v2 = 0.0;
  Realization r = generate_realization(cfg, 5);
  DespreadObs obs = despread_all(r, cfg);
  for (int g = 0; g < 2; ++g) {
    int k = r.pilot_groups[g][0];
    CHECK((obs.ytilde[0][g] - r.H_true[0].col(k)).cwiseAbs().maxCoeff() <
          1e-12 * r.H_true[0].col(k).norm());
  }
}

TEST_CASE("despread noise variance matches sigma_v2/(P sigma_x2)") {
  ScenarioConfig cfg;
  cfg.num_aps = 1;
  cfg.antennas_per_ap = 1;
  cfg.num_users = 1;
  cfg.users_per_pilot = 1;
  cfg.pilot_len = 2;
  cfg.data_len = 0;
  cfg.activity_prob = 0.0;  // noise-only observations
  cfg.sigma_x2 = 2.0;
  cfg.sigma_v2 = 0.5;
  auto dep = std::make_shared<Deployment>(draw_deployment(cfg, 4));
  Mat book = pilot_book(cfg.pilot_len, cfg.sigma_x2);

  const int trials = 100000;
  double acc = 0.0;
  for (int i = 0; i < trials; ++i) {
    Realization r = draw_realization(dep, cfg, seed_combine(99, i));
    Vec y = despread(r.Yp[0], book, 0, cfg.sigma_x2);
    acc += std::norm(y(0));
  }
  acc /= static_cast<double>(trials);
  double want = cfg.despread_noise_var();
  CHECK(std::abs(acc - want) < 0.02 * want);
}

TEST_CASE("realization dump writes parseable JSON") {
  ScenarioConfig cfg = tiny_config();
  Realization r = generate_realization(cfg, 17);
  std::string path = "/tmp/cfmimo_test_realization.json";
  dump_realization_json(r, cfg, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string first;
  std::getline(in, first);
  CHECK(first.find('{') != std::string::npos);
}

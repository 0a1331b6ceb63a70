#include "cfmimo/scenario.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace cfmimo {

namespace {
constexpr double kPi = 3.14159265358979323846;

cxd std_cn(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double re = n(rng);
  double im = n(rng);
  return cxd(re, im) / std::sqrt(2.0);
}
}  // namespace

double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }

double pathloss_variance(double d_m, double const_db, double slope_db) {
  if (d_m <= 0.0) throw std::invalid_argument("pathloss_variance: d must be > 0");
  return std::pow(10.0, (const_db - slope_db * std::log10(d_m)) / 10.0);
}

std::vector<cxd> make_constellation(const std::string& name, double sigma_x2) {
  double sx = std::sqrt(sigma_x2);
  std::vector<cxd> s;
  if (name == "4qam") {
    double a = sx / std::sqrt(2.0);
    s = {{a, a}, {a, -a}, {-a, a}, {-a, -a}};
  } else if (name == "16qam") {
    double a = sx / std::sqrt(10.0);
    for (int i : {-3, -1, 1, 3})
      for (int q : {-3, -1, 1, 3}) s.emplace_back(a * i, a * q);
  } else {
    throw std::invalid_argument("unknown constellation: " + name);
  }
  return s;
}

void ScenarioConfig::validate() const {
  if (num_aps < 1 || antennas_per_ap < 1 || num_users < 1)
    throw std::invalid_argument("config: L, N, Kbar must be >= 1");
  if (pilot_len < 1 || data_len < 0) throw std::invalid_argument("config: bad P or T");
  if (users_per_pilot < 1 || num_users % users_per_pilot != 0)
    throw std::invalid_argument("config: Kbar must be a multiple of users_per_pilot");
  if (num_groups() > pilot_len)
    throw std::invalid_argument("config: need P >= number of pilot groups");
  if (sigma_x2 <= 0.0 || sigma_v2 <= 0.0)
    throw std::invalid_argument("config: powers must be positive");
  if (activity_prob < 0.0 || activity_prob > 1.0)
    throw std::invalid_argument("config: activity_prob out of [0,1]");
  if (area_side <= 0.0 || ap_height < 0.0)
    throw std::invalid_argument("config: bad geometry");
  make_constellation(constellation, sigma_x2);  // name check
}

Mat pilot_book(int pilot_len, double sigma_x2) {
  // DFT rows scaled so each symbol has power sigma_x2
  Mat book(pilot_len, pilot_len);
  double sx = std::sqrt(sigma_x2);
  for (int g = 0; g < pilot_len; ++g)
    for (int p = 0; p < pilot_len; ++p)
      book(g, p) = sx * std::exp(cxd(0.0, -2.0 * kPi * g * p / pilot_len));
  return book;
}

Deployment draw_deployment(const ScenarioConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int L = cfg.num_aps, N = cfg.antennas_per_ap, K = cfg.num_users;

  Deployment dep;
  // APs on the square grid {(area*i/(n-1), area*j/(n-1))} with n = ceil(sqrt(L)),
  // row-major, first L points; a single AP sits at the center.
  dep.ap_pos.resize(L, 3);
  int grid_n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(L))));
  int idx = 0;
  for (int i = 0; i < grid_n && idx < L; ++i) {
    for (int j = 0; j < grid_n && idx < L; ++j, ++idx) {
      double step = grid_n > 1 ? cfg.area_side / (grid_n - 1) : 0.0;
      double x = grid_n > 1 ? i * step : cfg.area_side / 2.0;
      double y = grid_n > 1 ? j * step : cfg.area_side / 2.0;
      dep.ap_pos.row(idx) << x, y, cfg.ap_height;
    }
  }

  std::uniform_real_distribution<double> unif(0.0, cfg.area_side);
  dep.ut_pos.resize(K, 2);
  for (int k = 0; k < K; ++k) {
    dep.ut_pos(k, 0) = unif(rng);
    dep.ut_pos(k, 1) = unif(rng);
  }

  dep.xi.assign(L, std::vector<Mat>(K));
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      double dx = dep.ap_pos(l, 0) - dep.ut_pos(k, 0);
      double dy = dep.ap_pos(l, 1) - dep.ut_pos(k, 1);
      double dz = dep.ap_pos(l, 2);
      double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      double v = pathloss_variance(d, cfg.pathloss_const_db, cfg.pathloss_slope_db);
      dep.xi[l][k] = v * Mat::Identity(N, N);
    }
  }
  return dep;
}

Realization draw_realization(std::shared_ptr<const Deployment> dep, const ScenarioConfig& cfg,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int L = cfg.num_aps, N = cfg.antennas_per_ap, K = cfg.num_users;
  const int P = cfg.pilot_len, T = cfg.data_len, G = cfg.num_groups();

  Realization r;
  r.dep = std::move(dep);

  // pilot assignment: random permutation, consecutive chunks share a sequence
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  r.pilot_of_user.assign(K, -1);
  r.pilot_groups.assign(G, {});
  for (int g = 0; g < G; ++g) {
    for (int j = 0; j < cfg.users_per_pilot; ++j) {
      int k = perm[g * cfg.users_per_pilot + j];
      r.pilot_of_user[k] = g;
      r.pilot_groups[g].push_back(k);
    }
    std::sort(r.pilot_groups[g].begin(), r.pilot_groups[g].end());
  }

  std::bernoulli_distribution act(cfg.activity_prob);
  r.u_true.resize(K);
  for (int k = 0; k < K; ++k) r.u_true(k) = act(rng) ? 1 : 0;

  r.H_true.assign(L, Mat(N, K));
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      Vec w(N);
      for (int n = 0; n < N; ++n) w(n) = std_cn(rng);
      Eigen::LLT<Mat> llt(r.dep->xi[l][k]);
      if (llt.info() == Eigen::Success) {
        r.H_true[l].col(k) = llt.matrixL() * w;
      } else {
        // PSD but singular covariance: eigen square root
        Eigen::SelfAdjointEigenSolver<Mat> es(r.dep->xi[l][k]);
        r.H_true[l].col(k) =
            es.eigenvectors() *
            es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cast<cxd>().asDiagonal() *
            es.eigenvectors().adjoint() * w;
      }
    }
  }

  Mat book = pilot_book(P, cfg.sigma_x2);
  r.Xp.resize(K, P);
  for (int k = 0; k < K; ++k) r.Xp.row(k) = book.row(r.pilot_of_user[k]);

  auto symbols = make_constellation(cfg.constellation, cfg.sigma_x2);
  std::uniform_int_distribution<int> sym(0, static_cast<int>(symbols.size()) - 1);
  r.X.resize(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) r.X(k, t) = symbols[sym(rng)];

  Mat HU(N, K);
  double sv = std::sqrt(cfg.sigma_v2);
  r.Yp.assign(L, Mat());
  r.Y.assign(L, Mat());
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k)
      HU.col(k) = r.H_true[l].col(k) * static_cast<double>(r.u_true(k));
    r.Yp[l] = HU * r.Xp;
    r.Y[l] = HU * r.X;
    for (int n = 0; n < N; ++n) {
      for (int p = 0; p < P; ++p) r.Yp[l](n, p) += sv * std_cn(rng);
      for (int t = 0; t < T; ++t) r.Y[l](n, t) += sv * std_cn(rng);
    }
  }
  return r;
}

Realization generate_realization(const ScenarioConfig& cfg, std::uint64_t seed) {
  auto dep = std::make_shared<Deployment>(draw_deployment(cfg, seed_combine(seed, 0xD0E1u)));
  return draw_realization(std::move(dep), cfg, seed_combine(seed, 0x4EA1u));
}

Vec despread(const Mat& yp_l, const Mat& book, int g, double sigma_x2) {
  double scale = 1.0 / (static_cast<double>(book.cols()) * sigma_x2);
  return scale * (yp_l * book.row(g).conjugate().transpose());
}

DespreadObs despread_all(const Realization& r, const ScenarioConfig& cfg) {
  const int L = cfg.num_aps, G = cfg.num_groups(), P = cfg.pilot_len;
  Mat book = pilot_book(P, cfg.sigma_x2);

  // orthogonality contract, checked once per run
  Mat gram = book * book.adjoint();
  double diag = P * cfg.sigma_x2;
  for (int a = 0; a < P; ++a)
    for (int b = 0; b < P; ++b) {
      double want = a == b ? diag : 0.0;
      if (std::abs(gram(a, b) - want) > 1e-8 * diag)
        throw std::invalid_argument("despread_all: pilot sequences not orthogonal");
    }

  DespreadObs obs;
  obs.noise_var = cfg.despread_noise_var();
  obs.ytilde.assign(L, std::vector<Vec>(G));
  for (int l = 0; l < L; ++l)
    for (int g = 0; g < G; ++g) obs.ytilde[l][g] = despread(r.Yp[l], book, g, cfg.sigma_x2);
  return obs;
}

namespace {
nlohmann::json cmat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json dmat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}
}  // namespace

void dump_realization_json(const Realization& r, const ScenarioConfig& cfg,
                           const std::string& path) {
  nlohmann::json j;
  j["L"] = cfg.num_aps;
  j["N"] = cfg.antennas_per_ap;
  j["Kbar"] = cfg.num_users;
  j["P"] = cfg.pilot_len;
  j["T"] = cfg.data_len;
  j["ap_pos"] = dmat_to_json(r.dep->ap_pos);
  j["ut_pos"] = dmat_to_json(r.dep->ut_pos);
  j["pilot_of_user"] = r.pilot_of_user;
  j["u_true"] = std::vector<int>(r.u_true.data(), r.u_true.data() + r.u_true.size());
  j["Xp"] = cmat_to_json(r.Xp);
  j["X"] = cmat_to_json(r.X);
  for (int l = 0; l < cfg.num_aps; ++l) {
    j["H_true"].push_back(cmat_to_json(r.H_true[l]));
    j["Yp"].push_back(cmat_to_json(r.Yp[l]));
    j["Y"].push_back(cmat_to_json(r.Y[l]));
    nlohmann::json xs = nlohmann::json::array();
    for (int k = 0; k < cfg.num_users; ++k) xs.push_back(cmat_to_json(r.dep->xi[l][k]));
    j["xi"].push_back(std::move(xs));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(1) << "\n";
}

}  // namespace cfmimo

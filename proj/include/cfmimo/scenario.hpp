#pragma once

// Scenario generation: AP/user deployments, distance-based channel
// covariances, pilot codebook and assignment, activity, symbols, noise,
// and the per-AP received blocks  [Yp_l  Y_l] = H_l U [Xp  X] + V.
// Despreading correlates the pilot block with one pilot sequence and
// yields the per-group observation  ytilde_{p,lg} = sum_{k in G_g} h_lk u_k + vtilde.

#include "cfmimo/types.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cfmimo {

double dbm_to_linear(double dbm);

// Distance-based channel-gain variance, linear per antenna:
// 10^((const_db - slope_db*log10(d/1m))/10). d must be positive.
double pathloss_variance(double d_m, double const_db = -30.5, double slope_db = 36.7);

// Zero-mean symbol set with per-symbol average power sigma_x2.
// Supported names: "4qam", "16qam".
std::vector<cxd> make_constellation(const std::string& name, double sigma_x2);

struct ScenarioConfig {
  // deployment
  double area_side = 400.0;   // meters
  int num_aps = 16;           // L
  int antennas_per_ap = 2;    // N
  int num_users = 16;         // Kbar
  double ap_height = 10.0;    // meters

  // frame
  int pilot_len = 8;          // P
  int data_len = 20;          // T

  // powers (linear mW) and fading
  double sigma_x2 = dbm_to_linear(14.0);
  double sigma_v2 = dbm_to_linear(-96.0);
  double pathloss_const_db = -30.5;
  double pathloss_slope_db = 36.7;

  std::string constellation = "4qam";
  double activity_prob = 0.5;
  int users_per_pilot = 2;
  std::uint64_t rng_seed = 1;

  // algorithm hyperparameters (see README for the full key table);
  // damping values are the weight on the fresh update, 1 = undamped
  int activity_max_passes = 20;
  int vlep_max_iters = 50;
  double vlep_tol = 1e-4;
  double vlep_damping = 1.0;
  int vbep_max_sweeps = 30;
  double vbep_tol = 1e-4;
  double vbep_damping = 0.7;

  int num_groups() const { return num_users / users_per_pilot; }
  double despread_noise_var() const { return sigma_v2 / (pilot_len * sigma_x2); }

  // Throws std::invalid_argument on violated invariants
  // (Kbar = users_per_pilot * groups, P >= groups, positive powers, ...).
  void validate() const;
};

// Per-setup state: positions and the per-link channel covariances.
// xi[l][k] is Hermitian PSD; the generator fills pathloss * I_N but any
// Hermitian covariance is honored downstream.
struct Deployment {
  Eigen::MatrixXd ap_pos;               // L x 3
  Eigen::MatrixXd ut_pos;               // Kbar x 2 (ground level)
  std::vector<std::vector<Mat>> xi;     // [l][k], N x N
};

// One drawn world plus its received signals.
struct Realization {
  std::shared_ptr<const Deployment> dep;
  std::vector<int> pilot_of_user;             // Kbar -> group index
  std::vector<std::vector<int>> pilot_groups; // group -> user indices
  Eigen::VectorXi u_true;                     // Kbar, entries {0,1}
  std::vector<Mat> H_true;                    // [l] N x Kbar
  Mat Xp;                                     // Kbar x P
  Mat X;                                      // Kbar x T
  std::vector<Mat> Yp;                        // [l] N x P
  std::vector<Mat> Y;                         // [l] N x T
};

// Rows are mutually orthogonal pilot sequences with ||row||^2 = P*sigma_x2
// (scaled DFT matrix).
Mat pilot_book(int pilot_len, double sigma_x2);

Deployment draw_deployment(const ScenarioConfig& cfg, std::uint64_t seed);
Realization draw_realization(std::shared_ptr<const Deployment> dep, const ScenarioConfig& cfg,
                             std::uint64_t seed);

// draw_deployment + draw_realization with sub-seeds derived from `seed`.
Realization generate_realization(const ScenarioConfig& cfg, std::uint64_t seed);

// (1/(P*sigma_x2)) * Yp_l * conj(book row g).
Vec despread(const Mat& yp_l, const Mat& book, int g, double sigma_x2);

// All (l, g) despread observations. Verifies pilot orthogonality once.
struct DespreadObs {
  std::vector<std::vector<Vec>> ytilde;  // [l][g]
  double noise_var = 0.0;                // sigma_v2 / (P sigma_x2)
};
DespreadObs despread_all(const Realization& r, const ScenarioConfig& cfg);

// Debug dump, JSON: scalars as-is, matrices as row-major nested arrays,
// complex entries as [re, im]. Layout documented in README.
void dump_realization_json(const Realization& r, const ScenarioConfig& cfg,
                           const std::string& path);

}  // namespace cfmimo

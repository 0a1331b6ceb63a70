#pragma once

// Component-wise iterative ML activity detection from pilot and data
// observations. The objective is L_tot(u) = L_p(u) + Lhat_d(u):
//   L_p    — per-(AP, group) despread pilot log-likelihoods,
//   Lhat_d — per-AP data log-likelihood under the CLT data covariance with
//            cross-AP blocks dropped (block-diagonal approximation).
// Complex-Gaussian -d*ln(pi) constants are dropped throughout; they cancel
// in the coordinate argmax.

#include "cfmimo/gaussian.hpp"
#include "cfmimo/model.hpp"

#include <utility>
#include <vector>

namespace cfmimo {

struct ActivityOptions {
  int max_passes = 20;
};

// Pilot-based posterior of one active user's channel given the activity
// hypothesis: mean m_{h|u} and covariance C_{h|u}.
struct PilotPosterior {
  Vec mean;
  Mat cov;
};

// Despread observation covariance C_{ytilde|u} for one (AP, group) plus the
// posteriors of the group's active members.
struct GroupPilotStats {
  Mat c_y;                                          // C_vtilde + sum_active Xi
  std::vector<std::pair<int, PilotPosterior>> active;  // (user, posterior)
};

GroupPilotStats pilot_posterior(const ModelView& m, int l, int g, const Eigen::VectorXi& u);

// sigma_x2 * (C_{h|u} + m m^H): one AP-diagonal block of the CLT data
// covariance contributed by an active user.
Mat data_dispersion(double sigma_x2, const PilotPosterior& post);

// From-scratch evaluations (sum over (l,g) resp. l), constants dropped.
double log_likelihood_pilot(const ModelView& m, const Eigen::VectorXi& u);
double log_likelihood_data(const ModelView& m, const Eigen::VectorXi& u);
double total_log_likelihood(const ModelView& m, const Eigen::VectorXi& u);

// Incremental evaluator behind the coordinate loop. A flip of user k only
// touches its pilot group's posteriors and every AP's data covariance, so
// those caches are rebuilt per candidate and committed on acceptance.
class IterativeMlState {
 public:
  explicit IterativeMlState(const ModelView& m);

  const Eigen::VectorXi& u() const { return u_; }
  double total() const;

  // L_tot with u_k flipped, minus L_tot as-is.
  double flip_gain(int k) const;
  void apply_flip(int k);

 private:
  struct FlipDelta;
  FlipDelta evaluate_flip(int k) const;

  const ModelView& m_;
  Eigen::VectorXi u_;
  std::vector<std::vector<double>> pilot_term_;  // [l][g]
  std::vector<std::vector<Mat>> dispersion_;     // [l][k], meaningful while active
  std::vector<Mat> b_;                           // [l] data covariance
  std::vector<double> data_term_;                // [l]
  std::vector<Mat> gram_;                        // [l] Y_l Y_l^H, fixed
};

struct ActivityResult {
  Eigen::VectorXi u_hat;
  double log_likelihood = 0.0;
  int passes = 0;
  bool converged = false;
};

// Algorithm: start from u = 0, cycle k = 1..K flipping a coordinate whenever
// it strictly increases L_tot (ties keep the current value); stop after a
// full pass with no change or after max_passes.
ActivityResult iterative_ml(const ModelView& m, const ActivityOptions& opt = {});

}  // namespace cfmimo

#pragma once

// Distributed VL-EP over the pruned model: alternating per-user channel
// estimation that treats every other user as Gaussian interference, with an
// EM-style expectation step over symbols and maximization step over
// channels. Its converged state is the pseudo prior consumed by VB-EP.
//
// Iteration order per round (maximization first):
//   M-step for all (l,k)  ->  interference refresh  ->  E-step for all k.

#include "cfmimo/gaussian.hpp"
#include "cfmimo/model.hpp"

#include <utility>
#include <vector>

namespace cfmimo {

struct VlepOptions {
  int max_iters = 50;
  double tol = 1e-4;     // on max relative channel-mean movement
  double damping = 1.0;  // weight on the fresh update; 1 = undamped
};

struct PseudoPrior {
  int K = 0, T = 0;
  std::vector<std::vector<Gaussian>> channel;  // [l][k] (m_hcheck, C_hcheck)
  Eigen::MatrixXcd sym_mean;                   // K x T m_xcheck
  Eigen::MatrixXd sym_var;                     // K x T tau_xcheck
  Eigen::MatrixXd sym_r;                       // K x T, tau + |m|^2

  ScalarGaussian symbol(int k, int t) const {
    return ScalarGaussian::of(sym_mean(k, t), sym_var(k, t));
  }
};

// Mutable algorithm state; exposed so the individual steps are unit-testable.
struct VlepState {
  std::vector<std::vector<Gaussian>> h;  // [l][k] current channel estimate
  Eigen::MatrixXcd x_mean;               // K x T
  Eigen::MatrixXd x_var;                 // K x T
  // interference caches, refreshed from h between the M- and E-steps
  std::vector<std::vector<Mat>> c_v0;    // [l][k] data noise+interference cov
  std::vector<std::vector<Vec>> mv_p;    // [l][k] pilot interference mean
  std::vector<std::vector<Mat>> cv_p;    // [l][k] pilot interference cov
};

VlepState init_vlep_state(const ModelView& m);

// sigma_v2 I + sum_{k' != k} sigma_x2 (C_h + m_h m_h^H) over the other users.
Mat data_interference_cov(const ModelView& m, const VlepState& s, int l, int k);

// Co-pilot interference: (sum of co-users' means, C_vtilde + sum of covs).
std::pair<Vec, Mat> pilot_interference_stats(const ModelView& m, const VlepState& s, int l,
                                             int k);

void refresh_interference(const ModelView& m, VlepState& s);

// Per-AP symbol evidence: precision m_h^H C_v0^-1 m_h (zero mean gives zero
// precision, i.e. the infinite-variance message) and the precision-weighted
// observations m_h^H C_v0^-1 y_lt.
struct EStepApStats {
  double precision = 0.0;
  Vec weighted_obs;  // length T
};
EStepApStats e_step_ap(const ModelView& m, const VlepState& s, int l, int k);

// Fuses all APs with the Gaussian-relaxed symbol prior CN(0, sigma_x2) and
// writes the posterior mean/variance rows of user k.
void e_step(const ModelView& m, VlepState& s, int k);

// Channel update from pilot residual, data correlation and the prior.
Gaussian m_step(const ModelView& m, const VlepState& s, int l, int k);

PseudoPrior run_vlep(const ModelView& pruned, const VlepOptions& opt = {});

}  // namespace cfmimo

#pragma once

// Pseudo-prior-regularized bilinear VB-EP for joint channel estimation and
// data detection on the pruned model. Variables z_lk = vec(h_lk x_k^T),
// h_lk, x_k; factors are the per-AP data likelihood f_z, the per-group
// pilot-based enhanced prior f_H, the symbol enhanced prior f_x and the
// Dirac delta tying z to (h, x).
//
// One sweep applies, jointly over all (l,k) per line:
//   1. mu_{f_z;z_lk}   residual interference cancellation
//   2. mu_{f_H;h_lk}   pilot likelihood x enhanced channel prior
//   3. b_{dh,lk}       = mu_{f_H;h} * mu_{d;h}
//   4. mu_{d;x_kt}     channel-aware per-symbol extrinsics
//   5. b_{dx,kt}       discrete symbol beliefs (pseudo prior + all APs)
//   6. mu_{d;h_lk}     symbol-aware channel feedback (damped)
//   7. b_{dh,lk}       refresh
//   8. mu_{d;z_lk}     block-diagonal projection ratio (damped)
//
// Variable-to-factor messages are never stored; they equal the complementary
// factor-to-variable messages (mu_{z;d} = mu_{f_z;z} and so on).

#include "cfmimo/gaussian.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/vlep.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace cfmimo {

// Enhanced priors: channel p(h)*pseudo(h) collapsed to one Gaussian per
// (l,k); symbols keep the scalar pseudo prior and the discrete constellation
// prior separate (their product is formed where beliefs are evaluated).
struct EnhancedPriors {
  std::vector<std::vector<Gaussian>> channel;  // [l][k]
  Eigen::MatrixXcd psym_mean;                  // K x T
  Eigen::MatrixXd psym_var;                    // K x T
  std::vector<cxd> constellation;

  ScalarGaussian pseudo_symbol(int k, int t) const {
    return ScalarGaussian::of(psym_mean(k, t), psym_var(k, t));
  }
};

EnhancedPriors build_enhanced_priors(const PseudoPrior& pseudo, const ModelView& pruned);

struct MessageState {
  // factor-to-variable messages
  std::vector<std::vector<BlockDiagGaussian>> fz_z;  // [l][k]
  std::vector<std::vector<BlockDiagGaussian>> dz;    // [l][k]
  std::vector<std::vector<Gaussian>> fh_h;           // [l][k]
  std::vector<std::vector<Gaussian>> dh;             // [l][k]
  std::vector<std::vector<std::vector<ScalarGaussian>>> dx;  // [l][k][t]
  // beliefs
  std::vector<std::vector<Gaussian>> b_h;  // [l][k] b_{dh,lk}
  Eigen::MatrixXcd bx_mean;                // K x T   b_{dx} moments
  Eigen::MatrixXd bx_var;                  // K x T   (diagonal covariance)
  Eigen::MatrixXd bx_r;                    // K x T   var + |mean|^2
};

// mu_{d;z} starts from the pseudo-prior product moments so the first
// interference-cancellation line is already informative; everything else
// starts vacuous.
MessageState init_messages(const ModelView& m, const PseudoPrior& pseudo);

// The individual update families (pure, read the state snapshot):
BlockDiagGaussian update_mu_fz_z(const ModelView& m, const MessageState& s, int l, int k);
Gaussian update_mu_fh_h(const ModelView& m, const EnhancedPriors& ep, const MessageState& s,
                        int l, int k);
std::vector<ScalarGaussian> update_mu_delta_x(const ModelView& m, const MessageState& s, int l,
                                              int k);
Gaussian update_mu_delta_h(const ModelView& m, const MessageState& s, int l, int k);
BlockDiagGaussian update_mu_delta_z(const ModelView& m, const MessageState& s, int l, int k,
                                    double var_floor);

// Discrete posterior over the constellation from the product of a pseudo
// prior and Gaussian messages, evaluated by log-domain enumeration; returns
// exact moments of the normalized posterior.
struct SymbolBelief {
  Eigen::VectorXd probs;
  cxd mean{0.0, 0.0};
  double var = 0.0;
  double r = 0.0;
};
SymbolBelief symbol_belief(std::span<const ScalarGaussian> messages,
                           const ScalarGaussian& pseudo, const std::vector<cxd>& constellation);

// Gaussian-relaxed variant used by the baseline (no finite-alphabet prior):
// fuses the messages with CN(0, sigma_x2) and the pseudo prior.
ScalarGaussian symbol_belief_gaussian(std::span<const ScalarGaussian> messages,
                                      const ScalarGaussian& pseudo, double sigma_x2);

struct VbepHooks {
  // called after the named update line completed for all (l,k), per sweep
  std::function<void(int sweep)> after_fz, after_fh, after_dx, after_bx, after_dh, after_dz;
};

struct VbepOptions {
  int max_sweeps = 30;
  double tol = 1e-4;              // on channel-belief mean movement
  double damping = 0.7;           // moment-domain blend: new = d_new*w + old*(1-w)
  bool discrete_symbols = true;   // false: Gaussian symbol beliefs everywhere
  std::ostream* trace = nullptr;  // per-sweep trace lines
  const VbepHooks* hooks = nullptr;
};

// One Algorithm-3 sweep over the whole state.
void vbep_sweep(const ModelView& m, const EnhancedPriors& ep, MessageState& s,
                const VbepOptions& opt, int sweep_index, double* max_movement);

struct VbepResult {
  std::vector<std::vector<Gaussian>> channel;  // final b_{dh,lk}
  Eigen::MatrixXi decisions;                   // K x T constellation indices
  std::vector<Eigen::MatrixXd> posteriors;     // [k] |S| x T decision beliefs
  int sweeps = 0;
  bool converged = false;
};

VbepResult run_vbep(const ModelView& pruned, const EnhancedPriors& ep,
                    const VbepOptions& opt = {});

}  // namespace cfmimo

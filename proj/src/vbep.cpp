#include "cfmimo/vbep.hpp"

#include <cmath>
#include <ostream>

namespace cfmimo {

namespace {

Gaussian blend(Gaussian fresh, const Gaussian& old, double w) {
  if (w >= 1.0 || fresh.vacuous || old.vacuous) return fresh;
  fresh.mean = w * fresh.mean + (1.0 - w) * old.mean;
  fresh.cov = hermitized(w * fresh.cov + (1.0 - w) * old.cov);
  return fresh;
}

BlockDiagGaussian blend(BlockDiagGaussian fresh, const BlockDiagGaussian& old, double w) {
  if (w >= 1.0 || fresh.vacuous || old.vacuous) return fresh;
  fresh.mean = w * fresh.mean + (1.0 - w) * old.mean;
  for (size_t t = 0; t < fresh.blocks.size(); ++t)
    fresh.blocks[t] = hermitized(w * fresh.blocks[t] + (1.0 - w) * old.blocks[t]);
  return fresh;
}

}  // namespace

EnhancedPriors build_enhanced_priors(const PseudoPrior& pseudo, const ModelView& pruned) {
  EnhancedPriors ep;
  ep.channel.assign(pruned.L, std::vector<Gaussian>(pruned.K));
  for (int l = 0; l < pruned.L; ++l)
    for (int k = 0; k < pruned.K; ++k)
      ep.channel[l][k] =
          multiply(pseudo.channel[l][k], Gaussian{Vec::Zero(pruned.N), pruned.xi[l][k], false});
  ep.psym_mean = pseudo.sym_mean;
  ep.psym_var = pseudo.sym_var;
  ep.constellation = pruned.constellation;
  return ep;
}

MessageState init_messages(const ModelView& m, const PseudoPrior& pseudo) {
  MessageState s;
  s.fz_z.assign(m.L, std::vector<BlockDiagGaussian>(m.K, BlockDiagGaussian::flat(m.T, m.N)));
  s.dz.assign(m.L, std::vector<BlockDiagGaussian>(m.K));
  s.fh_h.assign(m.L, std::vector<Gaussian>(m.K, Gaussian::flat(m.N)));
  s.dh.assign(m.L, std::vector<Gaussian>(m.K, Gaussian::flat(m.N)));
  s.dx.assign(m.L, std::vector<std::vector<ScalarGaussian>>(
                       m.K, std::vector<ScalarGaussian>(m.T)));
  s.b_h.assign(m.L, std::vector<Gaussian>(m.K, Gaussian::flat(m.N)));
  s.bx_mean = Eigen::MatrixXcd::Zero(m.K, m.T);
  s.bx_var = Eigen::MatrixXd::Zero(m.K, m.T);
  s.bx_r = Eigen::MatrixXd::Zero(m.K, m.T);

  // product moments of independent (x, h) under the pseudo prior:
  // mean_t = m_x m_h, cov_t = r_x C_h + tau_x m_h m_h^H
  for (int l = 0; l < m.L; ++l) {
    for (int k = 0; k < m.K; ++k) {
      const Gaussian& h = pseudo.channel[l][k];
      BlockDiagGaussian g;
      g.mean.resize(static_cast<Eigen::Index>(m.T) * m.N);
      g.blocks.resize(m.T);
      for (int t = 0; t < m.T; ++t) {
        g.mean.segment(t * m.N, m.N) = pseudo.sym_mean(k, t) * h.mean;
        g.blocks[t] = hermitized(pseudo.sym_r(k, t) * h.cov +
                                 pseudo.sym_var(k, t) * (h.mean * h.mean.adjoint()));
      }
      s.dz[l][k] = std::move(g);
    }
  }
  return s;
}

BlockDiagGaussian update_mu_fz_z(const ModelView& m, const MessageState& s, int l, int k) {
  for (int kk = 0; kk < m.K; ++kk)
    if (kk != k && s.dz[l][kk].vacuous) return BlockDiagGaussian::flat(m.T, m.N);

  BlockDiagGaussian out;
  out.mean.resize(static_cast<Eigen::Index>(m.T) * m.N);
  out.blocks.resize(m.T);
  for (int t = 0; t < m.T; ++t) {
    Vec mean = m.Y[l].col(t);
    Mat cov = m.sigma_v2 * Mat::Identity(m.N, m.N);
    for (int kk = 0; kk < m.K; ++kk) {
      if (kk == k) continue;
      mean -= s.dz[l][kk].mean_block(t);
      cov += s.dz[l][kk].blocks[t];
    }
    out.mean.segment(t * m.N, m.N) = mean;
    out.blocks[t] = hermitized(cov);
  }
  return out;
}

Gaussian update_mu_fh_h(const ModelView& m, const EnhancedPriors& ep, const MessageState& s,
                        int l, int k) {
  const int g = m.group_of_user[k];
  Vec mean = m.ytilde[l][g];
  Mat cov = m.despread_noise_var * Mat::Identity(m.N, m.N);
  for (int kk : m.groups[g]) {
    if (kk == k) continue;
    Gaussian co = multiply(s.dh[l][kk], ep.channel[l][kk]);  // htilde of the co-user
    mean -= co.mean;
    cov += co.cov;
  }
  return multiply(Gaussian{std::move(mean), hermitized(cov), false}, ep.channel[l][k]);
}

std::vector<ScalarGaussian> update_mu_delta_x(const ModelView& m, const MessageState& s, int l,
                                              int k) {
  std::vector<ScalarGaussian> out(m.T);
  if (s.b_h[l][k].vacuous || s.fz_z[l][k].vacuous) return out;  // all flat
  const Gaussian& bh = s.b_h[l][k];
  Mat corr = bh.cov + bh.mean * bh.mean.adjoint();
  for (int t = 0; t < m.T; ++t) {
    JitteredChol ch = jittered_chol(s.fz_z[l][k].blocks[t]);
    double tr = ch.solve(corr).trace().real();
    if (!(tr > 0.0)) continue;  // zero-mean zero-cov channel: flat message
    double tau = 1.0 / tr;
    cxd mean = tau * bh.mean.dot(ch.solve(Vec(s.fz_z[l][k].mean_block(t))));
    out[t] = ScalarGaussian::of(mean, tau);
  }
  return out;
}

Gaussian update_mu_delta_h(const ModelView& m, const MessageState& s, int l, int k) {
  if (m.T == 0 || s.fz_z[l][k].vacuous) return Gaussian::flat(m.N);
  Mat prec = Mat::Zero(m.N, m.N);
  Vec rhs = Vec::Zero(m.N);
  for (int t = 0; t < m.T; ++t) {
    JitteredChol ch = jittered_chol(s.fz_z[l][k].blocks[t]);
    prec += s.bx_r(k, t) * ch.inverse();
    rhs += std::conj(s.bx_mean(k, t)) * ch.solve(Vec(s.fz_z[l][k].mean_block(t)));
  }
  if (prec.cwiseAbs().maxCoeff() <= 0.0) return Gaussian::flat(m.N);
  JitteredChol cp = jittered_chol(hermitized(prec));
  Gaussian out;
  out.cov = hermitized(cp.inverse());
  out.mean = cp.solve(rhs);
  return out;
}

BlockDiagGaussian update_mu_delta_z(const ModelView& m, const MessageState& s, int l, int k,
                                    double var_floor) {
  if (s.b_h[l][k].vacuous) return BlockDiagGaussian::flat(m.T, m.N);
  const Gaussian& bh = s.b_h[l][k];
  Mat outer = bh.mean * bh.mean.adjoint();

  BlockDiagGaussian out;
  out.mean.resize(static_cast<Eigen::Index>(m.T) * m.N);
  out.blocks.resize(m.T);
  for (int t = 0; t < m.T; ++t) {
    Gaussian belief;
    belief.mean = s.bx_mean(k, t) * bh.mean;
    belief.cov = hermitized(s.bx_r(k, t) * bh.cov + s.bx_var(k, t) * outer);

    Gaussian den;
    den.vacuous = s.fz_z[l][k].vacuous;
    den.mean = s.fz_z[l][k].mean_block(t);
    den.cov = s.fz_z[l][k].blocks[t];

    Gaussian msg = gaussian_ratio(belief, den, var_floor);
    if (msg.vacuous) return BlockDiagGaussian::flat(m.T, m.N);
    out.mean.segment(t * m.N, m.N) = msg.mean;
    out.blocks[t] = std::move(msg.cov);
  }
  return out;
}

SymbolBelief symbol_belief(std::span<const ScalarGaussian> messages,
                           const ScalarGaussian& pseudo, const std::vector<cxd>& constellation) {
  const int S = static_cast<int>(constellation.size());
  Eigen::VectorXd logw = Eigen::VectorXd::Zero(S);
  auto add = [&](const ScalarGaussian& g) {
    if (g.vacuous()) return;
    double v = std::max(g.var, 1e-290);
    for (int i = 0; i < S; ++i) logw(i) -= std::norm(constellation[i] - g.mean) / v;
  };
  add(pseudo);
  for (const auto& g : messages) add(g);

  double mx = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - mx).exp();
  w /= w.sum();

  SymbolBelief b;
  b.probs = w;
  for (int i = 0; i < S; ++i) {
    b.mean += w(i) * constellation[i];
    b.r += w(i) * std::norm(constellation[i]);
  }
  b.var = std::max(b.r - std::norm(b.mean), 0.0);
  return b;
}

ScalarGaussian symbol_belief_gaussian(std::span<const ScalarGaussian> messages,
                                      const ScalarGaussian& pseudo, double sigma_x2) {
  ScalarGaussian out = ScalarGaussian::of(cxd(0.0, 0.0), sigma_x2);
  out = multiply(out, pseudo);
  for (const auto& g : messages) out = multiply(out, g);
  return out;
}

namespace {

// line 7-8: full product over APs plus the symbol priors
void refresh_symbol_beliefs(const ModelView& m, const EnhancedPriors& ep, MessageState& s,
                            bool discrete) {
  std::vector<ScalarGaussian> msgs(m.L);
  for (int k = 0; k < m.K; ++k) {
    for (int t = 0; t < m.T; ++t) {
      for (int l = 0; l < m.L; ++l) msgs[l] = s.dx[l][k][t];
      if (discrete) {
        SymbolBelief b = symbol_belief(msgs, ep.pseudo_symbol(k, t), ep.constellation);
        s.bx_mean(k, t) = b.mean;
        s.bx_var(k, t) = b.var;
        s.bx_r(k, t) = b.r;
      } else {
        ScalarGaussian b = symbol_belief_gaussian(msgs, ep.pseudo_symbol(k, t), m.sigma_x2);
        s.bx_mean(k, t) = b.mean;
        s.bx_var(k, t) = b.var;
        s.bx_r(k, t) = b.var + std::norm(b.mean);
      }
    }
  }
}

}  // namespace

void vbep_sweep(const ModelView& m, const EnhancedPriors& ep, MessageState& s,
                const VbepOptions& opt, int sweep_index, double* max_movement) {
  const double z_floor = 1e-8 * m.sigma_x2;

  std::vector<std::vector<Vec>> prev_bh_mean(m.L, std::vector<Vec>(m.K));
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k)
      prev_bh_mean[l][k] = s.b_h[l][k].vacuous ? Vec::Zero(m.N) : s.b_h[l][k].mean;

  // interference cancellation at the data factor (reads dz only)
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k) s.fz_z[l][k] = update_mu_fz_z(m, s, l, k);
  if (opt.hooks && opt.hooks->after_fz) opt.hooks->after_fz(sweep_index);

  // pilot factor messages (reads dh only)
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k) s.fh_h[l][k] = update_mu_fh_h(m, ep, s, l, k);
  if (opt.hooks && opt.hooks->after_fh) opt.hooks->after_fh(sweep_index);

  // channel beliefs
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k) s.b_h[l][k] = multiply(s.fh_h[l][k], s.dh[l][k]);

  // symbol extrinsics from the delta factor
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k) s.dx[l][k] = update_mu_delta_x(m, s, l, k);
  if (opt.hooks && opt.hooks->after_dx) opt.hooks->after_dx(sweep_index);

  refresh_symbol_beliefs(m, ep, s, opt.discrete_symbols);
  if (opt.hooks && opt.hooks->after_bx) opt.hooks->after_bx(sweep_index);

  // channel feedback from the delta factor (damped)
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k)
      s.dh[l][k] = blend(update_mu_delta_h(m, s, l, k), s.dh[l][k], opt.damping);
  if (opt.hooks && opt.hooks->after_dh) opt.hooks->after_dh(sweep_index);

  // channel belief refresh + movement
  double movement = 0.0;
  for (int l = 0; l < m.L; ++l) {
    for (int k = 0; k < m.K; ++k) {
      s.b_h[l][k] = multiply(s.fh_h[l][k], s.dh[l][k]);
      movement = std::max(movement, (s.b_h[l][k].mean - prev_bh_mean[l][k]).norm() /
                                        (s.b_h[l][k].mean.norm() + 1e-30));
    }
  }
  if (max_movement) *max_movement = movement;

  // z-feedback: blockwise projected-belief ratio (damped)
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k)
      s.dz[l][k] = blend(update_mu_delta_z(m, s, l, k, z_floor), s.dz[l][k], opt.damping);
  if (opt.hooks && opt.hooks->after_dz) opt.hooks->after_dz(sweep_index);
}

VbepResult run_vbep(const ModelView& pruned, const EnhancedPriors& ep, const VbepOptions& opt) {
  const ModelView& m = pruned;
  VbepResult res;
  res.channel.assign(m.L, {});
  res.decisions.resize(m.K, m.T);
  if (m.K == 0) return res;

  PseudoPrior pseudo_view;  // init needs the pseudo product moments
  pseudo_view.K = m.K;
  pseudo_view.T = m.T;
  pseudo_view.sym_mean = ep.psym_mean;
  pseudo_view.sym_var = ep.psym_var;
  pseudo_view.sym_r = ep.psym_var + ep.psym_mean.cwiseAbs2();
  pseudo_view.channel = ep.channel;  // enhanced prior stats seed the z-messages

  MessageState s = init_messages(m, pseudo_view);
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double movement = 0.0;
    vbep_sweep(m, ep, s, opt, sweep, &movement);
    res.sweeps = sweep;
    if (opt.trace) {
      *opt.trace << "sweep=" << sweep << " max_move=" << movement;
      if (opt.discrete_symbols && m.T > 0) {
        *opt.trace << " entropy=";
        std::vector<ScalarGaussian> msgs(m.L);
        for (int k = 0; k < m.K; ++k) {
          double ent = 0.0;
          for (int t = 0; t < m.T; ++t) {
            for (int l = 0; l < m.L; ++l) msgs[l] = s.dx[l][k][t];
            SymbolBelief b = symbol_belief(msgs, ep.pseudo_symbol(k, t), ep.constellation);
            for (int i = 0; i < b.probs.size(); ++i)
              if (b.probs(i) > 0.0) ent -= b.probs(i) * std::log(b.probs(i));
          }
          *opt.trace << (k ? "," : "") << ent / std::max(m.T, 1);
        }
      }
      *opt.trace << "\n";
    }
    if (movement < opt.tol) {
      res.converged = true;
      break;
    }
  }

  res.channel = s.b_h;
  res.posteriors.assign(m.K, Eigen::MatrixXd());
  const int S = static_cast<int>(ep.constellation.size());
  std::vector<ScalarGaussian> msgs(m.L);
  for (int k = 0; k < m.K; ++k) {
    res.posteriors[k].resize(S, m.T);
    for (int t = 0; t < m.T; ++t) {
      for (int l = 0; l < m.L; ++l) msgs[l] = s.dx[l][k][t];
      if (opt.discrete_symbols) {
        SymbolBelief b = symbol_belief(msgs, ep.pseudo_symbol(k, t), ep.constellation);
        res.posteriors[k].col(t) = b.probs;
        int best = 0;
        b.probs.maxCoeff(&best);
        res.decisions(k, t) = best;
      } else {
        ScalarGaussian b = symbol_belief_gaussian(msgs, ep.pseudo_symbol(k, t), m.sigma_x2);
        int best = 0;
        double dmin = std::numeric_limits<double>::infinity();
        Eigen::VectorXd w(S);
        for (int i = 0; i < S; ++i) {
          double d = std::norm(ep.constellation[i] - b.mean);
          w(i) = -d / std::max(b.var, 1e-290);
          if (d < dmin) {
            dmin = d;
            best = i;
          }
        }
        w = (w.array() - w.maxCoeff()).exp();
        res.posteriors[k].col(t) = w / w.sum();
        res.decisions(k, t) = best;
      }
    }
  }
  return res;
}

}  // namespace cfmimo

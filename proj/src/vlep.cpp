#include "cfmimo/vlep.hpp"

#include <cmath>

namespace cfmimo {

VlepState init_vlep_state(const ModelView& m) {
  VlepState s;
  s.h.assign(m.L, std::vector<Gaussian>(m.K));
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < m.K; ++k) s.h[l][k] = Gaussian{Vec::Zero(m.N), m.xi[l][k], false};
  s.x_mean = Eigen::MatrixXcd::Zero(m.K, m.T);
  s.x_var = Eigen::MatrixXd::Ones(m.K, m.T);
  refresh_interference(m, s);
  return s;
}

Mat data_interference_cov(const ModelView& m, const VlepState& s, int l, int k) {
  Mat c = m.sigma_v2 * Mat::Identity(m.N, m.N);
  for (int kk = 0; kk < m.K; ++kk) {
    if (kk == k) continue;
    const Gaussian& g = s.h[l][kk];
    c += m.sigma_x2 * (g.cov + g.mean * g.mean.adjoint());
  }
  return hermitized(c);
}

std::pair<Vec, Mat> pilot_interference_stats(const ModelView& m, const VlepState& s, int l,
                                             int k) {
  Vec mean = Vec::Zero(m.N);
  Mat cov = m.despread_noise_var * Mat::Identity(m.N, m.N);
  for (int kk : m.groups[m.group_of_user[k]]) {
    if (kk == k) continue;
    mean += s.h[l][kk].mean;
    cov += s.h[l][kk].cov;
  }
  return {std::move(mean), hermitized(cov)};
}

void refresh_interference(const ModelView& m, VlepState& s) {
  s.c_v0.assign(m.L, std::vector<Mat>(m.K));
  s.mv_p.assign(m.L, std::vector<Vec>(m.K));
  s.cv_p.assign(m.L, std::vector<Mat>(m.K));
  for (int l = 0; l < m.L; ++l) {
    for (int k = 0; k < m.K; ++k) {
      s.c_v0[l][k] = data_interference_cov(m, s, l, k);
      auto [mp, cp] = pilot_interference_stats(m, s, l, k);
      s.mv_p[l][k] = std::move(mp);
      s.cv_p[l][k] = std::move(cp);
    }
  }
}

EStepApStats e_step_ap(const ModelView& m, const VlepState& s, int l, int k) {
  JitteredChol ch = jittered_chol(s.c_v0[l][k]);
  Vec w = ch.solve(s.h[l][k].mean);  // C_v0^-1 m_h
  EStepApStats st;
  st.precision = s.h[l][k].mean.dot(w).real();
  st.weighted_obs = (w.adjoint() * m.Y[l]).transpose();  // m_h^H C_v0^-1 y_lt
  return st;
}

void e_step(const ModelView& m, VlepState& s, int k) {
  double prec = 1.0 / m.sigma_x2;
  Vec num = Vec::Zero(m.T);
  for (int l = 0; l < m.L; ++l) {
    EStepApStats st = e_step_ap(m, s, l, k);
    prec += st.precision;
    num += st.weighted_obs;
  }
  double var = 1.0 / prec;
  for (int t = 0; t < m.T; ++t) {
    s.x_mean(k, t) = num(t) * var;
    s.x_var(k, t) = var;
  }
}

Gaussian m_step(const ModelView& m, const VlepState& s, int l, int k) {
  JitteredChol c0 = jittered_chol(s.c_v0[l][k]);
  JitteredChol cp = jittered_chol(s.cv_p[l][k]);
  JitteredChol cx = jittered_chol(m.xi[l][k]);

  double sum_r = 0.0;
  Vec data_corr = Vec::Zero(m.N);  // sum_t m_x*(k,t) y_lt
  for (int t = 0; t < m.T; ++t) {
    sum_r += s.x_var(k, t) + std::norm(s.x_mean(k, t));
    data_corr += std::conj(s.x_mean(k, t)) * m.Y[l].col(t);
  }

  Mat prec = hermitized(cp.inverse() + c0.inverse() * sum_r + cx.inverse());
  JitteredChol cprec = jittered_chol(prec);

  const int g = m.group_of_user[k];
  Vec rhs = c0.solve(data_corr) + cp.solve(m.ytilde[l][g] - s.mv_p[l][k]);
  Gaussian out;
  out.cov = hermitized(cprec.inverse());
  out.mean = cprec.solve(rhs);
  return out;
}

PseudoPrior run_vlep(const ModelView& pruned, const VlepOptions& opt) {
  const ModelView& m = pruned;
  PseudoPrior prior;
  prior.K = m.K;
  prior.T = m.T;
  if (m.K == 0) {
    prior.channel.assign(m.L, {});
    prior.sym_mean.resize(0, m.T);
    prior.sym_var.resize(0, m.T);
    prior.sym_r.resize(0, m.T);
    return prior;
  }

  VlepState s = init_vlep_state(m);
  for (int it = 0; it < opt.max_iters; ++it) {
    double movement = 0.0;
    std::vector<std::vector<Gaussian>> h_new(m.L, std::vector<Gaussian>(m.K));
    for (int l = 0; l < m.L; ++l) {
      for (int k = 0; k < m.K; ++k) {
        Gaussian raw = m_step(m, s, l, k);
        if (opt.damping < 1.0) {
          raw.mean = opt.damping * raw.mean + (1.0 - opt.damping) * s.h[l][k].mean;
          raw.cov = hermitized(opt.damping * raw.cov + (1.0 - opt.damping) * s.h[l][k].cov);
        }
        movement = std::max(movement, (raw.mean - s.h[l][k].mean).norm() /
                                          (raw.mean.norm() + 1e-30));
        h_new[l][k] = std::move(raw);
      }
    }
    s.h = std::move(h_new);
    refresh_interference(m, s);
    for (int k = 0; k < m.K; ++k) e_step(m, s, k);
    if (movement < opt.tol) break;
  }

  prior.channel = s.h;
  prior.sym_mean = s.x_mean;
  prior.sym_var = s.x_var;
  prior.sym_r = s.x_var + s.x_mean.cwiseAbs2();
  return prior;
}

}  // namespace cfmimo

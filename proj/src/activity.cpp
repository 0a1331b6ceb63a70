#include "cfmimo/activity.hpp"

#include <cmath>

namespace cfmimo {

namespace {

// -ln det(C) - y^H C^-1 y
double gaussian_term(const Mat& c, const Vec& y) {
  JitteredChol ch = jittered_chol(c);
  return -ch.log_det() - y.dot(ch.solve(y)).real();
}

// -T ln det(B) - tr(B^-1 Gram),  Gram = Y Y^H
double data_term_of(const Mat& b, const Mat& gram, int T) {
  JitteredChol ch = jittered_chol(b);
  return -static_cast<double>(T) * ch.log_det() - ch.solve(gram).trace().real();
}

}  // namespace

GroupPilotStats pilot_posterior(const ModelView& m, int l, int g, const Eigen::VectorXi& u) {
  GroupPilotStats out;
  out.c_y = m.despread_noise_var * Mat::Identity(m.N, m.N);
  for (int k : m.groups[g])
    if (u(k) != 0) out.c_y += m.xi[l][k];
  out.c_y = hermitized(out.c_y);

  for (int k : m.groups[g]) {
    if (u(k) == 0) continue;
    Mat c_res = hermitized(out.c_y - m.xi[l][k]);  // C_{Yp|h}: noise + other actives
    // C_h = (C_res^-1 + Xi^-1)^-1, m_h = C_h C_res^-1 ytilde
    JitteredChol cr = jittered_chol(c_res);
    JitteredChol cx = jittered_chol(m.xi[l][k]);
    Mat prec = hermitized(cr.inverse() + cx.inverse());
    JitteredChol cp = jittered_chol(prec);
    PilotPosterior post;
    post.cov = hermitized(cp.inverse());
    post.mean = cp.solve(cr.solve(m.ytilde[l][g]));
    out.active.emplace_back(k, std::move(post));
  }
  return out;
}

Mat data_dispersion(double sigma_x2, const PilotPosterior& post) {
  return hermitized(sigma_x2 * (post.cov + post.mean * post.mean.adjoint()));
}

double log_likelihood_pilot(const ModelView& m, const Eigen::VectorXi& u) {
  double total = 0.0;
  for (int l = 0; l < m.L; ++l) {
    for (int g = 0; g < static_cast<int>(m.groups.size()); ++g) {
      Mat c_y = m.despread_noise_var * Mat::Identity(m.N, m.N);
      for (int k : m.groups[g])
        if (u(k) != 0) c_y += m.xi[l][k];
      total += gaussian_term(hermitized(c_y), m.ytilde[l][g]);
    }
  }
  return total;
}

double log_likelihood_data(const ModelView& m, const Eigen::VectorXi& u) {
  double total = 0.0;
  for (int l = 0; l < m.L; ++l) {
    Mat b = m.sigma_v2 * Mat::Identity(m.N, m.N);
    for (int g = 0; g < static_cast<int>(m.groups.size()); ++g) {
      GroupPilotStats st = pilot_posterior(m, l, g, u);
      for (auto& [k, post] : st.active) b += data_dispersion(m.sigma_x2, post);
    }
    total += data_term_of(hermitized(b), m.Y[l] * m.Y[l].adjoint(), m.T);
  }
  return total;
}

double total_log_likelihood(const ModelView& m, const Eigen::VectorXi& u) {
  return log_likelihood_pilot(m, u) + log_likelihood_data(m, u);
}

IterativeMlState::IterativeMlState(const ModelView& m) : m_(m) {
  u_ = Eigen::VectorXi::Zero(m.K);
  const int G = static_cast<int>(m.groups.size());
  pilot_term_.assign(m.L, std::vector<double>(G, 0.0));
  dispersion_.assign(m.L, std::vector<Mat>(m.K));
  b_.assign(m.L, Mat());
  data_term_.assign(m.L, 0.0);
  gram_.resize(m.L);

  for (int l = 0; l < m.L; ++l) {
    gram_[l] = m.Y[l] * m.Y[l].adjoint();
    Mat c_v = m.despread_noise_var * Mat::Identity(m.N, m.N);
    for (int g = 0; g < G; ++g) pilot_term_[l][g] = gaussian_term(c_v, m.ytilde[l][g]);
    b_[l] = m.sigma_v2 * Mat::Identity(m.N, m.N);
    data_term_[l] = data_term_of(b_[l], gram_[l], m.T);
  }
}

double IterativeMlState::total() const {
  double t = 0.0;
  for (int l = 0; l < m_.L; ++l) {
    for (double v : pilot_term_[l]) t += v;
    t += data_term_[l];
  }
  return t;
}

struct IterativeMlState::FlipDelta {
  double gain = 0.0;
  std::vector<double> pilot_term;                       // [l] for group g
  std::vector<std::vector<std::pair<int, Mat>>> disp;   // [l] (user, dispersion)
  std::vector<Mat> b;                                   // [l]
  std::vector<double> data_term;                        // [l]
};

IterativeMlState::FlipDelta IterativeMlState::evaluate_flip(int k) const {
  const int g = m_.group_of_user[k];
  Eigen::VectorXi u_new = u_;
  u_new(k) = 1 - u_new(k);

  FlipDelta d;
  d.pilot_term.resize(m_.L);
  d.disp.resize(m_.L);
  d.b.resize(m_.L);
  d.data_term.resize(m_.L);

  for (int l = 0; l < m_.L; ++l) {
    GroupPilotStats st = pilot_posterior(m_, l, g, u_new);
    d.pilot_term[l] = gaussian_term(st.c_y, m_.ytilde[l][g]);

    // replace this group's dispersion contributions in B_l
    Mat b = b_[l];
    for (int kk : m_.groups[g])
      if (u_(kk) != 0) b -= dispersion_[l][kk];
    for (auto& [kk, post] : st.active) {
      Mat disp = data_dispersion(m_.sigma_x2, post);
      b += disp;
      d.disp[l].emplace_back(kk, std::move(disp));
    }
    d.b[l] = hermitized(b);
    d.data_term[l] = data_term_of(d.b[l], gram_[l], m_.T);

    d.gain += d.pilot_term[l] - pilot_term_[l][g];
    d.gain += d.data_term[l] - data_term_[l];
  }
  return d;
}

double IterativeMlState::flip_gain(int k) const { return evaluate_flip(k).gain; }

void IterativeMlState::apply_flip(int k) {
  FlipDelta d = evaluate_flip(k);
  const int g = m_.group_of_user[k];
  u_(k) = 1 - u_(k);
  for (int l = 0; l < m_.L; ++l) {
    pilot_term_[l][g] = d.pilot_term[l];
    for (auto& [kk, disp] : d.disp[l]) dispersion_[l][kk] = std::move(disp);
    b_[l] = std::move(d.b[l]);
    data_term_[l] = d.data_term[l];
  }
}

ActivityResult iterative_ml(const ModelView& m, const ActivityOptions& opt) {
  IterativeMlState state(m);
  ActivityResult res;
  for (int pass = 1; pass <= opt.max_passes; ++pass) {
    res.passes = pass;
    bool changed = false;
    for (int k = 0; k < m.K; ++k) {
      if (state.flip_gain(k) > 0.0) {  // ties keep the current value
        state.apply_flip(k);
        changed = true;
      }
    }
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  res.u_hat = state.u();
  res.log_likelihood = state.total();
  return res;
}

}  // namespace cfmimo

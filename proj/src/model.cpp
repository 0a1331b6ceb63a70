#include "cfmimo/model.hpp"

namespace cfmimo {

ModelView make_full_view(const Realization& r, const DespreadObs& obs,
                         const ScenarioConfig& cfg) {
  ModelView m;
  m.L = cfg.num_aps;
  m.N = cfg.antennas_per_ap;
  m.T = cfg.data_len;
  m.K = cfg.num_users;
  m.groups = r.pilot_groups;
  m.group_of_user = r.pilot_of_user;
  m.xi = r.dep->xi;
  m.ytilde = obs.ytilde;
  m.Y = r.Y;
  m.sigma_x2 = cfg.sigma_x2;
  m.sigma_v2 = cfg.sigma_v2;
  m.despread_noise_var = obs.noise_var;
  m.constellation = make_constellation(cfg.constellation, cfg.sigma_x2);
  m.global_index.resize(m.K);
  for (int k = 0; k < m.K; ++k) m.global_index[k] = k;
  return m;
}

ModelView prune(const Eigen::VectorXi& u_hat, const ModelView& full) {
  if (u_hat.size() != full.K) throw std::invalid_argument("prune: u_hat size mismatch");
  ModelView m;
  m.L = full.L;
  m.N = full.N;
  m.T = full.T;
  m.ytilde = full.ytilde;
  m.Y = full.Y;
  m.sigma_x2 = full.sigma_x2;
  m.sigma_v2 = full.sigma_v2;
  m.despread_noise_var = full.despread_noise_var;
  m.constellation = full.constellation;

  std::vector<int> new_index(full.K, -1);
  for (int k = 0; k < full.K; ++k) {
    if (u_hat(k) != 0) {
      new_index[k] = m.K++;
      m.global_index.push_back(full.global_index[k]);
      m.group_of_user.push_back(full.group_of_user[k]);
    }
  }
  m.groups.assign(full.groups.size(), {});
  for (size_t g = 0; g < full.groups.size(); ++g)
    for (int k : full.groups[g])
      if (new_index[k] >= 0) m.groups[g].push_back(new_index[k]);

  m.xi.assign(m.L, std::vector<Mat>(m.K));
  for (int l = 0; l < m.L; ++l)
    for (int k = 0; k < full.K; ++k)
      if (new_index[k] >= 0) m.xi[l][new_index[k]] = full.xi[l][k];
  return m;
}

}  // namespace cfmimo

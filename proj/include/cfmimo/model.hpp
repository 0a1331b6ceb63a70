#pragma once

// The view the estimators operate on: per-link channel covariances, pilot
// groups, despread pilot observations and the data blocks. A full view
// covers all Kbar users; prune() keeps only the detected-active ones while
// preserving the original group indexing of the despread observations.

#include "cfmimo/scenario.hpp"
#include "cfmimo/types.hpp"

#include <vector>

namespace cfmimo {

struct ModelView {
  int L = 0, N = 0, T = 0, K = 0;
  std::vector<std::vector<int>> groups;   // group -> member indices in [0, K)
  std::vector<int> group_of_user;         // K
  std::vector<std::vector<Mat>> xi;       // [l][k] N x N Hermitian
  std::vector<std::vector<Vec>> ytilde;   // [l][g], original group indexing
  std::vector<Mat> Y;                     // [l] N x T
  double sigma_x2 = 0.0;
  double sigma_v2 = 0.0;
  double despread_noise_var = 0.0;        // cov of despread noise is this * I_N
  std::vector<cxd> constellation;
  std::vector<int> global_index;          // view index -> original user id
};

ModelView make_full_view(const Realization& r, const DespreadObs& obs,
                         const ScenarioConfig& cfg);

// Keeps users with u_hat != 0. K becomes u^H u, groups are filtered in place
// (possibly left empty), global_index maps back to the input view's ids.
ModelView prune(const Eigen::VectorXi& u_hat, const ModelView& full);

}  // namespace cfmimo

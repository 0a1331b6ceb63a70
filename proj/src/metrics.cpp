#include "cfmimo/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace cfmimo {

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::kPpVbEp: return "pp-vb-ep";
    case Algo::kVlepOnly: return "vlep-only";
    case Algo::kPilotMmse: return "pilot-mmse";
    case Algo::kPilotMmseGenie: return "pilot-mmse-genie";
    case Algo::kPpVbEpGenie: return "pp-vb-ep-genie";
  }
  return "?";
}

Algo algo_from_name(const std::string& name) {
  for (Algo a : {Algo::kPpVbEp, Algo::kVlepOnly, Algo::kPilotMmse, Algo::kPilotMmseGenie,
                 Algo::kPpVbEpGenie})
    if (name == algo_name(a)) return a;
  throw std::invalid_argument("unknown algorithm: " + name);
}

double compute_cnmse(const std::vector<std::vector<Vec>>& estimates,
                     const std::vector<int>& active_ids, const Realization& r) {
  const int L = static_cast<int>(r.H_true.size());
  const int Kbar = static_cast<int>(r.u_true.size());
  std::vector<int> view_of(Kbar, -1);
  for (size_t j = 0; j < active_ids.size(); ++j) view_of[active_ids[j]] = static_cast<int>(j);

  double num = 0.0, den = 0.0;
  bool any = false;
  for (int k = 0; k < Kbar; ++k) {
    if (r.u_true(k) == 0) continue;  // falsely-detected users excluded
    any = true;
    for (int l = 0; l < L; ++l) {
      Vec h = r.H_true[l].col(k);
      if (view_of[k] >= 0)
        num += (estimates[l][view_of[k]] - h).squaredNorm();
      else
        num += h.squaredNorm();  // missed: zero estimate
      den += h.squaredNorm();
    }
  }
  if (!any || den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

double compute_der(const Eigen::VectorXi& u_hat, const Eigen::VectorXi& u_true) {
  if (u_hat.size() != u_true.size()) throw std::invalid_argument("compute_der: size mismatch");
  int errs = 0;
  for (Eigen::Index k = 0; k < u_hat.size(); ++k) errs += (u_hat(k) != u_true(k)) ? 1 : 0;
  return static_cast<double>(errs) / static_cast<double>(u_hat.size());
}

int nearest_symbol(cxd x, const std::vector<cxd>& constellation) {
  int best = 0;
  double dmin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < constellation.size(); ++i) {
    double d = std::norm(x - constellation[i]);
    if (d < dmin) {
      dmin = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::pair<double, bool> compute_ser(const Eigen::MatrixXi& decisions,
                                    const std::vector<int>& active_ids,
                                    const std::vector<cxd>& constellation, const Realization& r) {
  const int Kbar = static_cast<int>(r.u_true.size());
  const int T = static_cast<int>(r.X.cols());
  std::vector<int> view_of(Kbar, -1);
  for (size_t j = 0; j < active_ids.size(); ++j) view_of[active_ids[j]] = static_cast<int>(j);

  long wrong = 0, total = 0;
  for (int k = 0; k < Kbar; ++k) {
    if (r.u_true(k) == 0) continue;
    total += T;
    if (view_of[k] < 0) {
      wrong += T;  // missed user: every symbol counted wrong
      continue;
    }
    for (int t = 0; t < T; ++t)
      if (decisions(view_of[k], t) != nearest_symbol(r.X(k, t), constellation)) ++wrong;
  }
  if (total == 0) return {0.0, false};
  return {static_cast<double>(wrong) / static_cast<double>(total), true};
}

Ecdf::Ecdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw std::invalid_argument("Ecdf: empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double Ecdf::quantile(double q) const {
  if (q <= 0.0) return sorted_.front();
  size_t n = sorted_.size();
  auto i = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
  i = std::clamp<size_t>(i, 1, n);
  return sorted_[i - 1];
}

}  // namespace cfmimo

#pragma once

// Trial metrics and their aggregation. Conventions for mismatched
// detected/true activity sets:
//   CNMSE sums over truly-active users only; a missed user contributes a
//   zero estimate, a falsely-detected user is excluded from both sums.
//   SER counts a missed user's T symbols as all wrong; it is undefined
//   (flagged, reported 0) when no user is truly active.

#include "cfmimo/gaussian.hpp"
#include "cfmimo/scenario.hpp"

#include <string>
#include <vector>

namespace cfmimo {

enum class Algo { kPpVbEp, kVlepOnly, kPilotMmse, kPilotMmseGenie, kPpVbEpGenie };

const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);

struct TrialMetrics {
  double cnmse = std::numeric_limits<double>::quiet_NaN();  // NaN while flagged
  double der = 0.0;
  double ser = 0.0;
  bool ser_defined = false;
  double wall_time = 0.0;  // seconds
  Algo algo = Algo::kPpVbEp;
};

// estimates[l][j] is the channel mean for detected user active_ids[j]; users
// outside active_ids count as estimated zero.
double compute_cnmse(const std::vector<std::vector<Vec>>& estimates,
                     const std::vector<int>& active_ids, const Realization& r);

double compute_der(const Eigen::VectorXi& u_hat, const Eigen::VectorXi& u_true);

// decisions(j, t) indexes the constellation for detected user active_ids[j].
// Returns {ser, defined}.
std::pair<double, bool> compute_ser(const Eigen::MatrixXi& decisions,
                                    const std::vector<int>& active_ids,
                                    const std::vector<cxd>& constellation, const Realization& r);

// Right-continuous empirical CDF of a non-empty sample.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> values);

  double operator()(double x) const;      // fraction of samples <= x
  double quantile(double q) const;        // smallest v with F(v) >= q
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

int nearest_symbol(cxd x, const std::vector<cxd>& constellation);

}  // namespace cfmimo

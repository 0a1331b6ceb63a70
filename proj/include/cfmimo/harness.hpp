#pragma once

// End-to-end orchestration: activity detection -> prune -> VL-EP pseudo
// prior -> VB-EP, baselines, the Monte-Carlo campaign with per-setup
// deployments and per-trial draws, metric aggregation and file outputs.

#include "cfmimo/activity.hpp"
#include "cfmimo/metrics.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/vbep.hpp"
#include "cfmimo/vlep.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfmimo {

// Filled from ScenarioConfig's hyperparameter block.
struct PipelineOptions {
  ActivityOptions activity;
  VlepOptions vlep;
  VbepOptions vbep;
};
PipelineOptions options_from_config(const ScenarioConfig& cfg);

enum class StageStatus { kOk, kVlepFailed, kVbepFailed };

struct PipelineOutput {
  Eigen::VectorXi u_hat;
  std::vector<int> active_ids;                 // detected users (global ids)
  std::vector<std::vector<Vec>> channel_mean;  // [l][j] aligned with active_ids
  Eigen::MatrixXi decisions;                   // |active_ids| x T symbol indices
  StageStatus status = StageStatus::kOk;
  TrialMetrics metrics;
};

// Pilot-only MMSE estimates for the users active under u, plus
// maximum-ratio-combining symbol decisions.
struct BaselineOutput {
  std::vector<std::vector<Vec>> channel_mean;  // [l][j]
  Eigen::MatrixXi decisions;
  std::vector<int> active_ids;
};
BaselineOutput pilot_mmse_baseline(const ModelView& full, const Eigen::VectorXi& u);

PipelineOutput run_pipeline(const Realization& r, const ScenarioConfig& cfg, Algo algo,
                            const PipelineOptions& opt);

struct CampaignOptions {
  int setups = 50;
  int trials = 50;
  std::vector<Algo> algos = {Algo::kPpVbEp};
  int threads = 1;
  std::uint64_t master_seed = 1;
  std::string out_dir;  // empty: keep results in memory only
  bool verbose = false;
};

struct TrialRecord {
  int setup = 0;
  int trial = 0;
  TrialMetrics metrics;
  bool failed = false;
  std::string error;
};

struct RunResult {
  ScenarioConfig config;
  std::vector<TrialRecord> records;  // ordered by (setup, trial, algo)

  // per-setup mean metric for one algorithm; NaN-valued cnmse trials are
  // skipped, setups with no valid trial are omitted
  std::vector<double> setup_means(Algo a, const std::string& metric) const;
  std::vector<double> pooled(Algo a, const std::string& metric) const;
};

RunResult run_campaign(const ScenarioConfig& cfg, const CampaignOptions& opt);

// metrics.csv, ecdf_<metric>.csv (per-setup means), ecdf_<metric>_pooled.csv
// and a quantile summary; all numeric fields printed with 9 significant
// digits. Creates out_dir if needed.
void write_campaign_outputs(const RunResult& result, const CampaignOptions& opt);

// JSON config round-trip; powers are given in dBm in the file. Unknown keys
// are rejected. Missing keys keep their defaults.
ScenarioConfig config_from_json_file(const std::string& path);
void write_default_config(const std::string& path);

}  // namespace cfmimo

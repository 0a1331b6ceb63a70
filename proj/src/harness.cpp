#include "cfmimo/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace cfmimo {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<int> active_list(const Eigen::VectorXi& u) {
  std::vector<int> ids;
  for (Eigen::Index k = 0; k < u.size(); ++k)
    if (u(k) != 0) ids.push_back(static_cast<int>(k));
  return ids;
}

}  // namespace

PipelineOptions options_from_config(const ScenarioConfig& cfg) {
  PipelineOptions o;
  o.activity.max_passes = cfg.activity_max_passes;
  o.vlep.max_iters = cfg.vlep_max_iters;
  o.vlep.tol = cfg.vlep_tol;
  o.vlep.damping = cfg.vlep_damping;
  o.vbep.max_sweeps = cfg.vbep_max_sweeps;
  o.vbep.tol = cfg.vbep_tol;
  o.vbep.damping = cfg.vbep_damping;
  return o;
}

BaselineOutput pilot_mmse_baseline(const ModelView& full, const Eigen::VectorXi& u) {
  BaselineOutput out;
  std::vector<int> act = active_list(u);
  std::vector<int> view_of(full.K, -1);
  for (size_t j = 0; j < act.size(); ++j) view_of[act[j]] = static_cast<int>(j);
  out.active_ids.reserve(act.size());
  for (int k : act) out.active_ids.push_back(full.global_index[k]);

  const int J = static_cast<int>(act.size());
  out.channel_mean.assign(full.L, std::vector<Vec>(J, Vec::Zero(full.N)));
  for (int l = 0; l < full.L; ++l) {
    for (int g = 0; g < static_cast<int>(full.groups.size()); ++g) {
      GroupPilotStats st = pilot_posterior(full, l, g, u);
      for (auto& [k, post] : st.active) out.channel_mean[l][view_of[k]] = post.mean;
    }
  }

  // maximum-ratio combining across APs, then slice
  out.decisions.resize(J, full.T);
  for (int j = 0; j < J; ++j) {
    double denom = 0.0;
    for (int l = 0; l < full.L; ++l) denom += out.channel_mean[l][j].squaredNorm();
    for (int t = 0; t < full.T; ++t) {
      cxd num = 0.0;
      for (int l = 0; l < full.L; ++l)
        num += out.channel_mean[l][j].dot(full.Y[l].col(t));
      cxd xhat = denom > 0.0 ? num / denom : cxd(0.0, 0.0);
      out.decisions(j, t) = nearest_symbol(xhat, full.constellation);
    }
  }
  return out;
}

namespace {

// Shared per-trial context so one detection run serves every algorithm.
struct TrialContext {
  DespreadObs obs;
  ModelView full;
  Eigen::VectorXi u_ml;
  double detect_seconds = 0.0;
  bool have_ml = false;
};

void ensure_detection(TrialContext& ctx, const PipelineOptions& opt) {
  if (ctx.have_ml) return;
  auto t0 = std::chrono::steady_clock::now();
  ctx.u_ml = iterative_ml(ctx.full, opt.activity).u_hat;
  ctx.detect_seconds = seconds_since(t0);
  ctx.have_ml = true;
}

PipelineOutput run_algo(const Realization& r, const ScenarioConfig& cfg, Algo algo,
                        const PipelineOptions& opt, TrialContext& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  PipelineOutput out;
  out.metrics.algo = algo;

  bool genie = algo == Algo::kPilotMmseGenie || algo == Algo::kPpVbEpGenie;
  double inherited = 0.0;
  if (genie) {
    out.u_hat = r.u_true;
  } else {
    ensure_detection(ctx, opt);
    out.u_hat = ctx.u_ml;
    inherited = ctx.detect_seconds;
  }

  if (algo == Algo::kPilotMmse || algo == Algo::kPilotMmseGenie) {
    BaselineOutput b = pilot_mmse_baseline(ctx.full, out.u_hat);
    out.active_ids = std::move(b.active_ids);
    out.channel_mean = std::move(b.channel_mean);
    out.decisions = std::move(b.decisions);
  } else {
    ModelView pruned = prune(out.u_hat, ctx.full);
    out.active_ids = pruned.global_index;
    bool done = false;
    PseudoPrior pseudo;
    try {
      pseudo = run_vlep(pruned, opt.vlep);
    } catch (const NumericalFailure&) {
      out.status = StageStatus::kVlepFailed;
      BaselineOutput b = pilot_mmse_baseline(ctx.full, out.u_hat);
      out.channel_mean = std::move(b.channel_mean);
      out.decisions = std::move(b.decisions);
      done = true;
    }
    if (!done) {
      auto from_pseudo = [&]() {
        out.channel_mean.assign(pruned.L, std::vector<Vec>(pruned.K));
        for (int l = 0; l < pruned.L; ++l)
          for (int k = 0; k < pruned.K; ++k) out.channel_mean[l][k] = pseudo.channel[l][k].mean;
        out.decisions.resize(pruned.K, pruned.T);
        for (int k = 0; k < pruned.K; ++k)
          for (int t = 0; t < pruned.T; ++t)
            out.decisions(k, t) = nearest_symbol(pseudo.sym_mean(k, t), pruned.constellation);
      };
      if (algo == Algo::kVlepOnly) {
        from_pseudo();
      } else {
        try {
          EnhancedPriors ep = build_enhanced_priors(pseudo, pruned);
          VbepResult vb = run_vbep(pruned, ep, opt.vbep);
          out.channel_mean.assign(pruned.L, std::vector<Vec>(pruned.K));
          for (int l = 0; l < pruned.L; ++l)
            for (int k = 0; k < pruned.K; ++k)
              out.channel_mean[l][k] =
                  vb.channel[l][k].vacuous ? Vec::Zero(pruned.N) : vb.channel[l][k].mean;
          out.decisions = std::move(vb.decisions);
        } catch (const NumericalFailure&) {
          out.status = StageStatus::kVbepFailed;
          from_pseudo();
        }
      }
    }
  }

  out.metrics.cnmse = compute_cnmse(out.channel_mean, out.active_ids, r);
  out.metrics.der = compute_der(out.u_hat, r.u_true);
  auto [ser, defined] = compute_ser(out.decisions, out.active_ids, ctx.full.constellation, r);
  out.metrics.ser = ser;
  out.metrics.ser_defined = defined;
  out.metrics.wall_time = inherited + seconds_since(t0);
  return out;
}

}  // namespace

PipelineOutput run_pipeline(const Realization& r, const ScenarioConfig& cfg, Algo algo,
                            const PipelineOptions& opt) {
  TrialContext ctx;
  ctx.obs = despread_all(r, cfg);
  ctx.full = make_full_view(r, ctx.obs, cfg);
  return run_algo(r, cfg, algo, opt, ctx);
}

RunResult run_campaign(const ScenarioConfig& cfg, const CampaignOptions& opt) {
  cfg.validate();
  if (opt.setups < 1 || opt.trials < 1) throw std::invalid_argument("campaign: empty grid");
  PipelineOptions popt = options_from_config(cfg);

  std::vector<std::shared_ptr<const Deployment>> deps(opt.setups);
  for (int s = 0; s < opt.setups; ++s)
    deps[s] = std::make_shared<Deployment>(
        draw_deployment(cfg, seed_combine(opt.master_seed, 0x5E70u, static_cast<std::uint64_t>(s))));

  const int num_jobs = opt.setups * opt.trials;
  const int A = static_cast<int>(opt.algos.size());
  RunResult result;
  result.config = cfg;
  result.records.assign(static_cast<size_t>(num_jobs) * A, {});

  auto worker_body = [&](int job) {
    int s = job / opt.trials;
    int tr = job % opt.trials;
    std::uint64_t trial_seed = seed_combine(
        opt.master_seed, 0x7A1Au,
        (static_cast<std::uint64_t>(s) << 32) | static_cast<std::uint64_t>(tr));
    for (int a = 0; a < A; ++a) {
      TrialRecord& rec = result.records[static_cast<size_t>(job) * A + a];
      rec.setup = s;
      rec.trial = tr;
      rec.metrics.algo = opt.algos[a];
    }
    try {
      Realization real = draw_realization(deps[s], cfg, trial_seed);
      TrialContext ctx;
      ctx.obs = despread_all(real, cfg);
      ctx.full = make_full_view(real, ctx.obs, cfg);
      for (int a = 0; a < A; ++a) {
        TrialRecord& rec = result.records[static_cast<size_t>(job) * A + a];
        try {
          rec.metrics = run_algo(real, cfg, opt.algos[a], popt, ctx).metrics;
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.error = e.what();
        }
      }
    } catch (const std::exception& e) {
      for (int a = 0; a < A; ++a) {
        TrialRecord& rec = result.records[static_cast<size_t>(job) * A + a];
        rec.failed = true;
        rec.error = e.what();
      }
    }
  };

  int threads = std::max(1, opt.threads);
  if (threads == 1) {
    for (int job = 0; job < num_jobs; ++job) worker_body(job);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&]() {
        for (int job = next.fetch_add(1); job < num_jobs; job = next.fetch_add(1))
          worker_body(job);
      });
    for (auto& th : pool) th.join();
  }

  // (setup, trial, algo) order independent of the requested algo ordering
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const TrialRecord& a, const TrialRecord& b) {
                     if (a.setup != b.setup) return a.setup < b.setup;
                     if (a.trial != b.trial) return a.trial < b.trial;
                     return static_cast<int>(a.metrics.algo) < static_cast<int>(b.metrics.algo);
                   });

  if (!opt.out_dir.empty()) write_campaign_outputs(result, opt);
  return result;
}

namespace {

double metric_value(const TrialMetrics& m, const std::string& metric) {
  if (metric == "cnmse") return m.cnmse;
  if (metric == "der") return m.der;
  if (metric == "ser") return m.ser;
  throw std::invalid_argument("unknown metric: " + metric);
}

}  // namespace

std::vector<double> RunResult::setup_means(Algo a, const std::string& metric) const {
  std::vector<double> out;
  int setup = -1;
  double sum = 0.0;
  int count = 0;
  auto flush = [&]() {
    if (count > 0) out.push_back(sum / count);
    sum = 0.0;
    count = 0;
  };
  for (const auto& rec : records) {
    if (rec.metrics.algo != a) continue;
    if (rec.setup != setup) {
      flush();
      setup = rec.setup;
    }
    if (rec.failed) continue;
    double v = metric_value(rec.metrics, metric);
    if (std::isnan(v)) continue;
    sum += v;
    ++count;
  }
  flush();
  return out;
}

std::vector<double> RunResult::pooled(Algo a, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& rec : records) {
    if (rec.metrics.algo != a || rec.failed) continue;
    double v = metric_value(rec.metrics, metric);
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

void write_campaign_outputs(const RunResult& result, const CampaignOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  auto path = [&](const std::string& name) { return (fs::path(opt.out_dir) / name).string(); };

  std::vector<Algo> algos = opt.algos;
  std::sort(algos.begin(), algos.end());
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());

  {
    std::ofstream csv(path("metrics.csv"));
    csv << "setup,trial,algo,cnmse,der,ser,wall_time\n";
    for (const auto& rec : result.records) {
      csv << rec.setup << ',' << rec.trial << ',' << algo_name(rec.metrics.algo) << ','
          << fmt9(rec.failed ? std::numeric_limits<double>::quiet_NaN() : rec.metrics.cnmse)
          << ',' << fmt9(rec.metrics.der) << ',' << fmt9(rec.metrics.ser) << ','
          << fmt9(rec.metrics.wall_time) << '\n';
    }
  }

  const std::vector<std::string> metrics = {"cnmse", "der", "ser"};
  for (const auto& metric : metrics) {
    std::ofstream by_setup(path("ecdf_" + metric + ".csv"));
    std::ofstream pooled(path("ecdf_" + metric + "_pooled.csv"));
    by_setup << "algo,value,F\n";
    pooled << "algo,value,F\n";
    for (Algo a : algos) {
      for (auto [file, values] :
           {std::pair{&by_setup, result.setup_means(a, metric)},
            std::pair{&pooled, result.pooled(a, metric)}}) {
        if (values.empty()) continue;
        Ecdf ecdf(values);
        const auto& sorted = ecdf.sorted();
        for (size_t i = 0; i < sorted.size(); ++i)
          *file << algo_name(a) << ',' << fmt9(sorted[i]) << ','
                << fmt9(static_cast<double>(i + 1) / static_cast<double>(sorted.size())) << '\n';
      }
    }
  }

  {
    std::ofstream sum(path("summary"));
    sum << "campaign: setups=" << opt.setups << " trials=" << opt.trials
        << " seed=" << opt.master_seed << "\n";
    for (Algo a : algos) {
      sum << "\n[" << algo_name(a) << "]\n";
      for (const auto& metric : metrics) {
        auto values = result.setup_means(a, metric);
        sum << metric << " (per-setup means, n=" << values.size() << "):";
        if (values.empty()) {
          sum << " no valid samples\n";
          continue;
        }
        Ecdf ecdf(values);
        for (double q : {0.05, 0.25, 0.5, 0.75, 0.95})
          sum << " q" << static_cast<int>(q * 100) << "=" << fmt9(ecdf.quantile(q));
        sum << "\n";
      }
    }
  }
}

namespace {

double linear_to_dbm(double linear) { return 10.0 * std::log10(linear); }

}  // namespace

ScenarioConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  in >> j;

  ScenarioConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "area_side_m") cfg.area_side = v.get<double>();
    else if (key == "num_aps") cfg.num_aps = v.get<int>();
    else if (key == "antennas_per_ap") cfg.antennas_per_ap = v.get<int>();
    else if (key == "num_users") cfg.num_users = v.get<int>();
    else if (key == "ap_height_m") cfg.ap_height = v.get<double>();
    else if (key == "pilot_len") cfg.pilot_len = v.get<int>();
    else if (key == "data_len") cfg.data_len = v.get<int>();
    else if (key == "tx_power_dbm") cfg.sigma_x2 = dbm_to_linear(v.get<double>());
    else if (key == "noise_power_dbm") cfg.sigma_v2 = dbm_to_linear(v.get<double>());
    else if (key == "pathloss_const_db") cfg.pathloss_const_db = v.get<double>();
    else if (key == "pathloss_slope_db") cfg.pathloss_slope_db = v.get<double>();
    else if (key == "constellation") cfg.constellation = v.get<std::string>();
    else if (key == "activity_prob") cfg.activity_prob = v.get<double>();
    else if (key == "users_per_pilot") cfg.users_per_pilot = v.get<int>();
    else if (key == "rng_seed") cfg.rng_seed = v.get<std::uint64_t>();
    else if (key == "activity_max_passes") cfg.activity_max_passes = v.get<int>();
    else if (key == "vlep_max_iters") cfg.vlep_max_iters = v.get<int>();
    else if (key == "vlep_tol") cfg.vlep_tol = v.get<double>();
    else if (key == "vlep_damping") cfg.vlep_damping = v.get<double>();
    else if (key == "vbep_max_sweeps") cfg.vbep_max_sweeps = v.get<int>();
    else if (key == "vbep_tol") cfg.vbep_tol = v.get<double>();
    else if (key == "vbep_damping") cfg.vbep_damping = v.get<double>();
    else throw std::invalid_argument("unknown config key: " + key);
  }
  cfg.validate();
  return cfg;
}

void write_default_config(const std::string& path) {
  ScenarioConfig cfg;
  nlohmann::json j;
  j["area_side_m"] = cfg.area_side;
  j["num_aps"] = cfg.num_aps;
  j["antennas_per_ap"] = cfg.antennas_per_ap;
  j["num_users"] = cfg.num_users;
  j["ap_height_m"] = cfg.ap_height;
  j["pilot_len"] = cfg.pilot_len;
  j["data_len"] = cfg.data_len;
  j["tx_power_dbm"] = linear_to_dbm(cfg.sigma_x2);
  j["noise_power_dbm"] = linear_to_dbm(cfg.sigma_v2);
  j["pathloss_const_db"] = cfg.pathloss_const_db;
  j["pathloss_slope_db"] = cfg.pathloss_slope_db;
  j["constellation"] = cfg.constellation;
  j["activity_prob"] = cfg.activity_prob;
  j["users_per_pilot"] = cfg.users_per_pilot;
  j["rng_seed"] = cfg.rng_seed;
  j["activity_max_passes"] = cfg.activity_max_passes;
  j["vlep_max_iters"] = cfg.vlep_max_iters;
  j["vlep_tol"] = cfg.vlep_tol;
  j["vlep_damping"] = cfg.vlep_damping;
  j["vbep_max_sweeps"] = cfg.vbep_max_sweeps;
  j["vbep_tol"] = cfg.vbep_tol;
  j["vbep_damping"] = cfg.vbep_damping;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cfmimo

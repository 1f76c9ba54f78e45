#ifndef ETO_ENVIRONMENT_HPP_
#define ETO_ENVIRONMENT_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eto/compute.hpp"
#include "eto/media.hpp"
#include "eto/network.hpp"

namespace eto {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Objective weights and deadline handling of the per-step reward.
struct RewardParams {
  double w0 = 0.35;  // quality
  double w1 = 0.85;  // response time
  double w2 = 0.15;  // energy
  double lambda_penalty = 10.0;
  double psnr_floor_db = 15.0;  // Q contribution of a violated task
  bool floor_violations = true;  // false drops violated tasks from Q (Q = 0 if none met)
};

struct FeatureScales {
  double size_bits = 1e7;
  double intensity = 100.0;
  double rate_bps = 1e8;
};

struct ScenarioConfig {
  int users = 3;     // K
  int channels = 3;  // C
  RewardParams reward;
  double deadline_s = 1.0;
  std::vector<double> user_deadlines_s;  // optional per-user override
  int episode_length = 36;
  int min_level = 0;  // lowest selectable e; 1 excludes the base-only option
  ComputeParams compute;
  PowerProfile power;
  double ewma_alpha = 0.5;
  double rt_cap_multiplier = 10.0;
  double beta = 0.0;  // cycles/bit^2; 0 means calibrate from the assets
  double result_ratio = 0.1;
  double fov_h_deg = 90.0;
  double fov_v_deg = 90.0;
  FeatureScales scales;

  double deadline(int user) const {
    return user_deadlines_s.empty() ? deadline_s : user_deadlines_s[user];
  }
};

// Immutable, fully resolved scenario: config plus loaded assets and the
// elastic tasks materialized for every (user, segment).
struct Scenario {
  ScenarioConfig config;
  std::vector<VideoManifest> manifests;  // per user
  std::vector<HeadTrace> head_traces;    // per user
  std::vector<ChannelTrace> uplinks;     // per channel
  std::vector<ChannelTrace> downlinks;   // per channel
  double beta = 0.0;                     // resolved
  int layers = 0;                        // L, common to all users
  std::vector<std::vector<ElasticTask>> tasks;  // [user][segment]

  int min_level() const { return config.min_level; }
  // Selectable levels min_level..L.
  int levels() const { return layers + 1 - config.min_level; }
  int options_per_user() const { return levels() * (config.channels + 1); }
  int segment_count(int user) const { return static_cast<int>(tasks[user].size()); }
};

// Validates bindings, resolves beta and materializes tasks. Throws ConfigError.
std::shared_ptr<const Scenario> build_scenario(ScenarioConfig config,
                                               std::vector<VideoManifest> manifests,
                                               std::vector<HeadTrace> head_traces,
                                               std::vector<ChannelTrace> uplinks,
                                               std::vector<ChannelTrace> downlinks);

// beta such that the median intensity over all materialized tasks equals
// f_vr / Z_k.
double calibrate_beta(const std::vector<std::vector<ElasticTask>>& unit_beta_tasks,
                      const ComputeParams& compute);

struct UserAction {
  int level = 0;    // e
  int target = 0;   // u: 0 local, c > 0 offload via channel c
  bool operator==(const UserAction&) const = default;
};

using JointAction = std::vector<UserAction>;

struct UserState {
  std::vector<double> sizes;
  std::vector<double> intensities;
  std::vector<double> uplink_avg_bps;
  std::vector<double> downlink_avg_bps;
  double deadline_s = 1.0;

  static int dimension(int layers, int channels) { return 2 * (layers + 1) + 2 * channels + 1; }
  std::vector<double> features(const FeatureScales& scales) const;
};

struct UserOutcome {
  UserAction action;
  double response_time_s = 0.0;
  double energy_j = 0.0;
  double psnr_db = 0.0;  // q(e) of the delivered level
  bool violated = false;
  bool uplink_stalled = false;
  bool downlink_stalled = false;
  double tx_time_s = 0.0;
  double rx_time_s = 0.0;
  double mec_time_s = 0.0;

  bool stalled() const { return uplink_stalled || downlink_stalled; }
};

struct StepOutcome {
  std::vector<UserOutcome> users;
  double quality = 0.0;  // Q, floored for violations
  double mean_rt_s = 0.0;
  double mean_energy_j = 0.0;
  double qte = 0.0;
  double penalty = 0.0;
  double reward = 0.0;
  std::vector<UserState> next_states;
  bool done = false;
};

// Quadratic deadline penalty: -lambda * (rt - deadline)^2 for violations.
inline double deadline_penalty(double rt_s, double deadline_s, double lambda_penalty) {
  if (!(rt_s > deadline_s)) return 0.0;
  const double over = rt_s - deadline_s;
  return -(lambda_penalty * over) * over;
}

inline double qte_objective(const RewardParams& w, double quality, double mean_rt,
                            double mean_energy) {
  return w.w0 * quality - w.w1 * mean_rt - w.w2 * mean_energy;
}

class Environment;

// Frozen view of one decision step: per-user option costs that do not depend
// on other users are precomputed; MEC sharing and the downlink leg are
// resolved per joint action. Both Environment::step and the oracle evaluate
// through this class, so their rewards agree bit for bit.
class StepEvaluator {
 public:
  explicit StepEvaluator(const Environment& env);

  int users() const { return users_; }
  int options() const { return options_; }
  int option_index(UserAction a) const { return (a.level - min_level_) * (channels_ + 1) + a.target; }
  UserAction option_action(int index) const {
    return {min_level_ + index / (channels_ + 1), index % (channels_ + 1)};
  }

  // `options` holds one option index per user.
  double reward(std::span<const int> options, const RewardParams& params) const;
  StepOutcome outcome(std::span<const int> options, const RewardParams& params) const;

 private:
  struct OptionCost {
    bool stalled = false;
    double tx_time_s = 0.0;  // uplink time, or local compute time when u = 0
    double energy_j = 0.0;
  };

  template <bool kDetail>
  double evaluate(std::span<const int> options, const RewardParams& params,
                  StepOutcome* out) const;

  const Scenario* scen_;
  int users_;
  int channels_;
  int min_level_;
  int options_;
  std::vector<const ElasticTask*> tasks_;
  std::vector<double> clocks_;
  std::vector<double> deadlines_;
  std::vector<OptionCost> costs_;  // [user * options + option]
};

class Environment {
 public:
  explicit Environment(std::shared_ptr<const Scenario> scenario);

  std::vector<UserState> reset(uint64_t seed);
  StepOutcome step(const JointAction& actions);
  StepOutcome step(const JointAction& actions, const RewardParams& params);
  // Outcome of `actions` without advancing the environment.
  StepOutcome evaluate(const JointAction& actions) const;
  StepOutcome evaluate(const JointAction& actions, const RewardParams& params) const;

  std::vector<UserState> states() const;
  UserState state(int user) const;
  bool done() const { return step_index_ >= scen_->config.episode_length; }
  int step_index() const { return step_index_; }
  int segment_index(int user) const;

  const Scenario& scenario() const { return *scen_; }
  const std::shared_ptr<const Scenario>& scenario_ptr() const { return scen_; }
  const ElasticTask& current_task(int user) const;
  double clock(int user) const { return clocks_[user]; }
  const RateHistory& history(int user) const { return history_[user]; }

 private:
  friend class StepEvaluator;
  std::vector<int> option_indices(const JointAction& actions) const;

  std::shared_ptr<const Scenario> scen_;
  int step_index_ = 0;
  std::vector<double> clocks_;
  std::vector<RateHistory> history_;
};

struct MetricSummary {
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
};

struct EpisodeSummary {
  double mean_reward = 0.0;
  MetricSummary psnr_db;  // deadline-met tasks only
  MetricSummary rt_s;
  MetricSummary energy_j;
  double dv_pct = 0.0;
  int tasks = 0;
  int met = 0;
};

// `psnr_floor_db` is reported as the PSNR summary when no task met its deadline.
EpisodeSummary episode_metrics(std::span<const StepOutcome> outcomes,
                               double psnr_floor_db = 15.0);

// Per-step, per-user rows: step,user,e,u,rt_s,energy_j,psnr_db,violated,reward
std::string metrics_csv(std::span<const StepOutcome> outcomes);

}  // namespace eto

#endif  // ETO_ENVIRONMENT_HPP_

#include "eto/environment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "eto/util.hpp"

namespace eto {

namespace {

const HeadSample& pose_for_segment(const HeadTrace& trace, int segment) {
  for (const auto& s : trace)
    if (s.segment_index == segment) return s;
  return trace[static_cast<size_t>(segment) % trace.size()];
}

std::vector<std::vector<ElasticTask>> materialize(const ScenarioConfig& cfg,
                                                  const std::vector<VideoManifest>& manifests,
                                                  const std::vector<HeadTrace>& heads,
                                                  double beta) {
  std::vector<std::vector<ElasticTask>> tasks(manifests.size());
  for (size_t k = 0; k < manifests.size(); ++k) {
    const auto& m = manifests[k];
    for (int s = 0; s < static_cast<int>(m.segments.size()); ++s) {
      const auto& hs = pose_for_segment(heads[k], s);
      HeadPose pose{hs.yaw_deg, hs.pitch_deg, cfg.fov_h_deg, cfg.fov_v_deg};
      auto mask = viewport_mask(pose, m.rows, m.cols);
      tasks[k].push_back(make_task(m, s, mask, beta, cfg.result_ratio,
                                   cfg.deadline(static_cast<int>(k))));
    }
  }
  return tasks;
}

}  // namespace

double calibrate_beta(const std::vector<std::vector<ElasticTask>>& unit_beta_tasks,
                      const ComputeParams& compute) {
  std::vector<double> sizes;
  for (const auto& user : unit_beta_tasks)
    for (const auto& t : user) sizes.insert(sizes.end(), t.sizes.begin(), t.sizes.end());
  if (sizes.empty()) throw ConfigError("no tasks to calibrate beta from");
  std::sort(sizes.begin(), sizes.end());
  const size_t n = sizes.size();
  const double median = n % 2 ? sizes[n / 2] : 0.5 * (sizes[n / 2 - 1] + sizes[n / 2]);
  return compute.reference_intensity() / median;
}

std::shared_ptr<const Scenario> build_scenario(ScenarioConfig config,
                                               std::vector<VideoManifest> manifests,
                                               std::vector<HeadTrace> head_traces,
                                               std::vector<ChannelTrace> uplinks,
                                               std::vector<ChannelTrace> downlinks) {
  const auto& c = config;
  if (c.users < 1) throw ConfigError("users must be >= 1");
  if (c.channels < 1) throw ConfigError("channels must be >= 1");
  if (c.episode_length < 1) throw ConfigError("episode_length must be >= 1");
  for (double w : {c.reward.w0, c.reward.w1, c.reward.w2})
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("objective weights must lie in [0,1]");
  if (!(c.reward.lambda_penalty >= 0.0)) throw ConfigError("lambda_penalty must be >= 0");
  if (!(c.deadline_s > 0.0)) throw ConfigError("deadline must be positive");
  if (!c.user_deadlines_s.empty() && static_cast<int>(c.user_deadlines_s.size()) != c.users)
    throw ConfigError("user_deadlines_s must have one entry per user");
  if (!(c.ewma_alpha >= 0.0 && c.ewma_alpha <= 1.0)) throw ConfigError("ewma_alpha must lie in [0,1]");
  if (!(c.result_ratio > 0.0 && c.result_ratio <= 1.0))
    throw ConfigError("result_ratio must lie in (0,1]");
  if (!(c.rt_cap_multiplier >= 1.0)) throw ConfigError("rt_cap_multiplier must be >= 1");
  if (!(c.compute.kappa >= 0.0 && c.compute.f_vr_hz > 0.0 && c.compute.z_mec_bps > 0.0 &&
        c.compute.z_user_bps > 0.0))
    throw ConfigError("compute parameters must be positive");
  if (static_cast<int>(manifests.size()) != c.users)
    throw ConfigError(fmt::format("{} users but {} manifests bound", c.users, manifests.size()));
  if (static_cast<int>(head_traces.size()) != c.users)
    throw ConfigError(fmt::format("{} users but {} head traces bound", c.users, head_traces.size()));
  if (static_cast<int>(uplinks.size()) != c.channels ||
      static_cast<int>(downlinks.size()) != c.channels)
    throw ConfigError(fmt::format("{} channels but {} uplink / {} downlink traces bound",
                                  c.channels, uplinks.size(), downlinks.size()));
  for (const auto& h : head_traces)
    if (h.empty()) throw ConfigError("empty head trace");

  for (auto& m : manifests) {
    try {
      validate(m);
    } catch (const InvalidManifest& e) {
      throw ConfigError(m.video_id + ": " + e.what());
    }
  }
  const int layers = manifests.front().layers;
  for (const auto& m : manifests)
    if (m.layers != layers) throw ConfigError("all manifests must have the same layer count");
  if (c.min_level < 0 || c.min_level > layers)
    throw ConfigError(fmt::format("min_level must lie in [0, {}]", layers));

  for (int ch = 0; ch < c.channels; ++ch) {
    uplinks[ch].channel_id = ch + 1;
    uplinks[ch].direction = Direction::kUplink;
    downlinks[ch].channel_id = ch + 1;
    downlinks[ch].direction = Direction::kDownlink;
    try {
      validate(uplinks[ch]);
      validate(downlinks[ch]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("channel {}: {}", ch + 1, e.what()));
    }
  }

  // Missing power coefficients fall back to the technology defaults, with the
  // receive side mirroring the transmit side.
  if (config.power.tx_mw_per_mbps.empty())
    for (const auto& t : uplinks) config.power.tx_mw_per_mbps.push_back(default_tx_coeff(t.technology));
  if (config.power.rx_mw_per_mbps.empty())
    for (const auto& t : downlinks) config.power.rx_mw_per_mbps.push_back(default_tx_coeff(t.technology));
  if (static_cast<int>(config.power.tx_mw_per_mbps.size()) != c.channels ||
      static_cast<int>(config.power.rx_mw_per_mbps.size()) != c.channels)
    throw ConfigError("power profile needs one tx and one rx coefficient per channel");
  for (double p : config.power.tx_mw_per_mbps)
    if (!(p >= 0.0)) throw ConfigError("power coefficients must be >= 0");
  for (double p : config.power.rx_mw_per_mbps)
    if (!(p >= 0.0)) throw ConfigError("power coefficients must be >= 0");

  auto scen = std::make_shared<Scenario>();
  scen->layers = layers;
  scen->beta = config.beta > 0.0
                   ? config.beta
                   : calibrate_beta(materialize(config, manifests, head_traces, 1.0), config.compute);
  scen->tasks = materialize(config, manifests, head_traces, scen->beta);
  scen->config = std::move(config);
  scen->manifests = std::move(manifests);
  scen->head_traces = std::move(head_traces);
  scen->uplinks = std::move(uplinks);
  scen->downlinks = std::move(downlinks);
  return scen;
}

std::vector<double> UserState::features(const FeatureScales& scales) const {
  std::vector<double> f;
  f.reserve(sizes.size() * 2 + uplink_avg_bps.size() * 2 + 1);
  for (double s : sizes) f.push_back(s / scales.size_bits);
  for (double i : intensities) f.push_back(i / scales.intensity);
  for (double r : uplink_avg_bps) f.push_back(r / scales.rate_bps);
  for (double r : downlink_avg_bps) f.push_back(r / scales.rate_bps);
  f.push_back(deadline_s);
  return f;
}

// ---------------------------------------------------------------------------

StepEvaluator::StepEvaluator(const Environment& env)
    : scen_(env.scen_.get()),
      users_(env.scen_->config.users),
      channels_(env.scen_->config.channels),
      min_level_(env.scen_->config.min_level),
      options_(env.scen_->options_per_user()) {
  const auto& cfg = scen_->config;
  tasks_.resize(users_);
  clocks_ = env.clocks_;
  deadlines_.resize(users_);
  costs_.resize(static_cast<size_t>(users_) * options_);
  for (int k = 0; k < users_; ++k) {
    const ElasticTask& task = env.current_task(k);
    tasks_[k] = &task;
    deadlines_[k] = task.deadline_s;
    for (int o = 0; o < options_; ++o) {
      const UserAction a = option_action(o);
      OptionCost& cost = costs_[static_cast<size_t>(k) * options_ + o];
      const double s = task.sizes[a.level];
      const double i = task.intensities[a.level];
      if (a.target == 0) {
        cost.tx_time_s = local_compute_time(s, i, cfg.compute.f_vr_hz);
        cost.energy_j = local_compute_energy(s, i, cfg.compute.f_vr_hz, cfg.compute.kappa);
      } else {
        auto tx = transfer_time(scen_->uplinks[a.target - 1], clocks_[k], s);
        cost.stalled = !tx.has_value();
        cost.tx_time_s = tx.value_or(0.0);
        cost.energy_j = comm_energy(cfg.power, a.target, Direction::kUplink, s, cost.tx_time_s) +
                        comm_energy(cfg.power, a.target, Direction::kDownlink,
                                    task.result_sizes[a.level], 1.0);
      }
    }
  }
}

template <bool kDetail>
double StepEvaluator::evaluate(std::span<const int> options, const RewardParams& params,
                               StepOutcome* out) const {
  const auto& cfg = scen_->config;
  double intensity_total = 0.0;
  for (int k = 0; k < users_; ++k) {
    const int o = options[k];
    const int target = o % (channels_ + 1);
    if (target > 0 && !costs_[static_cast<size_t>(k) * options_ + o].stalled)
      intensity_total += tasks_[k]->intensities[min_level_ + o / (channels_ + 1)];
  }

  double q_sum = 0.0, rt_sum = 0.0, e_sum = 0.0, penalty = 0.0;
  int q_count = 0;
  for (int k = 0; k < users_; ++k) {
    const int o = options[k];
    const int level = min_level_ + o / (channels_ + 1);
    const int target = o % (channels_ + 1);
    const OptionCost& cost = costs_[static_cast<size_t>(k) * options_ + o];
    const ElasticTask& task = *tasks_[k];
    const double cap = cfg.rt_cap_multiplier * deadlines_[k];

    double rt = 0.0, mec = 0.0, rx = 0.0;
    bool up_stall = false, down_stall = false;
    if (target == 0) {
      rt = cost.tx_time_s;
    } else if (cost.stalled) {
      up_stall = true;
      rt = cap;
    } else {
      const double speed = cfg.compute.z_mec_bps * (task.intensities[level] / intensity_total);
      mec = mec_compute_time(task.sizes[level], speed);
      auto down = transfer_time(scen_->downlinks[target - 1], clocks_[k] + cost.tx_time_s + mec,
                                task.result_sizes[level]);
      if (down) {
        rx = *down;
        rt = cost.tx_time_s + mec + rx;
      } else {
        down_stall = true;
        rt = cap;
      }
    }
    const bool violated = rt > deadlines_[k];
    if (!violated) {
      q_sum += task.psnr[level];
      ++q_count;
    } else if (params.floor_violations) {
      q_sum += params.psnr_floor_db;
      ++q_count;
    }
    rt_sum += rt;
    e_sum += cost.energy_j;
    penalty += deadline_penalty(rt, deadlines_[k], params.lambda_penalty);

    if constexpr (kDetail) {
      UserOutcome& u = out->users[k];
      u.action = {level, target};
      u.response_time_s = rt;
      u.energy_j = cost.energy_j;
      u.psnr_db = task.psnr[level];
      u.violated = violated;
      u.uplink_stalled = up_stall;
      u.downlink_stalled = down_stall;
      u.tx_time_s = target == 0 ? 0.0 : cost.tx_time_s;
      u.mec_time_s = mec;
      u.rx_time_s = rx;
    }
  }
  const double n = users_;
  const double quality = q_count == 0 ? 0.0 : q_sum / q_count;
  const double mean_rt = rt_sum / n;
  const double mean_e = e_sum / n;
  const double qte = qte_objective(params, quality, mean_rt, mean_e);
  const double reward = qte + penalty;
  if constexpr (kDetail) {
    out->quality = quality;
    out->mean_rt_s = mean_rt;
    out->mean_energy_j = mean_e;
    out->qte = qte;
    out->penalty = penalty;
    out->reward = reward;
  }
  return reward;
}

double StepEvaluator::reward(std::span<const int> options, const RewardParams& params) const {
  return evaluate<false>(options, params, nullptr);
}

StepOutcome StepEvaluator::outcome(std::span<const int> options,
                                   const RewardParams& params) const {
  StepOutcome out;
  out.users.resize(users_);
  evaluate<true>(options, params, &out);
  return out;
}

// ---------------------------------------------------------------------------

Environment::Environment(std::shared_ptr<const Scenario> scenario) : scen_(std::move(scenario)) {
  reset(0);
}

std::vector<UserState> Environment::reset(uint64_t seed) {
  const auto& cfg = scen_->config;
  uint64_t rng = derive_seed(seed, 0x656e76);
  double horizon = 0.0;
  for (const auto& t : scen_->uplinks) horizon = std::max(horizon, t.horizon());
  for (const auto& t : scen_->downlinks) horizon = std::max(horizon, t.horizon());
  step_index_ = 0;
  clocks_.assign(cfg.users, 0.0);
  history_.assign(cfg.users, RateHistory{});
  for (int k = 0; k < cfg.users; ++k) {
    clocks_[k] = horizon > 0.0 ? uniform(rng, 0.0, horizon) : 0.0;
    for (const auto& t : scen_->uplinks) history_[k].uplink_bps.push_back(t.mean_rate());
    for (const auto& t : scen_->downlinks) history_[k].downlink_bps.push_back(t.mean_rate());
  }
  return states();
}

int Environment::segment_index(int user) const {
  return step_index_ % scen_->segment_count(user);
}

const ElasticTask& Environment::current_task(int user) const {
  return scen_->tasks[user][segment_index(user)];
}

UserState Environment::state(int user) const {
  const auto& task = current_task(user);
  return {task.sizes, task.intensities, history_[user].uplink_bps, history_[user].downlink_bps,
          task.deadline_s};
}

std::vector<UserState> Environment::states() const {
  std::vector<UserState> out;
  out.reserve(scen_->config.users);
  for (int k = 0; k < scen_->config.users; ++k) out.push_back(state(k));
  return out;
}

std::vector<int> Environment::option_indices(const JointAction& actions) const {
  const auto& cfg = scen_->config;
  if (static_cast<int>(actions.size()) != cfg.users)
    throw std::invalid_argument(
        fmt::format("joint action has {} entries, expected {}", actions.size(), cfg.users));
  std::vector<int> idx(actions.size());
  for (size_t k = 0; k < actions.size(); ++k) {
    const auto& a = actions[k];
    if (a.level < cfg.min_level || a.level > scen_->layers || a.target < 0 || a.target > cfg.channels)
      throw std::out_of_range(fmt::format("action ({},{}) for user {} out of range", a.level,
                                          a.target, k));
    idx[k] = (a.level - cfg.min_level) * (cfg.channels + 1) + a.target;
  }
  return idx;
}

StepOutcome Environment::evaluate(const JointAction& actions) const {
  return evaluate(actions, scen_->config.reward);
}

StepOutcome Environment::evaluate(const JointAction& actions, const RewardParams& params) const {
  auto idx = option_indices(actions);
  return StepEvaluator(*this).outcome(idx, params);
}

StepOutcome Environment::step(const JointAction& actions) {
  return step(actions, scen_->config.reward);
}

StepOutcome Environment::step(const JointAction& actions, const RewardParams& params) {
  if (done()) throw std::logic_error("step() called on a finished episode");
  const auto& cfg = scen_->config;
  StepOutcome out = evaluate(actions, params);
  for (int k = 0; k < cfg.users; ++k) {
    const UserOutcome& u = out.users[k];
    const double cap = cfg.rt_cap_multiplier * scen_->tasks[k][segment_index(k)].deadline_s;
    clocks_[k] += std::min(u.response_time_s, cap);
    if (u.action.target > 0) {
      const auto& task = current_task(k);
      if (u.uplink_stalled) {
        history_[k].update(u.action.target, Direction::kUplink, 0.0, cfg.ewma_alpha);
        continue;
      }
      history_[k].update(u.action.target, Direction::kUplink,
                         task.sizes[u.action.level] / u.tx_time_s, cfg.ewma_alpha);
      history_[k].update(u.action.target, Direction::kDownlink,
                         u.downlink_stalled ? 0.0 : task.result_sizes[u.action.level] / u.rx_time_s,
                         cfg.ewma_alpha);
    }
  }
  ++step_index_;
  out.done = done();
  out.next_states = states();
  return out;
}

// ---------------------------------------------------------------------------

EpisodeSummary episode_metrics(std::span<const StepOutcome> outcomes, double psnr_floor_db) {
  EpisodeSummary s;
  std::vector<double> psnr, rt, energy;
  double reward_sum = 0.0;
  int violated = 0;
  for (const auto& o : outcomes) {
    reward_sum += o.reward;
    for (const auto& u : o.users) {
      rt.push_back(u.response_time_s);
      energy.push_back(u.energy_j);
      if (u.violated)
        ++violated;
      else
        psnr.push_back(u.psnr_db);
    }
  }
  auto summarize = [](const std::vector<double>& v) {
    MetricSummary m;
    if (v.empty()) return m;
    double sum = 0.0;
    for (double x : v) sum += x;
    m.mean = sum / static_cast<double>(v.size());
    m.p5 = percentile(v, 5.0);
    m.p95 = percentile(v, 95.0);
    return m;
  };
  s.tasks = static_cast<int>(rt.size());
  s.met = static_cast<int>(psnr.size());
  s.mean_reward = outcomes.empty() ? 0.0 : reward_sum / static_cast<double>(outcomes.size());
  s.psnr_db = psnr.empty() ? MetricSummary{psnr_floor_db, psnr_floor_db, psnr_floor_db}
                           : summarize(psnr);
  s.rt_s = summarize(rt);
  s.energy_j = summarize(energy);
  s.dv_pct = s.tasks == 0 ? 0.0 : 100.0 * violated / s.tasks;
  return s;
}

std::string metrics_csv(std::span<const StepOutcome> outcomes) {
  std::string out = "step,user,e,u,rt_s,energy_j,psnr_db,violated,reward\n";
  for (size_t t = 0; t < outcomes.size(); ++t) {
    const auto& o = outcomes[t];
    for (size_t k = 0; k < o.users.size(); ++k) {
      const auto& u = o.users[k];
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", t, k, u.action.level, u.action.target,
                         format_double(u.response_time_s), format_double(u.energy_j),
                         format_double(u.psnr_db), u.violated ? 1 : 0, format_double(o.reward));
    }
  }
  return out;
}

}  // namespace eto

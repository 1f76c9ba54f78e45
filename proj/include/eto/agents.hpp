#ifndef ETO_AGENTS_HPP_
#define ETO_AGENTS_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eto/environment.hpp"
#include "eto/nn.hpp"
#include "eto/oracle.hpp"

namespace eto {

enum class AgentKind { kCppg, kIppg, kEgreedy, kEa };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& text);

struct AgentConfig {
  double eps_clip = 0.2;
  double dual_clip = 3.0;
  double entropy_weight = 1e-4;
  int n_policy = 80;
  int n_aux = 6;
  int n_update = 4;  // tasks between updates
  int minibatch = 64;
  double gamma = 0.0;
  double lr = 3e-4;
  double max_grad_norm = 0.5;  // 0 disables clipping
  bool normalize_advantages = true;
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::kTanh;
  size_t buffer_capacity = 4096;
  // Neural epsilon-greedy
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_decay_steps = 5000;
  double egreedy_lr = 3e-4;  // same as lr by default
  // EA-Offloader; negative means the middle level (L+1)/2
  int e_fix = -1;
  // CPPG trains for round(episodes * multiplier)
  double cppg_episode_multiplier = 1.0;

  void validate() const;  // throws std::invalid_argument
  nlohmann::json to_json() const;
  static AgentConfig from_json(const nlohmann::json& j);
};

// PPO surrogate for one sample. With `dual` and a negative advantage the
// clipped objective is further bounded below by c * adv.
double ppo_objective(double ratio, double advantage, double eps_clip, double dual_clip, bool dual);
// d objective / d ratio for the branch selected by ppo_objective.
double ppo_objective_grad(double ratio, double advantage, double eps_clip, double dual_clip,
                          bool dual);

struct PolicyLossOptions {
  double eps_clip = 0.2;
  double dual_clip = 3.0;
  bool dual = true;
  double entropy_weight = 1e-4;
};

struct PolicySample {
  std::vector<int> actions;  // per policy head
  std::vector<double> old_log_probs;
  double advantage = 0.0;
};

struct PolicyLoss {
  double loss = 0.0;       // -objective - entropy_weight * entropy
  double objective = 0.0;  // mean clipped surrogate
  double entropy = 0.0;    // mean over samples of the summed head entropies
};

// Policy-phase loss over the columns of x, using the first `policy_heads`
// heads of `actor`. Writes d loss / d params into grad.
PolicyLoss policy_loss(const nn::DenseNet& actor, int policy_heads, const nn::Matrix& x,
                       std::span<const PolicySample> batch, const PolicyLossOptions& options,
                       std::vector<double>& grad);

struct AuxLoss {
  double loss = 0.0;
  double kl = 0.0;     // mean KL(reference || current) summed over policy heads
  double value = 0.0;  // half mean squared error of the aux_value head
};

// Auxiliary-phase loss; reference_logits[h] holds head h of the snapshot for
// every column of x.
AuxLoss aux_loss(const nn::DenseNet& actor, int policy_heads, const nn::Matrix& x,
                 const std::vector<nn::Matrix>& reference_logits, const Eigen::VectorXd& targets,
                 std::vector<double>& grad);

// Half mean squared error of the single-output critic.
double value_loss(const nn::DenseNet& critic, const nn::Matrix& x, const Eigen::VectorXd& targets,
                  std::vector<double>& grad);

struct Decision {
  JointAction action;
  std::vector<int> choices;       // head-local index per user
  std::vector<double> log_probs;  // per user
  std::vector<double> entropies;  // per user
};

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double aux_loss = 0.0;
  double kl = 0.0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentKind kind() const = 0;
  // Width of the network input.
  virtual int input_dim() const = 0;
  virtual Decision act(const std::vector<UserState>& states, uint64_t& rng, bool greedy) = 0;
  // Stores the transition(s) of one step.
  virtual void record(const std::vector<UserState>& states, const Decision& decision,
                      const StepOutcome& outcome) = 0;
  // Marks the end of one task; returns diagnostics when an update ran.
  virtual std::optional<LossStats> end_task() = 0;
  virtual nlohmann::json to_json() const = 0;
  // Loads parameters from a checkpoint of an agent with the same shapes.
  virtual void restore(const nlohmann::json& checkpoint) = 0;
};

struct Transition {
  std::vector<double> state;
  std::vector<int> actions;  // per policy head
  std::vector<double> old_log_probs;
  double reward = 0.0;
  std::vector<double> next_state;
  double v_target = 0.0;
};

// CPPG (centralized), IPPG (decentralized, shared parameters) and
// EA-Offloader (decentralized, elasticity pinned, single clip, no auxiliary
// phase).
class PpgAgent : public Agent {
 public:
  // Levels below `min_level` are never emitted.
  PpgAgent(AgentKind kind, int users, int layers, int channels, FeatureScales scales,
           AgentConfig config, uint64_t seed, int min_level = 0);

  AgentKind kind() const override { return kind_; }
  int input_dim() const override { return actor_.input_width(); }
  int head_count() const { return centralized() ? users_ : 1; }
  int head_width() const { return head_width_; }
  bool centralized() const { return kind_ == AgentKind::kCppg; }
  bool has_aux_phase() const { return kind_ != AgentKind::kEa; }
  bool dual_clip() const { return kind_ != AgentKind::kEa; }
  int fixed_level() const { return e_fix_; }

  Decision act(const std::vector<UserState>& states, uint64_t& rng, bool greedy) override;
  void record(const std::vector<UserState>& states, const Decision& decision,
              const StepOutcome& outcome) override;
  std::optional<LossStats> end_task() override;
  nlohmann::json to_json() const override;
  void restore(const nlohmann::json& checkpoint) override;

  // Per-head logits for one network input.
  std::vector<std::vector<double>> logits(const std::vector<double>& input) const;
  std::vector<std::vector<double>> inputs(const std::vector<UserState>& states) const;

  void push(Transition t) { buffer_.push(std::move(t)); }
  const nn::ReplayBuffer<Transition>& buffer() const { return buffer_; }
  // Both training phases on the current buffer, then clears it.
  LossStats update();
  // Mean over the buffer of sum_h KL(reference || current).
  double mean_kl(const nn::DenseNet& reference) const;

  const nn::DenseNet& actor() const { return actor_; }
  nn::DenseNet& actor() { return actor_; }
  const nn::DenseNet& critic() const { return critic_; }
  const AgentConfig& config() const { return config_; }
  int64_t updates() const { return updates_; }

 private:
  UserAction to_action(int choice) const;
  void value_step(const nn::Matrix& x, const Eigen::VectorXd& target, double* loss);

  AgentKind kind_;
  int users_, layers_, channels_, min_level_;
  FeatureScales scales_;
  AgentConfig config_;
  int head_width_;
  int e_fix_;
  nn::DenseNet actor_;
  nn::DenseNet critic_;
  nn::AdamState actor_opt_;
  nn::AdamState critic_opt_;
  std::vector<double> grad_actor_;
  std::vector<double> grad_critic_;
  nn::ReplayBuffer<Transition> buffer_;
  uint64_t update_rng_;
  int64_t tasks_ = 0;
  int64_t updates_ = 0;
};

// Shared network regressing the reward of every (e,u) arm from one user's
// state; epsilon decays linearly with the number of steps taken.
class EgreedyAgent : public Agent {
 public:
  EgreedyAgent(int users, int layers, int channels, FeatureScales scales, AgentConfig config,
               uint64_t seed, int min_level = 0);

  AgentKind kind() const override { return AgentKind::kEgreedy; }
  int input_dim() const override { return net_.input_width(); }
  int arms() const { return (layers_ + 1 - min_level_) * (channels_ + 1); }
  double epsilon() const;

  Decision act(const std::vector<UserState>& states, uint64_t& rng, bool greedy) override;
  void record(const std::vector<UserState>& states, const Decision& decision,
              const StepOutcome& outcome) override;
  std::optional<LossStats> end_task() override;
  nlohmann::json to_json() const override;
  void restore(const nlohmann::json& checkpoint) override;

  std::vector<double> predict(const std::vector<double>& features) const;
  // One squared-error step on the chosen arms; returns the mean loss.
  double regress(const std::vector<std::vector<double>>& features, const std::vector<int>& arms,
                 double target, double lr);
  nn::DenseNet& net() { return net_; }

 private:
  int users_, layers_, channels_, min_level_;
  FeatureScales scales_;
  AgentConfig config_;
  nn::DenseNet net_;
  nn::AdamState opt_;
  int64_t steps_ = 0;
  double last_loss_ = 0.0;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const Scenario& scenario,
                                  const AgentConfig& config, uint64_t seed);
// Throws std::invalid_argument when the checkpoint does not fit the scenario.
std::unique_ptr<Agent> load_agent(const nlohmann::json& checkpoint, const Scenario& scenario);

struct LearningRow {
  int episode = 0;
  double mean_reward = 0.0;
  double psnr_db = 0.0;
  double rt_s = 0.0;
  double energy_j = 0.0;
  double dv_pct = 0.0;
  LossStats loss;
  int updates = 0;
};

struct TrainOptions {
  AgentKind kind = AgentKind::kIppg;
  int episodes = 500;
  uint64_t seed = 1;
  AgentConfig config;
};

struct TrainResult {
  std::unique_ptr<Agent> agent;
  std::vector<LearningRow> curve;
  int64_t transitions = 0;
};

using EpisodeCallback = std::function<void(const LearningRow&)>;

TrainResult train(const std::shared_ptr<const Scenario>& scenario, const TrainOptions& options,
                  const EpisodeCallback& on_episode = {});

std::string learning_curve_csv(const std::vector<LearningRow>& rows);

uint64_t episode_seed(uint64_t seed, int episode);
uint64_t eval_episode_seed(uint64_t seed, int episode);

struct EvalOptions {
  int episodes = 1;
  uint64_t seed = 1;
  bool with_oracle = false;
  int cap = kDefaultBruteForceCap;
};

struct EvalResult {
  std::vector<StepOutcome> outcomes;
  std::vector<double> oracle_step_rewards;  // oracle on the agent's own states
  std::vector<StepOutcome> oracle_outcomes;  // oracle-controlled episodes
  EpisodeSummary summary;
  std::optional<EpisodeSummary> oracle_summary;
};

// Greedy episodes on eval seeds.
EvalResult evaluate(Agent& agent, const std::shared_ptr<const Scenario>& scenario,
                    const EvalOptions& options);

// Episode driven by the exhaustive per-step oracle.
std::vector<StepOutcome> oracle_episode(const std::shared_ptr<const Scenario>& scenario,
                                        uint64_t reset_seed, int cap = kDefaultBruteForceCap);

// policy,users,reward,psnr_mean,psnr_p5,psnr_p95,rt_mean,rt_p5,rt_p95,
// energy_mean,energy_p5,energy_p95,dv_pct
std::string summary_csv(const std::vector<std::pair<std::string, EpisodeSummary>>& rows,
                        int users);

}  // namespace eto

#endif  // ETO_AGENTS_HPP_

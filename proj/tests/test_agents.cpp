#include <gtest/gtest.h>

#include <cmath>

#include "eto/agents.hpp"
#include "eto/scenario_io.hpp"
#include "eto/util.hpp"
#include "support.hpp"

using namespace eto;

namespace {

AgentConfig small_config() {
  AgentConfig c;
  c.hidden = {16, 16};
  c.n_policy = 4;
  c.n_aux = 2;
  c.minibatch = 16;
  return c;
}

StepOutcome fake_outcome(double reward, const std::vector<UserState>& next) {
  StepOutcome o;
  o.reward = reward;
  o.next_states = next;
  return o;
}

}  // namespace

TEST(PpoObjective, HandCases) {
  // Negative advantage with a runaway ratio: single clip is unbounded, dual clip floors at c*A.
  EXPECT_DOUBLE_EQ(ppo_objective(10, -2, 0.2, 3, false), -20.0);
  EXPECT_DOUBLE_EQ(ppo_objective(10, -2, 0.2, 3, true), -6.0);
  EXPECT_DOUBLE_EQ(ppo_objective(10, 2, 0.2, 3, true), 2.4);
  EXPECT_DOUBLE_EQ(ppo_objective(1.1, 2, 0.2, 3, true), 2.2);
  EXPECT_DOUBLE_EQ(ppo_objective(0.5, -2, 0.2, 3, true), -1.6);
}

TEST(PpoObjective, GradientMatchesFiniteDifference) {
  uint64_t rng = 1;
  for (int i = 0; i < 2000; ++i) {
    const double r = uniform(rng, 0.01, 6), a = uniform(rng, -3, 3);
    for (bool dual : {false, true}) {
      const double h = 1e-7;
      const double fd = (ppo_objective(r + h, a, 0.2, 3, dual) - ppo_objective(r - h, a, 0.2, 3, dual)) / (2 * h);
      // Skip evaluations straddling a kink.
      if (std::abs(r - 0.8) < 1e-6 || std::abs(r - 1.2) < 1e-6 || std::abs(r - 3) < 1e-6) continue;
      EXPECT_NEAR(ppo_objective_grad(r, a, 0.2, 3, dual), fd, 1e-5);
    }
  }
}

TEST(PpoObjective, RatioEqualsExpOfLogDifference) {
  // exp(new - old) computed in log space equals the probability ratio.
  std::vector<double> old_z{0.3, -1.0, 2.0}, new_z{0.5, -0.2, 1.0};
  auto po = nn::softmax(old_z), pn = nn::softmax(new_z);
  auto lo = nn::log_softmax(old_z), ln = nn::log_softmax(new_z);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::exp(ln[i] - lo[i]), pn[i] / po[i], 1e-14);
}

TEST(PpgAgent, HeadShapesPerVariant) {
  auto scen = synthetic_scenario(test::small_synthetic(3, 7, 3));
  const int dim = UserState::dimension(7, 3);
  PpgAgent cppg(AgentKind::kCppg, 3, 7, 3, {}, small_config(), 1);
  PpgAgent ippg(AgentKind::kIppg, 3, 7, 3, {}, small_config(), 1);
  PpgAgent ea(AgentKind::kEa, 3, 7, 3, {}, small_config(), 1);
  EXPECT_EQ(cppg.input_dim(), 3 * dim);
  EXPECT_EQ(cppg.head_count(), 3);
  EXPECT_EQ(ippg.input_dim(), dim);
  EXPECT_EQ(ippg.head_count(), 1);
  EXPECT_EQ(ippg.head_width(), 32);
  EXPECT_EQ(ea.head_width(), 4);
  EXPECT_EQ(ea.fixed_level(), 4);
  EXPECT_FALSE(ea.has_aux_phase());
  EXPECT_FALSE(ea.dual_clip());
  EXPECT_EQ(ea.actor().heads().size(), 1u);
  EXPECT_EQ(ippg.actor().heads().back().name, "aux_value");
}

TEST(PpgAgent, IppgInputIndependentOfUsers) {
  for (int k = 2; k <= 8; ++k) {
    PpgAgent ippg(AgentKind::kIppg, k, 7, 3, {}, small_config(), 1);
    PpgAgent cppg(AgentKind::kCppg, k, 7, 3, {}, small_config(), 1);
    EXPECT_EQ(ippg.input_dim(), 23);
    EXPECT_EQ(cppg.input_dim(), 23 * k);
  }
}

TEST(PpgAgent, EaEmitsFixedLevel) {
  auto spec = test::small_synthetic(2, 4, 2);
  auto cfg = small_config();
  cfg.e_fix = 3;
  auto scen = synthetic_scenario(spec);
  PpgAgent ea(AgentKind::kEa, 2, 4, 2, {}, cfg, 1);
  Environment env(scen);
  uint64_t rng = 3;
  for (int i = 0; i < 50; ++i) {
    auto d = ea.act(env.states(), rng, false);
    for (const auto& a : d.action) {
      EXPECT_EQ(a.level, 3);
      EXPECT_LE(a.target, 2);
    }
  }
  cfg.e_fix = 5;
  EXPECT_THROW(PpgAgent(AgentKind::kEa, 2, 4, 2, {}, cfg, 1), std::invalid_argument);
}

TEST(PpgAgent, EaWithoutChannelsStaysLocal) {
  PpgAgent ea(AgentKind::kEa, 2, 3, 0, {}, small_config(), 1);
  EXPECT_EQ(ea.head_width(), 1);
  UserState s{{1e6, 2e6, 3e6, 4e6}, {1, 2, 3, 4}, {}, {}, 1.0};
  uint64_t rng = 1;
  for (const auto& a : ea.act({s, s}, rng, false).action) EXPECT_EQ(a, (UserAction{2, 0}));
}

TEST(Agents, MinLevelNeverEmitsLowerLevels) {
  auto spec = test::small_synthetic(2, 3, 2);
  spec.config.min_level = 2;
  auto scen = synthetic_scenario(spec);
  Environment env(scen);
  uint64_t rng = 5;
  for (auto kind : {AgentKind::kCppg, AgentKind::kIppg, AgentKind::kEgreedy}) {
    auto agent = make_agent(kind, *scen, small_config(), 4);
    for (int i = 0; i < 100; ++i)
      for (const auto& a : agent->act(env.states(), rng, false).action) EXPECT_GE(a.level, 2);
  }
  PpgAgent ippg(AgentKind::kIppg, 2, 3, 2, {}, small_config(), 1, 2);
  EXPECT_EQ(ippg.head_width(), 6);
  auto cfg = small_config();
  cfg.e_fix = 1;
  EXPECT_THROW(PpgAgent(AgentKind::kEa, 2, 3, 2, {}, cfg, 1, 2), std::invalid_argument);
  auto j = make_agent(AgentKind::kIppg, *scen, small_config(), 4)->to_json();
  spec.config.min_level = 0;
  EXPECT_THROW(load_agent(j, *synthetic_scenario(spec)), std::invalid_argument);
}

TEST(PpgAgent, TransitionsPerStep) {
  auto scen = synthetic_scenario(test::small_synthetic(3, 2, 2));
  Environment env(scen);
  uint64_t rng = 1;
  PpgAgent ippg(AgentKind::kIppg, 3, 2, 2, scen->config.scales, small_config(), 1);
  PpgAgent cppg(AgentKind::kCppg, 3, 2, 2, scen->config.scales, small_config(), 1);
  for (auto* agent : {&ippg, &cppg}) {
    auto s = env.states();
    auto d = agent->act(s, rng, false);
    agent->record(s, d, fake_outcome(1.0, s));
  }
  EXPECT_EQ(ippg.buffer().size(), 3u);
  EXPECT_EQ(cppg.buffer().size(), 1u);
  EXPECT_EQ(cppg.buffer()[0].actions.size(), 3u);
  EXPECT_EQ(cppg.buffer()[0].state.size(), 3u * UserState::dimension(2, 2));
}

TEST(PpgAgent, UpdateEveryNTasks) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  Environment env(scen);
  auto cfg = small_config();
  cfg.n_update = 4;
  PpgAgent agent(AgentKind::kIppg, 2, 2, 2, scen->config.scales, cfg, 1);
  uint64_t rng = 5;
  std::vector<int> fired;
  for (int task = 1; task <= 12; ++task) {
    auto s = env.states();
    auto d = agent.act(s, rng, false);
    agent.record(s, d, fake_outcome(uniform01(rng), s));
    if (agent.end_task()) fired.push_back(task);
  }
  EXPECT_EQ(fired, (std::vector<int>{4, 8, 12}));
  EXPECT_EQ(agent.updates(), 3);
  EXPECT_TRUE(agent.buffer().empty());
}

TEST(PpgAgent, KlIsZeroWhenUnchangedAndPositiveAfterUpdate) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  Environment env(scen);
  PpgAgent agent(AgentKind::kIppg, 2, 2, 2, scen->config.scales, small_config(), 1);
  uint64_t rng = 2;
  for (int i = 0; i < 20; ++i) {
    auto s = env.states();
    auto d = agent.act(s, rng, false);
    agent.record(s, d, fake_outcome(d.action[0].level == 1 ? 1.0 : -1.0, s));
  }
  const nn::DenseNet before = agent.actor();
  EXPECT_NEAR(agent.mean_kl(before), 0.0, 1e-15);
  // Keep a copy of the buffer to measure the drift after the update clears it.
  std::vector<Transition> kept(agent.buffer().begin(), agent.buffer().end());
  auto stats = agent.update();
  for (auto& t : kept) agent.push(t);
  EXPECT_GT(agent.mean_kl(before), 0.0);
  EXPECT_GE(stats.kl, 0.0);
  EXPECT_TRUE(std::isfinite(stats.policy_loss));
}

TEST(PpgAgent, EntropyBonusKeepsPolicyWider) {
  // Same data, same seeds; the larger entropy weight ends with higher entropy.
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  Environment env(scen);
  auto run = [&](double beta) {
    auto cfg = small_config();
    cfg.entropy_weight = beta;
    cfg.n_policy = 20;
    PpgAgent agent(AgentKind::kIppg, 2, 2, 2, scen->config.scales, cfg, 1);
    uint64_t rng = 9;
    for (int i = 0; i < 40; ++i) {
      auto s = env.states();
      auto d = agent.act(s, rng, false);
      agent.record(s, d, fake_outcome(d.choices[0] == 4 ? 1.0 : 0.0, s));
    }
    agent.update();
    double h = 0.0;
    for (const auto& z : agent.logits(env.states()[0].features(scen->config.scales)))
      h += nn::entropy(nn::softmax(z));
    return h;
  };
  const double low = run(0.0), high = run(1.0);
  EXPECT_GT(high, low);
}

TEST(PpgAgent, CheckpointRoundTrip) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  for (auto kind : {AgentKind::kCppg, AgentKind::kIppg, AgentKind::kEa, AgentKind::kEgreedy}) {
    auto agent = make_agent(kind, *scen, small_config(), 4);
    auto j = agent->to_json();
    auto loaded = load_agent(j, *scen);
    EXPECT_EQ(loaded->kind(), kind);
    EXPECT_EQ(loaded->to_json().dump(), j.dump());
  }
  auto other = synthetic_scenario(test::small_synthetic(2, 3, 2));
  auto j = make_agent(AgentKind::kIppg, *scen, small_config(), 4)->to_json();
  EXPECT_THROW(load_agent(j, *other), std::invalid_argument);
}

TEST(AgentConfig, ValidationAndJson) {
  AgentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eps_clip = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AgentConfig{};
  c.dual_clip = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AgentConfig{};
  c.hidden = {8};
  c.lr = 0.01;
  auto back = AgentConfig::from_json(c.to_json());
  EXPECT_EQ(back.hidden, c.hidden);
  EXPECT_EQ(back.lr, 0.01);
  EXPECT_EQ(agent_kind_from_string("cppg"), AgentKind::kCppg);
  EXPECT_THROW(agent_kind_from_string("dqn"), std::invalid_argument);
}

TEST(EgreedyAgent, UniformWhenEpsilonIsOne) {
  auto scen = synthetic_scenario(test::small_synthetic(1, 2, 2));
  auto cfg = small_config();
  cfg.eps_start = cfg.eps_end = 1.0;
  EgreedyAgent agent(1, 2, 2, scen->config.scales, cfg, 1);
  Environment env(scen);
  uint64_t rng = 3;
  const int arms = agent.arms(), n = 9000;
  std::vector<int> counts(arms);
  for (int i = 0; i < n; ++i) ++counts[agent.act(env.states(), rng, false).choices[0]];
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / arms;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 26.12);  // chi-square 99.9% quantile, 8 degrees of freedom
}

TEST(EgreedyAgent, EpsilonDecaysLinearly) {
  auto scen = synthetic_scenario(test::small_synthetic(1, 1, 1));
  auto cfg = small_config();
  cfg.eps_decay_steps = 10;
  EgreedyAgent agent(1, 1, 1, scen->config.scales, cfg, 1);
  Environment env(scen);
  uint64_t rng = 1;
  EXPECT_EQ(agent.epsilon(), 1.0);
  for (int i = 0; i < 5; ++i) {
    auto s = env.states();
    agent.record(s, agent.act(s, rng, false), fake_outcome(0.0, s));
  }
  EXPECT_NEAR(agent.epsilon(), 1.0 + (0.05 - 1.0) * 0.5, 1e-15);
  for (int i = 0; i < 10; ++i) {
    auto s = env.states();
    agent.record(s, agent.act(s, rng, false), fake_outcome(0.0, s));
  }
  EXPECT_EQ(agent.epsilon(), 0.05);
}

TEST(EgreedyAgent, RegressesConstantArmValue) {
  auto scen = synthetic_scenario(test::small_synthetic(1, 1, 1));
  EgreedyAgent agent(1, 1, 1, scen->config.scales, small_config(), 1);
  Environment env(scen);
  const auto x = env.states()[0].features(scen->config.scales);
  for (int i = 0; i < 1000; ++i) agent.regress({x}, {2}, 0.7, 1e-2);
  EXPECT_NEAR(agent.predict(x)[2], 0.7, 1e-2);
}

TEST(Training, CurveAndDeterminism) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 1, 1));
  TrainOptions o;
  o.kind = AgentKind::kIppg;
  o.episodes = 3;
  o.config = small_config();
  auto a = train(scen, o);
  auto b = train(scen, o);
  ASSERT_EQ(a.curve.size(), 3u);
  EXPECT_EQ(learning_curve_csv(a.curve), learning_curve_csv(b.curve));
  EXPECT_EQ(a.transitions, 3 * 6 * 2);
  const auto csv = learning_curve_csv(a.curve);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "episode,mean_reward,psnr,rt,energy,dv_pct,policy_loss,value_loss,entropy,aux_loss,kl,updates");
  o.kind = AgentKind::kCppg;
  o.config.cppg_episode_multiplier = 2.0;
  EXPECT_EQ(train(scen, o).curve.size(), 6u);
}

TEST(Evaluation, AgentNeverBeatsOracle) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  for (auto kind : {AgentKind::kCppg, AgentKind::kIppg, AgentKind::kEa, AgentKind::kEgreedy}) {
    auto agent = make_agent(kind, *scen, small_config(), 3);
    EvalOptions o;
    o.episodes = 2;
    o.with_oracle = true;
    auto r = evaluate(*agent, scen, o);
    ASSERT_EQ(r.oracle_step_rewards.size(), r.outcomes.size());
    for (size_t i = 0; i < r.outcomes.size(); ++i)
      EXPECT_LE(r.outcomes[i].reward, r.oracle_step_rewards[i]);
    EXPECT_GE(r.summary.dv_pct, 0.0);
    EXPECT_LE(r.summary.dv_pct, 100.0);
    ASSERT_TRUE(r.oracle_summary.has_value());
  }
}

TEST(Evaluation, SummaryCsvColumns) {
  EpisodeSummary s;
  const auto csv = summary_csv({{"ippg", s}}, 3);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "policy,users,reward,psnr_mean,psnr_p5,psnr_p95,rt_mean,rt_p5,rt_p95,energy_mean,"
            "energy_p5,energy_p95,dv_pct");
}

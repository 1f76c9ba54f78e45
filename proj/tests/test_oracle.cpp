#include <gtest/gtest.h>

#include <algorithm>

#include "eto/oracle.hpp"
#include "eto/scenario_io.hpp"
#include "eto/util.hpp"
#include "support.hpp"

using namespace eto;

namespace {

// Enumerates every joint action through Environment::evaluate and returns the
// first maximizer in lexicographic (e1,u1,e2,u2,...) order.
std::pair<JointAction, double> enumerate(const Environment& env, const RewardParams& w) {
  const auto& scen = env.scenario();
  const int users = scen.config.users, targets = scen.config.channels + 1;
  const int lo = scen.min_level(), hi = scen.layers;
  JointAction ja(users, {lo, 0}), best;
  double best_r = -1e300;
  while (true) {
    const double r = env.evaluate(ja, w).reward;
    if (r > best_r) {
      best_r = r;
      best = ja;
    }
    int k = users - 1;
    for (; k >= 0; --k) {
      if (++ja[k].target < targets) break;
      ja[k].target = 0;
      if (++ja[k].level <= hi) break;
      ja[k].level = lo;
    }
    if (k < 0) break;
  }
  return {best, best_r};
}

}  // namespace

TEST(Oracle, SingleUserEnumeratesFourActions) {
  test::TinySpec t;
  auto scen = test::tiny_scenario(t);
  Environment env(scen);
  env.reset(1);
  auto res = best_joint_action(env, scen->config.reward);
  EXPECT_EQ(res.evaluations, 4u);
  for (int e = 0; e < 2; ++e)
    for (int u = 0; u < 2; ++u) EXPECT_GE(res.reward, env.evaluate({{e, u}}).reward);
}

TEST(Oracle, QualityOnlyWeightsPickMaxLevelOffload) {
  test::TinySpec t;
  t.users = 2;
  t.beta = 2e-3;  // local decoding misses the deadline at any level
  t.uplink_bps = {1e15};
  t.downlink_bps = {1e15};
  ScenarioConfig cfg;
  cfg.compute.z_mec_bps = 1e18;
  auto scen = test::tiny_scenario(t, cfg);
  Environment env(scen);
  env.reset(1);
  RewardParams w = scen->config.reward;
  w.w0 = 1.0;
  w.w1 = w.w2 = 0.0;
  auto res = best_joint_action(env, w);
  ASSERT_EQ(res.action.size(), 2u);
  for (const auto& a : res.action) EXPECT_EQ(a, (UserAction{1, 1}));
}

TEST(Oracle, CardinalityAtThreeUsers) {
  auto spec = test::small_synthetic(3, 7, 3);
  spec.config.min_level = 1;
  auto scen = synthetic_scenario(spec);
  Environment env(scen);
  auto res = best_joint_action(env, scen->config.reward);
  EXPECT_EQ(res.evaluations, 21952u);
  spec.config.min_level = 0;
  Environment full(synthetic_scenario(spec));
  EXPECT_EQ(best_joint_action(full, scen->config.reward).evaluations, 32768u);
}

TEST(Oracle, MinLevelEnumerationMatches) {
  auto spec = test::small_synthetic(2, 3, 2);
  spec.config.min_level = 1;
  auto scen = synthetic_scenario(spec);
  Environment env(scen);
  for (int trial = 0; trial < 5; ++trial) {
    env.reset(trial);
    auto res = best_joint_action(env, scen->config.reward);
    auto [action, reward] = enumerate(env, scen->config.reward);
    EXPECT_EQ(res.reward, reward);
    EXPECT_EQ(res.action, action);
    for (const auto& a : res.action) EXPECT_GE(a.level, 1);
  }
}

TEST(Oracle, MatchesIndependentEnumerationWithTieBreak) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  Environment env(scen);
  uint64_t rng = 12;
  for (int trial = 0; trial < 20; ++trial) {
    env.reset(trial);
    RewardParams w = scen->config.reward;
    w.w0 = uniform01(rng);
    w.w1 = uniform01(rng);
    w.w2 = uniform01(rng);
    auto res = best_joint_action(env, w);
    auto [action, reward] = enumerate(env, w);
    EXPECT_EQ(res.reward, reward);
    EXPECT_EQ(res.action, action);
  }
}

TEST(Oracle, ParallelEqualsSerial) {
  auto scen = synthetic_scenario(test::small_synthetic(3, 3, 3));
  Environment env(scen);
  for (uint64_t s = 0; s < 5; ++s) {
    env.reset(s);
    auto a = best_joint_action(env, scen->config.reward);
    auto b = best_joint_action_serial(env, scen->config.reward);
    EXPECT_EQ(a.reward, b.reward);
    EXPECT_EQ(a.action, b.action);
  }
}

TEST(Oracle, RefusesAboveCap) {
  auto scen = synthetic_scenario(test::small_synthetic(5, 1, 1));
  Environment env(scen);
  EXPECT_THROW(best_joint_action(env, scen->config.reward), OracleRefused);
  EXPECT_NO_THROW(best_joint_action(env, scen->config.reward, 5));
}

TEST(ApproxOracle, NeverExceedsExact) {
  auto scen = synthetic_scenario(test::small_synthetic(3, 3, 2));
  Environment env(scen);
  for (uint64_t s = 0; s < 20; ++s) {
    env.reset(s);
    auto exact = best_joint_action(env, scen->config.reward);
    auto approx = approx_joint_action(env, scen->config.reward, 3, s);
    EXPECT_LE(approx.reward, exact.reward);
    EXPECT_EQ(approx.reward, env.evaluate(approx.action).reward);
  }
}

TEST(ApproxOracle, SingleUserIsExact) {
  auto scen = synthetic_scenario(test::small_synthetic(1, 4, 3));
  Environment env(scen);
  for (uint64_t s = 0; s < 10; ++s) {
    env.reset(s);
    EXPECT_EQ(approx_joint_action(env, scen->config.reward, 1, s).reward,
              best_joint_action(env, scen->config.reward).reward);
  }
}

TEST(ApproxOracle, Reproducible) {
  auto scen = synthetic_scenario(test::small_synthetic(6, 3, 2));
  Environment env(scen);
  env.reset(3);
  auto a = approx_joint_action(env, scen->config.reward, 4, 99);
  auto b = approx_joint_action(env, scen->config.reward, 4, 99);
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_THROW(approx_joint_action(env, scen->config.reward, 0, 1), std::invalid_argument);
}

namespace {

std::vector<FrontierPoint> random_points(uint64_t seed, int n, int grid) {
  uint64_t rng = seed;
  std::vector<FrontierPoint> pts(n);
  for (auto& p : pts) {
    // A coarse grid forces exact ties on some objectives.
    p.psnr_db = grid ? uniform_int(rng, grid) : uniform(rng, 20, 45);
    p.rt_s = grid ? uniform_int(rng, grid) : uniform(rng, 0, 2);
    p.energy_j = grid ? uniform_int(rng, grid) : uniform(rng, 0, 1);
  }
  return pts;
}

bool dominates(const FrontierPoint& a, const FrontierPoint& b) {
  const bool no_worse = a.psnr_db >= b.psnr_db && a.rt_s <= b.rt_s && a.energy_j <= b.energy_j;
  const bool better = a.psnr_db > b.psnr_db || a.rt_s < b.rt_s || a.energy_j < b.energy_j;
  return no_worse && better;
}

}  // namespace

TEST(Pareto, FiltersAgree) {
  for (int grid : {0, 5, 12}) {
    auto pts = random_points(grid + 1, 1000, grid);
    auto a = nondominated_pairwise(pts);
    auto b = nondominated_sorted(pts);
    EXPECT_EQ(a, b);
    for (unsigned mask : {3u, 5u, 6u}) EXPECT_EQ(nondominated_pairwise(pts, mask), nondominated_sorted(pts, mask));
  }
}

TEST(Pareto, FrontierMatchesDefinition) {
  auto pts = random_points(3, 400, 7);
  auto flags = nondominated_sorted(pts);
  for (size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < pts.size(); ++j) dominated |= dominates(pts[j], pts[i]);
    EXPECT_EQ(flags[i], dominated ? 0 : 1) << i;
  }
}

TEST(Pareto, SingleWeightIsItsOwnFrontier) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  SweepOptions o;
  o.n_weights = 1;
  auto r = pareto_sweep(scen, o);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.on_frontier[0], 1);
}

TEST(Pareto, SweepDeterministicAndSerialEqual) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 2, 2));
  SweepOptions o;
  o.n_weights = 40;
  o.seed = 5;
  const auto a = sweep_csv(pareto_sweep(scen, o));
  EXPECT_EQ(a, sweep_csv(pareto_sweep(scen, o)));
  EXPECT_EQ(a, sweep_csv(pareto_sweep_serial(scen, o)));
  EXPECT_EQ(a.substr(0, a.find(',', a.find("on_frontier"))),
            "w0,w1,w2,psnr_db,rt_s,energy_j,reward,on_frontier");
}

TEST(Pareto, FrontierTradeOff) {
  auto scen = synthetic_scenario(test::small_synthetic(2, 3, 2));
  SweepOptions o;
  o.n_weights = 200;
  auto r = pareto_sweep(scen, o);
  const FrontierPoint *best_q = nullptr, *best_e = nullptr;
  for (size_t i = 0; i < r.points.size(); ++i) {
    if (!r.on_frontier[i]) continue;
    const auto& p = r.points[i];
    for (size_t j = 0; j < r.points.size(); ++j) EXPECT_FALSE(dominates(r.points[j], p));
    if (!best_q || p.psnr_db > best_q->psnr_db) best_q = &p;
    if (!best_e || p.energy_j < best_e->energy_j) best_e = &p;
  }
  ASSERT_TRUE(best_q && best_e);
  EXPECT_GE(best_q->energy_j, best_e->energy_j);
  for (const auto& p : r.points) {
    EXPECT_GE(p.w0, 0.0);
    EXPECT_LT(p.w0, 1.0);
  }
}

TEST(Pareto, ApproxRequiredAboveCap) {
  auto scen = synthetic_scenario(test::small_synthetic(5, 1, 1));
  SweepOptions o;
  o.n_weights = 3;
  EXPECT_THROW(pareto_sweep(scen, o), OracleRefused);
  o.approx = true;
  EXPECT_TRUE(pareto_sweep(scen, o).approximate);
}

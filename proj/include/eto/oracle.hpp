#ifndef ETO_ORACLE_HPP_
#define ETO_ORACLE_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eto/environment.hpp"

namespace eto {

inline constexpr int kDefaultBruteForceCap = 4;

class OracleRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  JointAction action;
  double reward = 0.0;
  uint64_t evaluations = 0;
};

// Exhaustive argmax of the one-step reward over all ((L+1)(C+1))^K joint
// actions. Ties go to the lexicographically smallest (e1,u1,e2,u2,...).
// Throws OracleRefused when K exceeds `cap`.
OracleResult best_joint_action(const Environment& env, const RewardParams& params,
                               int cap = kDefaultBruteForceCap);

// Single-threaded reference for best_joint_action; same result bit for bit.
OracleResult best_joint_action_serial(const Environment& env, const RewardParams& params,
                                      int cap = kDefaultBruteForceCap);

// Coordinate ascent over users from `restarts` random starts (the first start
// is all-local base layer). Never exceeds the exhaustive optimum.
OracleResult approx_joint_action(const Environment& env, const RewardParams& params,
                                 int restarts, uint64_t seed);

struct FrontierPoint {
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  double psnr_db = 0.0;  // mean Q over the episode
  double rt_s = 0.0;
  double energy_j = 0.0;
  double reward = 0.0;
};

enum Objective : unsigned { kPsnr = 1u, kRt = 2u, kEnergy = 4u, kAllObjectives = 7u };

// Non-dominated flags under (maximize PSNR, minimize RT, minimize energy),
// restricted to the objectives in `mask`.
std::vector<uint8_t> nondominated_pairwise(std::span<const FrontierPoint> points,
                                           unsigned mask = kAllObjectives);
// Lexicographic sort then scan against the accepted set.
std::vector<uint8_t> nondominated_sorted(std::span<const FrontierPoint> points,
                                         unsigned mask = kAllObjectives);

struct SweepOptions {
  int n_weights = 10000;
  uint64_t seed = 1;
  bool approx = false;  // required when K exceeds the cap
  int restarts = 4;
  int cap = kDefaultBruteForceCap;
};

struct SweepResult {
  std::vector<FrontierPoint> points;
  std::vector<uint8_t> on_frontier;  // 3-D
  std::vector<uint8_t> front_rt_energy;
  std::vector<uint8_t> front_psnr_energy;
  std::vector<uint8_t> front_psnr_rt;
  bool approximate = false;
};

// Weight vectors drawn uniformly in [0,1]^3; each runs one oracle-controlled
// episode on the same seeded environment. Parallel over weights.
SweepResult pareto_sweep(const std::shared_ptr<const Scenario>& scenario,
                         const SweepOptions& options);
SweepResult pareto_sweep_serial(const std::shared_ptr<const Scenario>& scenario,
                                const SweepOptions& options);

// w0,w1,w2,psnr_db,rt_s,energy_j,reward,on_frontier followed by the three
// 2-D frontier flags.
std::string sweep_csv(const SweepResult& result);

}  // namespace eto

#endif  // ETO_ORACLE_HPP_

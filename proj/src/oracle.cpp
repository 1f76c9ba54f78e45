#include "eto/oracle.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

#ifdef ETO_HAVE_OPENMP
#include <omp.h>
#endif

#include "eto/util.hpp"

namespace eto {

namespace {

uint64_t joint_space_size(int options, int users) {
  uint64_t total = 1;
  for (int k = 0; k < users; ++k) total *= static_cast<uint64_t>(options);
  return total;
}

// Mixed-radix decode; user 0 is the most significant digit so that index
// order matches lexicographic order of the action vector.
void decode(uint64_t index, int options, std::vector<int>& digits) {
  for (int k = static_cast<int>(digits.size()) - 1; k >= 0; --k) {
    digits[k] = static_cast<int>(index % options);
    index /= options;
  }
}

void advance(int options, std::vector<int>& digits) {
  for (int k = static_cast<int>(digits.size()) - 1; k >= 0; --k) {
    if (++digits[k] < options) return;
    digits[k] = 0;
  }
}

struct Best {
  double reward = -std::numeric_limits<double>::infinity();
  uint64_t index = std::numeric_limits<uint64_t>::max();

  void offer(double r, uint64_t i) {
    if (r > reward || (r == reward && i < index)) {
      reward = r;
      index = i;
    }
  }
};

// Scans [begin, end) in ascending index order.
Best scan_range(const StepEvaluator& eval, const RewardParams& params, uint64_t begin,
                uint64_t end) {
  Best best;
  if (begin >= end) return best;
  std::vector<int> digits(eval.users());
  decode(begin, eval.options(), digits);
  for (uint64_t i = begin; i < end; ++i) {
    const double r = eval.reward(digits, params);
    if (r > best.reward) {
      best.reward = r;
      best.index = i;
    }
    advance(eval.options(), digits);
  }
  return best;
}

OracleResult finish(const StepEvaluator& eval, const Best& best, uint64_t evaluations) {
  OracleResult res;
  std::vector<int> digits(eval.users());
  decode(best.index, eval.options(), digits);
  for (int d : digits) res.action.push_back(eval.option_action(d));
  res.reward = best.reward;
  res.evaluations = evaluations;
  return res;
}

void check_cap(const Environment& env, int cap) {
  const int users = env.scenario().config.users;
  if (users > cap)
    throw OracleRefused(fmt::format(
        "exhaustive oracle refuses K={} (cap {}); use the approximate mode", users, cap));
}

}  // namespace

OracleResult best_joint_action_serial(const Environment& env, const RewardParams& params,
                                      int cap) {
  check_cap(env, cap);
  const StepEvaluator eval(env);
  const uint64_t total = joint_space_size(eval.options(), eval.users());
  return finish(eval, scan_range(eval, params, 0, total), total);
}

OracleResult best_joint_action(const Environment& env, const RewardParams& params, int cap) {
  check_cap(env, cap);
  const StepEvaluator eval(env);
  const uint64_t total = joint_space_size(eval.options(), eval.users());
#ifdef ETO_HAVE_OPENMP
  const int threads = omp_get_max_threads();
  if (threads > 1 && total >= 4096) {
    const auto chunks = static_cast<int64_t>(threads) * 4;
    std::vector<Best> partial(static_cast<size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
    for (int64_t c = 0; c < chunks; ++c) {
      const uint64_t begin = total * static_cast<uint64_t>(c) / static_cast<uint64_t>(chunks);
      const uint64_t end = total * static_cast<uint64_t>(c + 1) / static_cast<uint64_t>(chunks);
      partial[static_cast<size_t>(c)] = scan_range(eval, params, begin, end);
    }
    Best best;
    for (const auto& p : partial) best.offer(p.reward, p.index);
    return finish(eval, best, total);
  }
#endif
  return finish(eval, scan_range(eval, params, 0, total), total);
}

OracleResult approx_joint_action(const Environment& env, const RewardParams& params,
                                 int restarts, uint64_t seed) {
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  const StepEvaluator eval(env);
  const int users = eval.users();
  const int options = eval.options();
  uint64_t rng = derive_seed(seed, 0x617070);
  Best best;
  std::vector<int> best_digits;
  uint64_t evaluations = 0;
  std::vector<int> digits(users);
  for (int r = 0; r < restarts; ++r) {
    for (int k = 0; k < users; ++k) digits[k] = r == 0 ? 0 : uniform_int(rng, options);
    double current = eval.reward(digits, params);
    ++evaluations;
    bool improved = true;
    while (improved) {
      improved = false;
      for (int k = 0; k < users; ++k) {
        const int keep = digits[k];
        int arg = keep;
        double val = current;
        for (int o = 0; o < options; ++o) {
          if (o == keep) continue;
          digits[k] = o;
          const double v = eval.reward(digits, params);
          ++evaluations;
          if (v > val || (v == val && o < arg)) {
            val = v;
            arg = o;
          }
        }
        digits[k] = arg;
        if (arg != keep) {
          improved = true;
          current = val;
        }
      }
    }
    uint64_t flat = 0;
    for (int d : digits) flat = flat * static_cast<uint64_t>(options) + static_cast<uint64_t>(d);
    if (current > best.reward || (current == best.reward && flat < best.index)) {
      best.reward = current;
      best.index = flat;
      best_digits = digits;
    }
  }
  OracleResult res;
  for (int d : best_digits) res.action.push_back(eval.option_action(d));
  res.reward = best.reward;
  res.evaluations = evaluations;
  return res;
}

// ---------------------------------------------------------------------------

namespace {

std::array<double, 3> objectives(const FrontierPoint& p) {
  return {-p.psnr_db, p.rt_s, p.energy_j};
}

bool dominates(const std::array<double, 3>& a, const std::array<double, 3>& b, unsigned mask) {
  bool strict = false;
  for (int i = 0; i < 3; ++i) {
    if (!(mask & (1u << i))) continue;
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

}  // namespace

std::vector<uint8_t> nondominated_pairwise(std::span<const FrontierPoint> points, unsigned mask) {
  std::vector<uint8_t> flags(points.size(), 1);
  for (size_t i = 0; i < points.size(); ++i) {
    const auto oi = objectives(points[i]);
    for (size_t j = 0; j < points.size(); ++j) {
      if (i != j && dominates(objectives(points[j]), oi, mask)) {
        flags[i] = 0;
        break;
      }
    }
  }
  return flags;
}

std::vector<uint8_t> nondominated_sorted(std::span<const FrontierPoint> points, unsigned mask) {
  std::vector<std::array<double, 3>> obj(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    obj[i] = objectives(points[i]);
    for (int d = 0; d < 3; ++d)
      if (!(mask & (1u << d))) obj[i][d] = 0.0;
  }
  std::vector<size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return obj[a] < obj[b]; });
  // A dominator is never lexicographically larger, so each point only needs
  // checking against the frontier accepted before it.
  std::vector<uint8_t> flags(points.size(), 0);
  std::vector<size_t> accepted;
  for (size_t idx : order) {
    bool dominated = false;
    for (size_t a : accepted) {
      if (dominates(obj[a], obj[idx], mask)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) {
      accepted.push_back(idx);
      flags[idx] = 1;
    }
  }
  return flags;
}

namespace {

std::vector<std::array<double, 3>> sample_weights(const SweepOptions& options) {
  uint64_t rng = derive_seed(options.seed, 0x77656967);
  std::vector<std::array<double, 3>> w(static_cast<size_t>(options.n_weights));
  for (auto& v : w)
    for (double& x : v) x = uniform01(rng);
  return w;
}

FrontierPoint run_weight(const std::shared_ptr<const Scenario>& scenario,
                         const SweepOptions& options, const std::array<double, 3>& w,
                         size_t index) {
  Environment env(scenario);
  env.reset(derive_seed(options.seed, 0x657069));
  RewardParams params = scenario->config.reward;
  params.w0 = w[0];
  params.w1 = w[1];
  params.w2 = w[2];
  FrontierPoint p{w[0], w[1], w[2]};
  int steps = 0;
  while (!env.done()) {
    OracleResult best =
        options.approx ? approx_joint_action(env, params, options.restarts,
                                             derive_seed(options.seed, index * 1000003 + steps))
                       : best_joint_action_serial(env, params, options.cap);
    StepOutcome out = env.step(best.action, params);
    p.psnr_db += out.quality;
    p.rt_s += out.mean_rt_s;
    p.energy_j += out.mean_energy_j;
    p.reward += out.reward;
    ++steps;
  }
  p.psnr_db /= steps;
  p.rt_s /= steps;
  p.energy_j /= steps;
  p.reward /= steps;
  return p;
}

void check_sweep(const Scenario& scenario, const SweepOptions& options) {
  if (options.n_weights < 1) throw std::invalid_argument("n_weights must be >= 1");
  if (!options.approx && scenario.config.users > options.cap)
    throw OracleRefused(fmt::format(
        "K={} exceeds the brute-force cap {}; rerun with --approx", scenario.config.users,
        options.cap));
}

void mark_frontiers(SweepResult& res) {
  res.on_frontier = nondominated_sorted(res.points, kAllObjectives);
  res.front_rt_energy = nondominated_sorted(res.points, kRt | kEnergy);
  res.front_psnr_energy = nondominated_sorted(res.points, kPsnr | kEnergy);
  res.front_psnr_rt = nondominated_sorted(res.points, kPsnr | kRt);
}

}  // namespace

SweepResult pareto_sweep_serial(const std::shared_ptr<const Scenario>& scenario,
                                const SweepOptions& options) {
  check_sweep(*scenario, options);
  const auto weights = sample_weights(options);
  SweepResult res;
  res.approximate = options.approx;
  res.points.resize(weights.size());
  for (size_t i = 0; i < weights.size(); ++i)
    res.points[i] = run_weight(scenario, options, weights[i], i);
  mark_frontiers(res);
  return res;
}

SweepResult pareto_sweep(const std::shared_ptr<const Scenario>& scenario,
                         const SweepOptions& options) {
  check_sweep(*scenario, options);
  const auto weights = sample_weights(options);
  SweepResult res;
  res.approximate = options.approx;
  res.points.resize(weights.size());
  const auto n = static_cast<int64_t>(weights.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < n; ++i)
    res.points[static_cast<size_t>(i)] =
        run_weight(scenario, options, weights[static_cast<size_t>(i)], static_cast<size_t>(i));
  mark_frontiers(res);
  return res;
}

std::string sweep_csv(const SweepResult& r) {
  std::string out =
      "w0,w1,w2,psnr_db,rt_s,energy_j,reward,on_frontier,on_frontier_rt_energy,"
      "on_frontier_psnr_energy,on_frontier_psnr_rt\n";
  for (size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", format_double(p.w0),
                       format_double(p.w1), format_double(p.w2), format_double(p.psnr_db),
                       format_double(p.rt_s), format_double(p.energy_j), format_double(p.reward),
                       r.on_frontier[i], r.front_rt_energy[i], r.front_psnr_energy[i],
                       r.front_psnr_rt[i]);
  }
  return out;
}

}  // namespace eto

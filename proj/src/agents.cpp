#include "eto/agents.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eto/util.hpp"

namespace eto {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kCppg: return "cppg";
    case AgentKind::kIppg: return "ippg";
    case AgentKind::kEgreedy: return "egreedy";
    case AgentKind::kEa: return "ea";
  }
  return "?";
}

AgentKind agent_kind_from_string(const std::string& text) {
  if (text == "cppg") return AgentKind::kCppg;
  if (text == "ippg") return AgentKind::kIppg;
  if (text == "egreedy") return AgentKind::kEgreedy;
  if (text == "ea") return AgentKind::kEa;
  throw std::invalid_argument("unknown agent '" + text + "' (expected cppg, ippg, egreedy, ea)");
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("agent config: " + m); };
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) fail("eps_clip must be in (0,1)");
  if (!(dual_clip > 1.0)) fail("dual_clip must be > 1");
  if (entropy_weight < 0.0) fail("entropy_weight must be >= 0");
  if (n_policy < 1 || n_aux < 1 || n_update < 1) fail("n_policy, n_aux, n_update must be >= 1");
  if (minibatch < 1) fail("minibatch must be >= 1");
  if (gamma != 0.0) fail("gamma is fixed at 0");
  if (!(lr > 0.0) || !(egreedy_lr > 0.0)) fail("learning rates must be > 0");
  if (buffer_capacity < 1) fail("buffer_capacity must be >= 1");
  if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0)
    fail("epsilon schedule must stay in [0,1]");
  if (eps_decay_steps < 0) fail("eps_decay_steps must be >= 0");
  if (!(cppg_episode_multiplier > 0.0)) fail("cppg_episode_multiplier must be > 0");
  for (int w : hidden)
    if (w < 1) fail("hidden widths must be >= 1");
}

nlohmann::json AgentConfig::to_json() const {
  return {{"eps_clip", eps_clip},
          {"dual_clip", dual_clip},
          {"entropy_weight", entropy_weight},
          {"n_policy", n_policy},
          {"n_aux", n_aux},
          {"n_update", n_update},
          {"minibatch", minibatch},
          {"gamma", gamma},
          {"lr", lr},
          {"max_grad_norm", max_grad_norm},
          {"normalize_advantages", normalize_advantages},
          {"hidden", hidden},
          {"activation", nn::to_string(activation)},
          {"buffer_capacity", buffer_capacity},
          {"eps_start", eps_start},
          {"eps_end", eps_end},
          {"eps_decay_steps", eps_decay_steps},
          {"egreedy_lr", egreedy_lr},
          {"e_fix", e_fix},
          {"cppg_episode_multiplier", cppg_episode_multiplier}};
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j) {
  AgentConfig c;
  c.eps_clip = j.value("eps_clip", c.eps_clip);
  c.dual_clip = j.value("dual_clip", c.dual_clip);
  c.entropy_weight = j.value("entropy_weight", c.entropy_weight);
  c.n_policy = j.value("n_policy", c.n_policy);
  c.n_aux = j.value("n_aux", c.n_aux);
  c.n_update = j.value("n_update", c.n_update);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.gamma = j.value("gamma", c.gamma);
  c.lr = j.value("lr", c.lr);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
  c.hidden = j.value("hidden", c.hidden);
  c.activation = nn::activation_from_string(j.value("activation", std::string("tanh")));
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.eps_start = j.value("eps_start", c.eps_start);
  c.eps_end = j.value("eps_end", c.eps_end);
  c.eps_decay_steps = j.value("eps_decay_steps", c.eps_decay_steps);
  c.egreedy_lr = j.value("egreedy_lr", c.egreedy_lr);
  c.e_fix = j.value("e_fix", c.e_fix);
  c.cppg_episode_multiplier = j.value("cppg_episode_multiplier", c.cppg_episode_multiplier);
  c.validate();
  return c;
}

double ppo_objective(double ratio, double adv, double eps, double c, bool dual) {
  const double unclipped = ratio * adv;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
  const double l = std::min(unclipped, clipped);
  if (dual && adv < 0.0) return std::max(l, c * adv);
  return l;
}

double ppo_objective_grad(double ratio, double adv, double eps, double c, bool dual) {
  const double unclipped = ratio * adv;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
  const double l = std::min(unclipped, clipped);
  if (dual && adv < 0.0 && c * adv > l) return 0.0;
  return unclipped <= clipped ? adv : 0.0;
}

namespace {

std::vector<double> concat_features(const std::vector<UserState>& states,
                                    const FeatureScales& scales) {
  std::vector<double> x;
  for (const auto& s : states) {
    auto f = s.features(scales);
    x.insert(x.end(), f.begin(), f.end());
  }
  return x;
}

nn::Matrix to_matrix(const std::vector<std::vector<double>>& cols) {
  nn::Matrix m(static_cast<Eigen::Index>(cols.front().size()),
               static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j)
    for (size_t i = 0; i < cols[j].size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  return m;
}

std::vector<double> column(const nn::Matrix& m, Eigen::Index j) {
  return {m.col(j).data(), m.col(j).data() + m.rows()};
}

void shuffle(std::vector<size_t>& v, uint64_t& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<size_t>(uniform_int(rng, static_cast<int>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

nlohmann::json scales_json(const FeatureScales& s) {
  return {{"size_bits", s.size_bits}, {"intensity", s.intensity}, {"rate_bps", s.rate_bps}};
}

void check_finite(const LossStats& s) {
  for (double v : {s.policy_loss, s.value_loss, s.entropy, s.aux_loss, s.kl})
    if (!std::isfinite(v))
      throw std::runtime_error(fmt::format(
          "non-finite loss in update (policy {}, value {}, entropy {}, aux {}, kl {})",
          s.policy_loss, s.value_loss, s.entropy, s.aux_loss, s.kl));
}

void copy_params(nn::DenseNet& into, const nlohmann::json& j, const char* what) {
  nn::DenseNet loaded = nn::DenseNet::from_json(j);
  if (loaded.param_count() != into.param_count() || loaded.input_width() != into.input_width())
    throw std::invalid_argument(fmt::format("checkpoint {} network has input {} and {} parameters; "
                                            "scenario needs input {} and {} parameters",
                                            what, loaded.input_width(), loaded.param_count(),
                                            into.input_width(), into.param_count()));
  into.params() = loaded.params();
}

}  // namespace

// ---------------------------------------------------------------------------

PolicyLoss policy_loss(const nn::DenseNet& actor, int policy_heads, const nn::Matrix& x,
                       std::span<const PolicySample> batch, const PolicyLossOptions& o,
                       std::vector<double>& grad) {
  const auto m = static_cast<size_t>(x.cols());
  if (batch.size() != m) throw std::invalid_argument("one policy sample per input column");
  const double md = static_cast<double>(m);
  nn::DenseNet::Cache cache;
  const auto out = actor.forward(x, &cache);
  std::vector<nn::Matrix> d(out.size());
  for (int h = 0; h < policy_heads; ++h) d[h] = nn::Matrix::Zero(out[h].rows(), out[h].cols());
  PolicyLoss res;
  std::vector<std::vector<double>> probs(static_cast<size_t>(policy_heads));
  for (size_t j = 0; j < m; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const auto& s = batch[j];
    double log_ratio = 0.0;
    for (int h = 0; h < policy_heads; ++h) {
      const auto lp = nn::log_softmax(column(out[h], col));
      log_ratio += lp[s.actions[h]] - s.old_log_probs[h];
      probs[h].resize(lp.size());
      for (size_t i = 0; i < lp.size(); ++i) probs[h][i] = std::exp(lp[i]);
    }
    const double ratio = std::exp(log_ratio);
    const double a = s.advantage;
    const double obj = ppo_objective(ratio, a, o.eps_clip, o.dual_clip, o.dual);
    if (o.dual && a < 0.0 && obj < o.dual_clip * a)
      throw std::logic_error("dual-clip objective fell below c * advantage");
    if (a >= 0.0 && obj != ppo_objective(ratio, a, o.eps_clip, o.dual_clip, false))
      throw std::logic_error("dual clip active for a non-negative advantage");
    const double coef = -ppo_objective_grad(ratio, a, o.eps_clip, o.dual_clip, o.dual) * ratio / md;
    res.objective += obj / md;
    for (int h = 0; h < policy_heads; ++h) {
      const auto& p = probs[h];
      const double ent = nn::entropy(p);
      res.entropy += ent / md;
      for (size_t i = 0; i < p.size(); ++i) {
        const double onehot = static_cast<int>(i) == s.actions[h] ? 1.0 : 0.0;
        const double logp = p[i] > 0.0 ? std::log(p[i]) : 0.0;
        d[h](static_cast<Eigen::Index>(i), col) =
            coef * (onehot - p[i]) + o.entropy_weight * p[i] * (logp + ent) / md;
      }
    }
  }
  res.loss = -res.objective - o.entropy_weight * res.entropy;
  actor.backward(cache, d, grad);
  return res;
}

AuxLoss aux_loss(const nn::DenseNet& actor, int policy_heads, const nn::Matrix& x,
                 const std::vector<nn::Matrix>& reference_logits, const Eigen::VectorXd& targets,
                 std::vector<double>& grad) {
  const auto m = x.cols();
  const double md = static_cast<double>(m);
  const int aux_head = actor.head_index("aux_value");
  nn::DenseNet::Cache cache;
  const auto out = actor.forward(x, &cache);
  std::vector<nn::Matrix> d(out.size());
  AuxLoss res;
  for (int h = 0; h < policy_heads; ++h) {
    d[h] = nn::Matrix::Zero(out[h].rows(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto lq = nn::log_softmax(column(out[h], j));
      const auto lp = nn::log_softmax(column(reference_logits[h], j));
      for (size_t i = 0; i < lq.size(); ++i) {
        const double p_old = std::exp(lp[i]);
        res.kl += p_old * (lp[i] - lq[i]) / md;
        d[h](static_cast<Eigen::Index>(i), j) = (std::exp(lq[i]) - p_old) / md;
      }
    }
  }
  const Eigen::VectorXd vaux = out[aux_head].row(0).transpose();
  d[aux_head] = ((vaux - targets) / md).transpose();
  res.value = 0.5 * (vaux - targets).squaredNorm() / md;
  res.loss = res.kl + res.value;
  actor.backward(cache, d, grad);
  return res;
}

double value_loss(const nn::DenseNet& critic, const nn::Matrix& x, const Eigen::VectorXd& targets,
                  std::vector<double>& grad) {
  nn::DenseNet::Cache cache;
  const auto out = critic.forward(x, &cache);
  const double md = static_cast<double>(x.cols());
  const Eigen::VectorXd v = out[0].row(0).transpose();
  nn::Matrix d = ((v - targets) / md).transpose();
  critic.backward(cache, {d}, grad);
  return 0.5 * (v - targets).squaredNorm() / md;
}

PpgAgent::PpgAgent(AgentKind kind, int users, int layers, int channels, FeatureScales scales,
                   AgentConfig config, uint64_t seed, int min_level)
    : kind_(kind),
      users_(users),
      layers_(layers),
      channels_(channels),
      min_level_(min_level),
      scales_(scales),
      config_(std::move(config)),
      buffer_(config_.buffer_capacity),
      update_rng_(derive_seed(seed, 0x757064)) {
  if (kind == AgentKind::kEgreedy) throw std::invalid_argument("PpgAgent cannot be egreedy");
  config_.validate();
  if (min_level < 0 || min_level > layers)
    throw std::invalid_argument(fmt::format("min_level {} outside [0, {}]", min_level, layers));
  e_fix_ = config_.e_fix < 0 ? (layers + 1) / 2 : config_.e_fix;
  if (kind == AgentKind::kEa && (e_fix_ > layers || e_fix_ < min_level))
    throw std::invalid_argument(
        fmt::format("e_fix {} outside the selectable levels [{}, {}]", e_fix_, min_level, layers));
  if (kind == AgentKind::kEa) config_.e_fix = e_fix_;
  head_width_ =
      kind == AgentKind::kEa ? channels + 1 : (layers + 1 - min_level) * (channels + 1);
  const int dim = UserState::dimension(layers, channels);
  const int input = centralized() ? users * dim : dim;
  std::vector<nn::HeadSpec> heads;
  for (int h = 0; h < head_count(); ++h) heads.push_back({fmt::format("pi{}", h), head_width_, 0.01});
  if (has_aux_phase()) heads.push_back({"aux_value", 1, 1.0});
  actor_ = nn::DenseNet(input, config_.hidden, config_.activation, heads, derive_seed(seed, 1));
  critic_ = nn::DenseNet(input, config_.hidden, config_.activation, {{"value", 1, 1.0}},
                         derive_seed(seed, 2));
}

UserAction PpgAgent::to_action(int choice) const {
  if (kind_ == AgentKind::kEa) return {e_fix_, choice};
  return {min_level_ + choice / (channels_ + 1), choice % (channels_ + 1)};
}

std::vector<std::vector<double>> PpgAgent::inputs(const std::vector<UserState>& states) const {
  if (static_cast<int>(states.size()) != users_)
    throw std::invalid_argument(
        fmt::format("agent built for {} users received {} states", users_, states.size()));
  if (centralized()) return {concat_features(states, scales_)};
  std::vector<std::vector<double>> out;
  for (const auto& s : states) out.push_back(s.features(scales_));
  return out;
}

std::vector<std::vector<double>> PpgAgent::logits(const std::vector<double>& input) const {
  auto outs = actor_.forward(input);
  outs.resize(static_cast<size_t>(head_count()));
  return outs;
}

Decision PpgAgent::act(const std::vector<UserState>& states, uint64_t& rng, bool greedy) {
  const auto xs = inputs(states);
  const auto outs = actor_.forward(to_matrix(xs));
  Decision d;
  for (int k = 0; k < users_; ++k) {
    const auto z = centralized() ? column(outs[k], 0) : column(outs[0], k);
    const nn::Sample s = greedy ? nn::softmax_greedy(z) : nn::softmax_sample(z, rng);
    d.choices.push_back(s.index);
    d.log_probs.push_back(s.log_prob);
    d.entropies.push_back(s.entropy);
    d.action.push_back(to_action(s.index));
  }
  return d;
}

void PpgAgent::record(const std::vector<UserState>& states, const Decision& d,
                      const StepOutcome& outcome) {
  const auto xs = inputs(states);
  std::vector<std::vector<double>> next;
  if (!outcome.next_states.empty()) next = inputs(outcome.next_states);
  if (centralized()) {
    buffer_.push({xs[0], d.choices, d.log_probs, outcome.reward, next.empty() ? std::vector<double>{} : next[0],
                  outcome.reward});
    return;
  }
  for (int k = 0; k < users_; ++k)
    buffer_.push({xs[k], {d.choices[k]}, {d.log_probs[k]}, outcome.reward,
                  next.empty() ? std::vector<double>{} : next[k], outcome.reward});
}

std::optional<LossStats> PpgAgent::end_task() {
  ++tasks_;
  if (tasks_ % config_.n_update != 0 || buffer_.empty()) return std::nullopt;
  return update();
}

void PpgAgent::value_step(const nn::Matrix& x, const Eigen::VectorXd& target, double* loss) {
  *loss += value_loss(critic_, x, target, grad_critic_);
  nn::clip_grad_norm(grad_critic_, config_.max_grad_norm);
  nn::adam_step(critic_.params(), grad_critic_, critic_opt_, {.lr = config_.lr});
}

double PpgAgent::mean_kl(const nn::DenseNet& reference) const {
  if (buffer_.empty()) return 0.0;
  std::vector<std::vector<double>> cols;
  for (const auto& t : buffer_) cols.push_back(t.state);
  const nn::Matrix x = to_matrix(cols);
  const auto ref = reference.forward(x);
  const auto cur = actor_.forward(x);
  double kl = 0.0;
  for (int h = 0; h < head_count(); ++h) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto lp = nn::log_softmax(column(ref[h], j));
      const auto lq = nn::log_softmax(column(cur[h], j));
      for (size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
    }
  }
  return kl / static_cast<double>(x.cols());
}

LossStats PpgAgent::update() {
  if (buffer_.empty()) throw std::logic_error("update on an empty buffer");
  const size_t n = buffer_.size();
  const int heads = head_count();
  const int in = input_dim();
  nn::Matrix x(in, static_cast<Eigen::Index>(n));
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  for (size_t j = 0; j < n; ++j) {
    const auto& t = buffer_[j];
    for (int i = 0; i < in; ++i) x(i, static_cast<Eigen::Index>(j)) = t.state[i];
    r(static_cast<Eigen::Index>(j)) = t.v_target;
  }

  // Advantages are fixed for the whole policy phase: A = r - V(s) with gamma = 0.
  Eigen::VectorXd adv = r - critic_.forward(x)[0].row(0).transpose();
  if (config_.normalize_advantages && n > 1) {
    const double mean = adv.mean();
    const double sd = std::sqrt((adv.array() - mean).square().mean());
    adv.array() -= mean;
    if (sd > 1e-8) adv /= sd;
  }

  LossStats stats;
  int policy_steps = 0;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto mb = static_cast<size_t>(config_.minibatch);
  const PolicyLossOptions po{config_.eps_clip, config_.dual_clip, dual_clip(),
                             config_.entropy_weight};
  std::vector<PolicySample> batch;
  auto gather = [&](size_t start, size_t m, nn::Matrix& xb, Eigen::VectorXd& rb) {
    xb.resize(in, static_cast<Eigen::Index>(m));
    rb.resize(static_cast<Eigen::Index>(m));
    for (size_t j = 0; j < m; ++j) {
      xb.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(order[start + j]));
      rb(static_cast<Eigen::Index>(j)) = r(static_cast<Eigen::Index>(order[start + j]));
    }
  };

  for (int epoch = 0; epoch < config_.n_policy; ++epoch) {
    shuffle(order, update_rng_);
    for (size_t start = 0; start < n; start += mb) {
      const size_t m = std::min(mb, n - start);
      nn::Matrix xb;
      Eigen::VectorXd rb;
      gather(start, m, xb, rb);
      batch.clear();
      for (size_t j = 0; j < m; ++j) {
        const auto& t = buffer_[order[start + j]];
        batch.push_back({t.actions, t.old_log_probs, adv(static_cast<Eigen::Index>(order[start + j]))});
      }
      const auto pl = policy_loss(actor_, heads, xb, batch, po, grad_actor_);
      nn::clip_grad_norm(grad_actor_, config_.max_grad_norm);
      nn::adam_step(actor_.params(), grad_actor_, actor_opt_, {.lr = config_.lr});
      value_step(xb, rb, &stats.value_loss);
      stats.policy_loss -= pl.objective;
      stats.entropy += pl.entropy;
      ++policy_steps;
    }
  }
  stats.policy_loss /= policy_steps;
  stats.value_loss /= policy_steps;
  stats.entropy /= policy_steps;

  if (has_aux_phase()) {
    const nn::DenseNet snapshot = actor_;
    const auto ref = snapshot.forward(x);
    int aux_steps = 0;
    double refresh = 0.0;
    for (int epoch = 0; epoch < config_.n_aux; ++epoch) {
      shuffle(order, update_rng_);
      for (size_t start = 0; start < n; start += mb) {
        const size_t m = std::min(mb, n - start);
        nn::Matrix xb;
        Eigen::VectorXd rb;
        gather(start, m, xb, rb);
        std::vector<nn::Matrix> ref_b(static_cast<size_t>(heads));
        for (int h = 0; h < heads; ++h) {
          ref_b[h].resize(head_width_, static_cast<Eigen::Index>(m));
          for (size_t j = 0; j < m; ++j)
            ref_b[h].col(static_cast<Eigen::Index>(j)) =
                ref[h].col(static_cast<Eigen::Index>(order[start + j]));
        }
        stats.aux_loss += aux_loss(actor_, heads, xb, ref_b, rb, grad_actor_).value;
        nn::clip_grad_norm(grad_actor_, config_.max_grad_norm);
        nn::adam_step(actor_.params(), grad_actor_, actor_opt_, {.lr = config_.lr});
        value_step(xb, rb, &refresh);
        ++aux_steps;
      }
    }
    stats.aux_loss /= aux_steps;
    stats.kl = mean_kl(snapshot);
  }
  check_finite(stats);
  buffer_.clear();
  ++updates_;
  return stats;
}

nlohmann::json PpgAgent::to_json() const {
  return {{"format", "eto-agent"},
          {"version", 1},
          {"kind", to_string(kind_)},
          {"users", users_},
          {"layers", layers_},
          {"min_level", min_level_},
          {"channels", channels_},
          {"e_fix", e_fix_},
          {"scales", scales_json(scales_)},
          {"config", config_.to_json()},
          {"actor", actor_.to_json()},
          {"critic", critic_.to_json()}};
}

void PpgAgent::restore(const nlohmann::json& j) {
  copy_params(actor_, j.at("actor"), "actor");
  copy_params(critic_, j.at("critic"), "critic");
}

// ---------------------------------------------------------------------------

EgreedyAgent::EgreedyAgent(int users, int layers, int channels, FeatureScales scales,
                           AgentConfig config, uint64_t seed, int min_level)
    : users_(users),
      layers_(layers),
      channels_(channels),
      min_level_(min_level),
      scales_(scales),
      config_(std::move(config)) {
  if (min_level < 0 || min_level > layers)
    throw std::invalid_argument(fmt::format("min_level {} outside [0, {}]", min_level, layers));
  config_.validate();
  net_ = nn::DenseNet(UserState::dimension(layers, channels), config_.hidden, config_.activation,
                      {{"q", arms(), 1.0}}, derive_seed(seed, 3));
}

double EgreedyAgent::epsilon() const {
  if (config_.eps_decay_steps == 0) return config_.eps_end;
  if (steps_ >= config_.eps_decay_steps) return config_.eps_end;
  const double frac = static_cast<double>(steps_) / static_cast<double>(config_.eps_decay_steps);
  return config_.eps_start + (config_.eps_end - config_.eps_start) * frac;
}

std::vector<double> EgreedyAgent::predict(const std::vector<double>& features) const {
  return net_.forward(features)[0];
}

Decision EgreedyAgent::act(const std::vector<UserState>& states, uint64_t& rng, bool greedy) {
  std::vector<std::vector<double>> xs;
  for (const auto& s : states) xs.push_back(s.features(scales_));
  const auto q = net_.forward(to_matrix(xs))[0];
  const double eps = greedy ? 0.0 : epsilon();
  const int n = arms();
  Decision d;
  for (size_t k = 0; k < states.size(); ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (q(i, static_cast<Eigen::Index>(k)) > q(best, static_cast<Eigen::Index>(k))) best = i;
    int arm = static_cast<int>(best);
    if (!greedy && uniform01(rng) < eps) arm = uniform_int(rng, n);
    const double p = eps / n + (arm == best ? 1.0 - eps : 0.0);
    d.choices.push_back(arm);
    d.log_probs.push_back(std::log(p));
    d.entropies.push_back(0.0);
    d.action.push_back({min_level_ + arm / (channels_ + 1), arm % (channels_ + 1)});
  }
  return d;
}

double EgreedyAgent::regress(const std::vector<std::vector<double>>& features,
                             const std::vector<int>& chosen, double target, double lr) {
  const nn::Matrix x = to_matrix(features);
  nn::DenseNet::Cache cache;
  const auto out = net_.forward(x, &cache);
  const double m = static_cast<double>(x.cols());
  nn::Matrix d = nn::Matrix::Zero(out[0].rows(), out[0].cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double err = out[0](chosen[j], j) - target;
    d(chosen[j], j) = err / m;
    loss += 0.5 * err * err / m;
  }
  const auto g = net_.backward(cache, {d});
  nn::adam_step(net_.params(), g, opt_, {.lr = lr});
  return loss;
}

void EgreedyAgent::record(const std::vector<UserState>& states, const Decision& d,
                          const StepOutcome& outcome) {
  std::vector<std::vector<double>> xs;
  for (const auto& s : states) xs.push_back(s.features(scales_));
  last_loss_ = regress(xs, d.choices, outcome.reward, config_.egreedy_lr);
  ++steps_;
}

std::optional<LossStats> EgreedyAgent::end_task() {
  LossStats s;
  s.value_loss = last_loss_;
  check_finite(s);
  return s;
}

nlohmann::json EgreedyAgent::to_json() const {
  return {{"format", "eto-agent"},
          {"version", 1},
          {"kind", "egreedy"},
          {"users", users_},
          {"layers", layers_},
          {"min_level", min_level_},
          {"channels", channels_},
          {"steps", steps_},
          {"scales", scales_json(scales_)},
          {"config", config_.to_json()},
          {"net", net_.to_json()}};
}

void EgreedyAgent::restore(const nlohmann::json& j) {
  copy_params(net_, j.at("net"), "arm-value");
  steps_ = j.value("steps", int64_t{0});
}

// ---------------------------------------------------------------------------

std::unique_ptr<Agent> make_agent(AgentKind kind, const Scenario& scenario,
                                  const AgentConfig& config, uint64_t seed) {
  const auto& c = scenario.config;
  if (kind == AgentKind::kEgreedy)
    return std::make_unique<EgreedyAgent>(c.users, scenario.layers, c.channels, c.scales, config,
                                          seed, c.min_level);
  return std::make_unique<PpgAgent>(kind, c.users, scenario.layers, c.channels, c.scales, config,
                                    seed, c.min_level);
}

std::unique_ptr<Agent> load_agent(const nlohmann::json& j, const Scenario& scenario) {
  if (j.value("format", std::string()) != "eto-agent")
    throw std::invalid_argument("not an agent checkpoint");
  const AgentKind kind = agent_kind_from_string(j.at("kind").get<std::string>());
  const int layers = j.at("layers").get<int>();
  const int channels = j.at("channels").get<int>();
  const int users = j.at("users").get<int>();
  const int min_level = j.value("min_level", 0);
  if (layers != scenario.layers || channels != scenario.config.channels ||
      min_level != scenario.config.min_level)
    throw std::invalid_argument(fmt::format(
        "checkpoint was trained for L={}, C={}, min_level={} but the scenario has L={}, C={}, "
        "min_level={}",
        layers, channels, min_level, scenario.layers, scenario.config.channels,
        scenario.config.min_level));
  if (kind == AgentKind::kCppg && users != scenario.config.users)
    throw std::invalid_argument(fmt::format(
        "centralized checkpoint was trained for K={} users but the scenario has K={}", users,
        scenario.config.users));
  AgentConfig config = AgentConfig::from_json(j.at("config"));
  if (kind == AgentKind::kEa) config.e_fix = j.at("e_fix").get<int>();
  auto agent = make_agent(kind, scenario, config, 0);
  agent->restore(j);
  return agent;
}

// ---------------------------------------------------------------------------

uint64_t episode_seed(uint64_t seed, int episode) {
  return derive_seed(seed, 0x74726e00000000ull + static_cast<uint64_t>(episode));
}

uint64_t eval_episode_seed(uint64_t seed, int episode) {
  return derive_seed(seed, 0x6576616c000000ull + static_cast<uint64_t>(episode));
}

TrainResult train(const std::shared_ptr<const Scenario>& scenario, const TrainOptions& options,
                  const EpisodeCallback& on_episode) {
  options.config.validate();
  if (options.episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  TrainResult res;
  res.agent = make_agent(options.kind, *scenario, options.config,
                         derive_seed(options.seed, 0x6167656e74));
  uint64_t rng = derive_seed(options.seed, 0x616374);
  int episodes = options.episodes;
  if (options.kind == AgentKind::kCppg)
    episodes = static_cast<int>(std::lround(episodes * options.config.cppg_episode_multiplier));
  const int per_step = options.kind == AgentKind::kCppg ? 1 : scenario->config.users;
  Environment env(scenario);
  for (int ep = 0; ep < episodes; ++ep) {
    auto states = env.reset(episode_seed(options.seed, ep));
    std::vector<StepOutcome> outs;
    LearningRow row;
    row.episode = ep;
    while (!env.done()) {
      const Decision d = res.agent->act(states, rng, false);
      StepOutcome out = env.step(d.action);
      res.agent->record(states, d, out);
      res.transitions += per_step;
      states = out.next_states;
      if (auto s = res.agent->end_task()) {
        row.loss.policy_loss += s->policy_loss;
        row.loss.value_loss += s->value_loss;
        row.loss.entropy += s->entropy;
        row.loss.aux_loss += s->aux_loss;
        row.loss.kl += s->kl;
        ++row.updates;
      }
      outs.push_back(std::move(out));
    }
    if (row.updates > 0) {
      const double u = row.updates;
      row.loss = {row.loss.policy_loss / u, row.loss.value_loss / u, row.loss.entropy / u,
                  row.loss.aux_loss / u, row.loss.kl / u};
    }
    const EpisodeSummary s = episode_metrics(outs, scenario->config.reward.psnr_floor_db);
    row.mean_reward = s.mean_reward;
    row.psnr_db = s.psnr_db.mean;
    row.rt_s = s.rt_s.mean;
    row.energy_j = s.energy_j.mean;
    row.dv_pct = s.dv_pct;
    if (on_episode) on_episode(row);
    res.curve.push_back(row);
  }
  return res;
}

std::string learning_curve_csv(const std::vector<LearningRow>& rows) {
  std::string out =
      "episode,mean_reward,psnr,rt,energy,dv_pct,policy_loss,value_loss,entropy,aux_loss,kl,"
      "updates\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.episode,
                       format_double(r.mean_reward), format_double(r.psnr_db),
                       format_double(r.rt_s), format_double(r.energy_j), format_double(r.dv_pct),
                       format_double(r.loss.policy_loss), format_double(r.loss.value_loss),
                       format_double(r.loss.entropy), format_double(r.loss.aux_loss),
                       format_double(r.loss.kl), r.updates);
  return out;
}

std::vector<StepOutcome> oracle_episode(const std::shared_ptr<const Scenario>& scenario,
                                        uint64_t reset_seed, int cap) {
  Environment env(scenario);
  env.reset(reset_seed);
  std::vector<StepOutcome> outs;
  while (!env.done()) {
    const OracleResult best = best_joint_action(env, scenario->config.reward, cap);
    outs.push_back(env.step(best.action));
  }
  return outs;
}

EvalResult evaluate(Agent& agent, const std::shared_ptr<const Scenario>& scenario,
                    const EvalOptions& options) {
  if (options.episodes < 1) throw std::invalid_argument("eval needs at least one episode");
  EvalResult res;
  Environment env(scenario);
  uint64_t rng = derive_seed(options.seed, 0x616374);
  for (int ep = 0; ep < options.episodes; ++ep) {
    const uint64_t seed = eval_episode_seed(options.seed, ep);
    auto states = env.reset(seed);
    while (!env.done()) {
      if (options.with_oracle)
        res.oracle_step_rewards.push_back(
            best_joint_action(env, scenario->config.reward, options.cap).reward);
      const Decision d = agent.act(states, rng, true);
      StepOutcome out = env.step(d.action);
      states = out.next_states;
      res.outcomes.push_back(std::move(out));
    }
    if (options.with_oracle) {
      auto o = oracle_episode(scenario, seed, options.cap);
      std::move(o.begin(), o.end(), std::back_inserter(res.oracle_outcomes));
    }
  }
  const double floor = scenario->config.reward.psnr_floor_db;
  res.summary = episode_metrics(res.outcomes, floor);
  if (options.with_oracle) res.oracle_summary = episode_metrics(res.oracle_outcomes, floor);
  return res;
}

std::string summary_csv(const std::vector<std::pair<std::string, EpisodeSummary>>& rows,
                        int users) {
  std::string out =
      "policy,users,reward,psnr_mean,psnr_p5,psnr_p95,rt_mean,rt_p5,rt_p95,energy_mean,energy_p5,"
      "energy_p95,dv_pct\n";
  for (const auto& [name, s] : rows)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", name, users,
                       format_double(s.mean_reward),
                       format_double(s.psnr_db.mean), format_double(s.psnr_db.p5),
                       format_double(s.psnr_db.p95), format_double(s.rt_s.mean),
                       format_double(s.rt_s.p5), format_double(s.rt_s.p95),
                       format_double(s.energy_j.mean), format_double(s.energy_j.p5),
                       format_double(s.energy_j.p95), format_double(s.dv_pct));
  return out;
}

}  // namespace eto

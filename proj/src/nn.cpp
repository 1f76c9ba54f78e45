#include "eto/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eto/util.hpp"

namespace eto::nn {

std::string to_string(Activation act) { return act == Activation::kTanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& text) {
  if (text == "tanh") return Activation::kTanh;
  if (text == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + text + "'");
}

DenseNet::DenseNet(int input_width, std::vector<int> hidden, Activation activation,
                   std::vector<HeadSpec> heads, uint64_t seed)
    : input_(input_width),
      hidden_(std::move(hidden)),
      activation_(activation),
      heads_(std::move(heads)) {
  if (input_ < 1) throw std::invalid_argument("input width must be >= 1");
  if (heads_.empty()) throw std::invalid_argument("network needs at least one head");
  build_layout();
  uint64_t rng = derive_seed(seed, 0x6e6574);
  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    double bound = std::sqrt(6.0 / (s.in + s.out));
    if (l >= hidden_.size()) bound *= heads_[l - hidden_.size()].init_scale;
    for (int i = 0; i < s.in * s.out; ++i) params_[s.w_offset + i] = uniform(rng, -bound, bound);
  }
}

void DenseNet::build_layout() {
  layers_.clear();
  size_t offset = 0;
  auto add = [&](int in, int out) {
    if (out < 1) throw std::invalid_argument("layer width must be >= 1");
    LayerShape s{in, out, offset, offset + static_cast<size_t>(in) * out};
    offset = s.b_offset + out;
    layers_.push_back(s);
  };
  int prev = input_;
  for (int w : hidden_) {
    add(prev, w);
    prev = w;
  }
  for (const auto& h : heads_) add(prev, h.width);
  params_.assign(offset, 0.0);
}

int DenseNet::head_index(const std::string& name) const {
  for (size_t i = 0; i < heads_.size(); ++i)
    if (heads_[i].name == name) return static_cast<int>(i);
  throw std::out_of_range("network has no head named '" + name + "'");
}

Eigen::Map<const RowMajorMatrix> DenseNet::weight(int layer) const {
  const auto& s = layers_[layer];
  return {params_.data() + s.w_offset, s.out, s.in};
}
Eigen::Map<RowMajorMatrix> DenseNet::weight(int layer) {
  const auto& s = layers_[layer];
  return {params_.data() + s.w_offset, s.out, s.in};
}
Eigen::Map<const Eigen::VectorXd> DenseNet::bias(int layer) const {
  const auto& s = layers_[layer];
  return {params_.data() + s.b_offset, s.out};
}
Eigen::Map<Eigen::VectorXd> DenseNet::bias(int layer) {
  const auto& s = layers_[layer];
  return {params_.data() + s.b_offset, s.out};
}

std::vector<Matrix> DenseNet::forward(const Matrix& x, Cache* cache) const {
  if (x.rows() != input_)
    throw std::invalid_argument("input has " + std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_));
  Matrix a = x;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(a);
  }
  for (size_t l = 0; l < hidden_.size(); ++l) {
    Matrix z = weight(static_cast<int>(l)) * a;
    z.colwise() += bias(static_cast<int>(l));
    if (activation_ == Activation::kTanh)
      a = z.array().tanh().matrix();
    else
      a = z.array().max(0.0).matrix();
    if (cache) cache->activations.push_back(a);
  }
  std::vector<Matrix> out;
  out.reserve(heads_.size());
  for (size_t h = 0; h < heads_.size(); ++h) {
    const int layer = static_cast<int>(hidden_.size() + h);
    Matrix y = weight(layer) * a;
    y.colwise() += bias(layer);
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<std::vector<double>> DenseNet::forward(std::span<const double> x) const {
  Matrix in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  auto outs = forward(in);
  std::vector<std::vector<double>> res;
  for (const auto& o : outs) res.emplace_back(o.data(), o.data() + o.size());
  return res;
}

std::vector<double> DenseNet::backward(const Cache& cache,
                                       const std::vector<Matrix>& d_heads) const {
  std::vector<double> grad;
  backward(cache, d_heads, grad);
  return grad;
}

void DenseNet::backward(const Cache& cache, const std::vector<Matrix>& d_heads,
                        std::vector<double>& grad) const {
  if (d_heads.size() != heads_.size())
    throw std::invalid_argument("backward needs one gradient entry per head");
  grad.resize(params_.size());
  const Matrix& top = cache.activations.back();
  Matrix delta = Matrix::Zero(trunk_width(), top.cols());
  for (size_t h = 0; h < heads_.size(); ++h) {
    const Matrix& dh = d_heads[h];
    const int layer = static_cast<int>(hidden_.size() + h);
    const auto& s = layers_[layer];
    if (dh.size() == 0) {
      std::fill(grad.begin() + static_cast<std::ptrdiff_t>(s.w_offset),
                grad.begin() + static_cast<std::ptrdiff_t>(s.b_offset + s.out), 0.0);
      continue;
    }
    Eigen::Map<RowMajorMatrix>(grad.data() + s.w_offset, s.out, s.in).noalias() =
        dh * top.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + s.b_offset, s.out) = dh.rowwise().sum();
    delta.noalias() += weight(layer).transpose() * dh;
  }
  for (int l = static_cast<int>(hidden_.size()) - 1; l >= 0; --l) {
    const Matrix& a = cache.activations[l + 1];
    Matrix dz;
    if (activation_ == Activation::kTanh)
      dz = delta.array() * (1.0 - a.array().square());
    else
      dz = delta.array() * (a.array() > 0.0).cast<double>();
    const auto& s = layers_[l];
    Eigen::Map<RowMajorMatrix>(grad.data() + s.w_offset, s.out, s.in).noalias() =
        dz * cache.activations[l].transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + s.b_offset, s.out) = dz.rowwise().sum();
    if (l > 0) delta.noalias() = weight(l).transpose() * dz;
  }
}

nlohmann::json DenseNet::to_json() const {
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& h : heads_)
    heads.push_back({{"name", h.name}, {"width", h.width}, {"init_scale", h.init_scale}});
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : layers_) shapes.push_back({s.out, s.in});
  return {{"input", input_},
          {"hidden", hidden_},
          {"activation", to_string(activation_)},
          {"heads", heads},
          {"layer_shapes", shapes},
          {"params", params_}};
}

DenseNet DenseNet::from_json(const nlohmann::json& j) {
  DenseNet net;
  net.input_ = j.at("input").get<int>();
  net.hidden_ = j.at("hidden").get<std::vector<int>>();
  net.activation_ = activation_from_string(j.at("activation").get<std::string>());
  for (const auto& h : j.at("heads"))
    net.heads_.push_back({h.at("name").get<std::string>(), h.at("width").get<int>(),
                          h.value("init_scale", 1.0)});
  net.build_layout();
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.params_.size())
    throw std::invalid_argument("checkpoint has " + std::to_string(params.size()) +
                                " parameters, layout needs " +
                                std::to_string(net.params_.size()));
  net.params_ = std::move(params);
  return net;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               const AdamOptions& o) {
  if (grads.size() != params.size()) throw std::invalid_argument("gradient shape mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  const auto n = static_cast<Eigen::Index>(params.size());
  Eigen::Map<Eigen::ArrayXd> w(params.data(), n);
  Eigen::Map<const Eigen::ArrayXd> g(grads.data(), n);
  Eigen::Map<Eigen::ArrayXd> m(state.m.data(), n);
  Eigen::Map<Eigen::ArrayXd> v(state.v.data(), n);
  m = o.beta1 * m + (1.0 - o.beta1) * g;
  v = o.beta2 * v + (1.0 - o.beta2) * g.square();
  w -= o.lr * (m / c1) / ((v / c2).sqrt() + o.eps);
}

double clip_grad_norm(std::vector<double>& grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double log_sum = std::log(sum);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - mx) - log_sum;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - mx);
  for (double& v : out) v /= sum;
  return out;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

Sample softmax_sample(std::span<const double> logits, uint64_t& rng) {
  auto lp = log_softmax(logits);
  std::vector<double> p(lp.size());
  for (size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
  const double u = uniform01(rng);
  double cdf = 0.0;
  size_t idx = p.size() - 1;
  for (size_t i = 0; i < p.size(); ++i) {
    cdf += p[i];
    if (u < cdf) {
      idx = i;
      break;
    }
  }
  // Rounding can leave the tail with zero mass; never return such an index.
  while (p[idx] == 0.0 && idx > 0) --idx;
  return {static_cast<int>(idx), lp[idx], entropy(p)};
}

Sample softmax_greedy(std::span<const double> logits) {
  auto lp = log_softmax(logits);
  size_t idx = 0;
  for (size_t i = 1; i < lp.size(); ++i)
    if (lp[i] > lp[idx]) idx = i;
  std::vector<double> p(lp.size());
  for (size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
  return {static_cast<int>(idx), lp[idx], entropy(p)};
}

}  // namespace eto::nn

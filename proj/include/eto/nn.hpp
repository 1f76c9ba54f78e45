#ifndef ETO_NN_HPP_
#define ETO_NN_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace eto::nn {

using Matrix = Eigen::MatrixXd;  // column = sample
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { kTanh, kRelu };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& text);

struct HeadSpec {
  std::string name;
  int width = 1;
  double init_scale = 1.0;  // multiplies the Glorot bound of the head layer
};

// Feed-forward trunk of dense layers plus independent linear output heads.
// All parameters live in one flat vector; layer views are Eigen maps.
class DenseNet {
 public:
  struct Cache {
    std::vector<Matrix> activations;  // [0] = input, [l+1] = trunk layer l output
  };

  DenseNet() = default;
  DenseNet(int input_width, std::vector<int> hidden, Activation activation,
           std::vector<HeadSpec> heads, uint64_t seed);

  int input_width() const { return input_; }
  const std::vector<int>& hidden() const { return hidden_; }
  Activation activation() const { return activation_; }
  const std::vector<HeadSpec>& heads() const { return heads_; }
  int head_index(const std::string& name) const;  // throws if absent

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  size_t param_count() const { return params_.size(); }

  // x: input_width x n. Returns one head_width x n matrix per head.
  std::vector<Matrix> forward(const Matrix& x, Cache* cache = nullptr) const;
  std::vector<std::vector<double>> forward(std::span<const double> x) const;

  // Gradient of sum_h <d_heads[h], output_h> w.r.t. every parameter. Heads
  // whose entry is an empty matrix contribute nothing.
  std::vector<double> backward(const Cache& cache, const std::vector<Matrix>& d_heads) const;
  // Same, reusing `grad` as the output buffer.
  void backward(const Cache& cache, const std::vector<Matrix>& d_heads,
                std::vector<double>& grad) const;

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& j);

  // Layer views (row-major weights: out x in).
  Eigen::Map<const RowMajorMatrix> weight(int layer) const;
  Eigen::Map<RowMajorMatrix> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  // Layers 0..hidden.size()-1 form the trunk; head h is layer hidden.size()+h.
  int layer_count() const { return static_cast<int>(layers_.size()); }

 private:
  struct LayerShape {
    int in = 0;
    int out = 0;
    size_t w_offset = 0;
    size_t b_offset = 0;
  };

  void build_layout();
  int trunk_width() const { return hidden_.empty() ? input_ : hidden_.back(); }

  int input_ = 0;
  std::vector<int> hidden_;
  Activation activation_ = Activation::kTanh;
  std::vector<HeadSpec> heads_;
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t t = 0;
};

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive-moment update in place.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options);

// Rescales grads so their L2 norm is at most max_norm; returns the original norm.
double clip_grad_norm(std::vector<double>& grads, double max_norm);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
double entropy(std::span<const double> probs);

struct Sample {
  int index = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
};

Sample softmax_sample(std::span<const double> logits, uint64_t& rng);
// Argmax with ties to the lowest index.
Sample softmax_greedy(std::span<const double> logits);

// Bounded FIFO. Pushing into a full buffer evicts the oldest entry.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be > 0");
  }

  void push(T item) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(item));
  }
  void clear() { items_.clear(); }
  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const T& operator[](size_t i) const { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  size_t capacity_;
  std::deque<T> items_;
};

}  // namespace eto::nn

#endif  // ETO_NN_HPP_

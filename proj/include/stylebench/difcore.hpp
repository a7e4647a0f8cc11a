#ifndef STYLEBENCH_DIFCORE_HPP_
#define STYLEBENCH_DIFCORE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace stylebench {
class Rng;
}

namespace stylebench::dif {

// Dense row-major tensor of rank 1 or 2. Values are always finite.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> data);
  // Uniform(-scale, scale) draws in row-major order.
  static Tensor uniform(std::vector<std::size_t> shape, Rng& rng,
                        double scale);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Named parameter tensors. Names are unique and shapes are fixed once added.
class ParamSet {
 public:
  void add(const std::string& name, Tensor t);
  // Replaces the values of an existing entry; the shape must match.
  void set(const std::string& name, Tensor t);
  bool contains(const std::string& name) const {
    return tensors_.contains(name);
  }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t size() const { return tensors_.size(); }
  std::size_t num_values() const;
  std::vector<std::string> names() const;

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  // Entries whose name starts with one of `prefixes`.
  ParamSet subset(const std::vector<std::string>& prefixes) const;
  void add_scaled(const ParamSet& other, double scale);
  void scale(double s);
  double l2_norm() const;

  // {"version": 1, "tensors": {name: {"shape": [...], "data": [...]}}}
  nlohmann::ordered_json to_json() const;
  static ParamSet from_json(const nlohmann::json& j);

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

// Reverse-mode tape over a fixed operator set. Vectors are 1-D nodes;
// matrices enter only as parameters or constants.
class Graph {
 public:
  struct Var {
    int id = -1;
  };

  explicit Graph(const ParamSet* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(std::vector<double> values);
  Var constant(const Tensor& t);
  // Leaf bound to a tensor of the ParamSet; gradients flow into it.
  Var param(const std::string& name);

  const std::vector<double>& value(Var v) const;
  double scalar(Var v) const;
  std::size_t size(Var v) const;

  Var matvec(Var w, Var x);             // W[r,c] x[c] -> [r]
  Var affine(Var w, Var x, Var b);      // W x + b
  Var matvec_t(Var w, Var p);           // W[r,c]^T p[r] -> [c]
  Var row(Var w, int index);            // W[index, :]
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat(Var a, Var b);
  Var softmax(Var logits, double tau);
  Var log_softmax(Var logits);
  Var pick(Var a, std::size_t index);
  Var mean(std::span<const Var> xs);    // elementwise mean of equal sizes
  Var dot(Var a, Var b);
  Var cosine(Var a, Var b);
  Var half_sq_dist(Var a, Var b);       // 0.5 * ||a - b||^2
  Var weighted_sum(std::span<const std::pair<double, Var>> terms);

  // Seeds d(root)/d(root) = 1 and propagates to every reachable node.
  void backward(Var root);
  // Adds the gradients of every parameter leaf into `grads` (entries are
  // created as zeros when missing).
  void accumulate_param_grads(ParamSet& grads) const;

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::size_t rows = 0;
    std::size_t cols = 1;
    bool needs_grad = false;
    std::function<void(Graph&, const Node&)> backward;
  };

  Var push(std::vector<double> value, std::size_t rows, std::size_t cols,
           bool needs_grad, std::function<void(Graph&, const Node&)> bw);
  std::vector<double>& grad(int id);
  bool tracks(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  const Node& node(Var v) const;
  void expect_vector(Var v, const char* op) const;
  void expect_same_size(Var a, Var b, const char* op) const;

  const ParamSet* params_;
  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
};

using Var = Graph::Var;

// Weights of one GRU cell, bound inside a Graph. Parameter names are
// prefix + {W_u, U_u, b_u, W_r, U_r, b_r, W_h, U_h, b_h}.
struct GruCell {
  Var w_u, u_u, b_u, w_r, u_r, b_r, w_h, u_h, b_h;

  static GruCell bind(Graph& g, std::string_view prefix);
  static void init(ParamSet& params, std::string_view prefix,
                   std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                   double scale);
  // u = s(W_u x + U_u h + b_u); r = s(W_r x + U_r h + b_r);
  // h~ = tanh(W_h x + U_h (r*h) + b_h); h' = (1-u)*h + u*h~.
  Var step(Graph& g, Var h, Var x) const;
};

// Row-wise softmax(logits / tau) of a rank-1 or rank-2 tensor.
Tensor softmax_with_temperature(const Tensor& logits, double tau);

// One GRU step evaluated outside of training.
Tensor gru_step(const ParamSet& params, std::string_view prefix,
                const Tensor& h, const Tensor& x_emb);

double cosine_similarity(const Tensor& a, const Tensor& b);

// Evaluates the loss; fills `grads` with the analytic gradient when non-null.
using LossFn = std::function<double(const ParamSet& params, ParamSet* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central differences against the analytic gradient over every coordinate;
// error = |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check_detailed(const LossFn& loss_fn,
                                    const ParamSet& params, double eps);
double grad_check(const LossFn& loss_fn, const ParamSet& params, double eps);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam on the entries named in `grads`.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamConfig& cfg);

// Rescales `grads` so that its global L2 norm is at most max_norm.
void clip_grad_norm(ParamSet& grads, double max_norm);

}  // namespace stylebench::dif

#endif  // STYLEBENCH_DIFCORE_HPP_

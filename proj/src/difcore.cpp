#include "stylebench/difcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stylebench/errors.hpp"
#include "stylebench/random.hpp"

namespace stylebench::dif {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_kernel(std::span<const double> in, double tau,
                    std::span<double> out) {
  const double mx = *std::max_element(in.begin(), in.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp((in[i] - mx) / tau);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() || product(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw NonFiniteValue();
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, Rng& rng,
                       double scale) {
  std::vector<double> data(product(shape));
  for (double& v : data) v = rng.uniform(-scale, scale);
  return Tensor(std::move(shape), std::move(data));
}

// -------------------------------------------------------------- ParamSet

void ParamSet::add(const std::string& name, Tensor t) {
  if (!tensors_.emplace(name, std::move(t)).second) {
    throw ConfigError("duplicate parameter '" + name + "'");
  }
}

void ParamSet::set(const std::string& name, Tensor t) {
  Tensor& current = at(name);
  if (current.shape() != t.shape()) {
    throw ShapeError("parameter '" + name + "' has shape " +
                     shape_str(current.shape()) + ", got " +
                     shape_str(t.shape()));
  }
  current = std::move(t);
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : tensors_) out.add(name, Tensor::zeros(t.shape()));
  return out;
}

ParamSet ParamSet::subset(const std::vector<std::string>& prefixes) const {
  ParamSet out;
  for (const auto& [name, t] : tensors_) {
    for (const auto& p : prefixes) {
      if (name.starts_with(p)) {
        out.add(name, t);
        break;
      }
    }
  }
  return out;
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
  for (const auto& [name, t] : other.tensors_) {
    Tensor& mine = at(name);
    if (mine.size() != t.size()) throw ShapeError("add_scaled on '" + name + "'");
    for (std::size_t i = 0; i < t.size(); ++i) mine[i] += s * t[i];
  }
}

void ParamSet::scale(double s) {
  for (auto& [name, t] : tensors_) {
    for (double& v : t.data()) v *= s;
  }
}

double ParamSet::l2_norm() const {
  double sq = 0.0;
  for (const auto& [name, t] : tensors_) {
    for (double v : t.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

nlohmann::ordered_json ParamSet::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (const auto& [name, t] : tensors_) {
    nlohmann::ordered_json e;
    e["shape"] = t.shape();
    e["data"] = t.values();
    tensors[name] = std::move(e);
  }
  j["tensors"] = std::move(tensors);
  return j;
}

ParamSet ParamSet::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) {
      throw ValidationError("unsupported checkpoint version");
    }
    ParamSet out;
    for (const auto& [name, e] : j.at("tensors").items()) {
      out.add(name, Tensor(e.at("shape").get<std::vector<std::size_t>>(),
                           e.at("data").get<std::vector<double>>()));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed tensor checkpoint: ") +
                          e.what());
  }
}

// ----------------------------------------------------------------- Graph

Var Graph::push(std::vector<double> value, std::size_t rows, std::size_t cols,
                bool needs_grad,
                std::function<void(Graph&, const Node&)> bw) {
  Node n;
  n.value = std::move(value);
  n.rows = rows;
  n.cols = cols;
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

std::vector<double>& Graph::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ConfigError("invalid graph variable");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

void Graph::expect_vector(Var v, const char* op) const {
  if (node(v).cols != 1) throw ShapeError(std::string(op) + " expects a vector");
}

void Graph::expect_same_size(Var a, Var b, const char* op) const {
  if (node(a).value.size() != node(b).value.size()) {
    throw ShapeError(std::string(op) + ": sizes " +
                     std::to_string(node(a).value.size()) + " and " +
                     std::to_string(node(b).value.size()));
  }
}

Var Graph::constant(std::vector<double> values) {
  const std::size_t n = values.size();
  return push(std::move(values), n, 1, false, nullptr);
}

Var Graph::constant(const Tensor& t) {
  return push(t.values(), t.rows(), t.cols(), false, nullptr);
}

Var Graph::param(const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) {
    return Var{it->second};
  }
  if (!params_) throw ConfigError("graph has no bound parameters");
  const Tensor& t = params_->at(name);
  Var v = push(t.values(), t.rows(), t.cols(), true, nullptr);
  param_ids_[name] = v.id;
  return v;
}

const std::vector<double>& Graph::value(Var v) const { return node(v).value; }

double Graph::scalar(Var v) const {
  const auto& val = node(v).value;
  if (val.size() != 1) throw ShapeError("scalar() on a non-scalar node");
  return val[0];
}

std::size_t Graph::size(Var v) const { return node(v).value.size(); }

Var Graph::matvec(Var w, Var x) {
  const Node& wn = node(w);
  expect_vector(x, "matvec");
  const std::size_t r = wn.rows, c = wn.cols;
  if (node(x).value.size() != c) {
    throw ShapeError("matvec: matrix [" + std::to_string(r) + "," +
                     std::to_string(c) + "] times vector of " +
                     std::to_string(node(x).value.size()));
  }
  const auto& wv = wn.value;
  const auto& xv = node(x).value;
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* wr = &wv[i * c];
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += wr[j] * xv[j];
    out[i] = acc;
  }
  const int wi = w.id, xi = x.id;
  return push(std::move(out), r, 1, tracks(w) || tracks(x),
              [wi, xi, r, c](Graph& g, const Node& self) {
                const auto& wv = g.nodes_[wi].value;
                const auto& xv = g.nodes_[xi].value;
                if (g.nodes_[wi].needs_grad) {
                  auto& gw = g.grad(wi);
                  for (std::size_t i = 0; i < r; ++i) {
                    const double gi = self.grad[i];
                    if (gi == 0.0) continue;
                    double* row = &gw[i * c];
                    for (std::size_t j = 0; j < c; ++j) row[j] += gi * xv[j];
                  }
                }
                if (g.nodes_[xi].needs_grad) {
                  auto& gx = g.grad(xi);
                  for (std::size_t i = 0; i < r; ++i) {
                    const double gi = self.grad[i];
                    if (gi == 0.0) continue;
                    const double* row = &wv[i * c];
                    for (std::size_t j = 0; j < c; ++j) gx[j] += gi * row[j];
                  }
                }
              });
}

Var Graph::affine(Var w, Var x, Var b) { return add(matvec(w, x), b); }

Var Graph::matvec_t(Var w, Var p) {
  const Node& wn = node(w);
  expect_vector(p, "matvec_t");
  const std::size_t r = wn.rows, c = wn.cols;
  if (node(p).value.size() != r) {
    throw ShapeError("matvec_t: matrix rows " + std::to_string(r) +
                     " vs vector of " + std::to_string(node(p).value.size()));
  }
  const auto& wv = wn.value;
  const auto& pv = node(p).value;
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double pi = pv[i];
    if (pi == 0.0) continue;
    const double* row = &wv[i * c];
    for (std::size_t j = 0; j < c; ++j) out[j] += pi * row[j];
  }
  const int wi = w.id, pid = p.id;
  return push(std::move(out), c, 1, tracks(w) || tracks(p),
              [wi, pid, r, c](Graph& g, const Node& self) {
                const auto& wv = g.nodes_[wi].value;
                const auto& pv = g.nodes_[pid].value;
                if (g.nodes_[wi].needs_grad) {
                  auto& gw = g.grad(wi);
                  for (std::size_t i = 0; i < r; ++i) {
                    const double pi = pv[i];
                    if (pi == 0.0) continue;
                    double* row = &gw[i * c];
                    for (std::size_t j = 0; j < c; ++j) row[j] += pi * self.grad[j];
                  }
                }
                if (g.nodes_[pid].needs_grad) {
                  auto& gp = g.grad(pid);
                  for (std::size_t i = 0; i < r; ++i) {
                    const double* row = &wv[i * c];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c; ++j) acc += row[j] * self.grad[j];
                    gp[i] += acc;
                  }
                }
              });
}

Var Graph::row(Var w, int index) {
  const Node& wn = node(w);
  if (index < 0 || static_cast<std::size_t>(index) >= wn.rows) {
    throw ShapeError("row index " + std::to_string(index) + " out of range");
  }
  const std::size_t c = wn.cols;
  const auto first = wn.value.begin() + static_cast<long>(index * c);
  std::vector<double> out(first, first + static_cast<long>(c));
  const int wi = w.id;
  return push(std::move(out), c, 1, tracks(w),
              [wi, index, c](Graph& g, const Node& self) {
                auto& gw = g.grad(wi);
                for (std::size_t j = 0; j < c; ++j) {
                  gw[static_cast<std::size_t>(index) * c + j] += self.grad[j];
                }
              });
}

Var Graph::add(Var a, Var b) {
  expect_same_size(a, b, "add");
  std::vector<double> out = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const int ai = a.id, bi = b.id;
  return push(std::move(out), node(a).rows, node(a).cols,
              tracks(a) || tracks(b), [ai, bi](Graph& g, const Node& self) {
                for (int id : {ai, bi}) {
                  if (!g.nodes_[id].needs_grad) continue;
                  auto& gi = g.grad(id);
                  for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
                }
              });
}

Var Graph::sub(Var a, Var b) {
  expect_same_size(a, b, "sub");
  std::vector<double> out = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const int ai = a.id, bi = b.id;
  return push(std::move(out), node(a).rows, node(a).cols,
              tracks(a) || tracks(b), [ai, bi](Graph& g, const Node& self) {
                if (g.nodes_[ai].needs_grad) {
                  auto& ga = g.grad(ai);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
                }
                if (g.nodes_[bi].needs_grad) {
                  auto& gb = g.grad(bi);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
                }
              });
}

Var Graph::mul(Var a, Var b) {
  expect_same_size(a, b, "mul");
  std::vector<double> out = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ai = a.id, bi = b.id;
  return push(std::move(out), node(a).rows, node(a).cols,
              tracks(a) || tracks(b), [ai, bi](Graph& g, const Node& self) {
                const auto& av = g.nodes_[ai].value;
                const auto& bv = g.nodes_[bi].value;
                if (g.nodes_[ai].needs_grad) {
                  auto& ga = g.grad(ai);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bv[i];
                }
                if (g.nodes_[bi].needs_grad) {
                  auto& gb = g.grad(bi);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * av[i];
                }
              });
}

Var Graph::scale(Var a, double s) {
  std::vector<double> out = node(a).value;
  for (double& v : out) v *= s;
  const int ai = a.id;
  return push(std::move(out), node(a).rows, node(a).cols, tracks(a),
              [ai, s](Graph& g, const Node& self) {
                auto& ga = g.grad(ai);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * self.grad[i];
              });
}

Var Graph::add_scalar(Var a, double s) {
  std::vector<double> out = node(a).value;
  for (double& v : out) v += s;
  const int ai = a.id;
  return push(std::move(out), node(a).rows, node(a).cols, tracks(a),
              [ai](Graph& g, const Node& self) {
                auto& ga = g.grad(ai);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
              });
}

Var Graph::sigmoid(Var a) {
  std::vector<double> out = node(a).value;
  for (double& v : out) v = sigmoid_scalar(v);
  const int ai = a.id;
  return push(std::move(out), node(a).rows, node(a).cols, tracks(a),
              [ai](Graph& g, const Node& self) {
                auto& ga = g.grad(ai);
                for (std::size_t i = 0; i < ga.size(); ++i) {
                  const double y = self.value[i];
                  ga[i] += self.grad[i] * y * (1.0 - y);
                }
              });
}

Var Graph::tanh(Var a) {
  std::vector<double> out = node(a).value;
  for (double& v : out) v = std::tanh(v);
  const int ai = a.id;
  return push(std::move(out), node(a).rows, node(a).cols, tracks(a),
              [ai](Graph& g, const Node& self) {
                auto& ga = g.grad(ai);
                for (std::size_t i = 0; i < ga.size(); ++i) {
                  const double y = self.value[i];
                  ga[i] += self.grad[i] * (1.0 - y * y);
                }
              });
}

Var Graph::concat(Var a, Var b) {
  expect_vector(a, "concat");
  expect_vector(b, "concat");
  std::vector<double> out = node(a).value;
  const auto& bv = node(b).value;
  out.insert(out.end(), bv.begin(), bv.end());
  const std::size_t na = node(a).value.size();
  const std::size_t n = out.size();
  const int ai = a.id, bi = b.id;
  return push(std::move(out), n, 1, tracks(a) || tracks(b),
              [ai, bi, na](Graph& g, const Node& self) {
                if (g.nodes_[ai].needs_grad) {
                  auto& ga = g.grad(ai);
                  for (std::size_t i = 0; i < na; ++i) ga[i] += self.grad[i];
                }
                if (g.nodes_[bi].needs_grad) {
                  auto& gb = g.grad(bi);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[na + i];
                }
              });
}

Var Graph::softmax(Var logits, double tau) {
  if (!(tau > 0)) throw ConfigError("softmax temperature must be > 0");
  expect_vector(logits, "softmax");
  const auto& in = node(logits).value;
  std::vector<double> out(in.size());
  softmax_kernel(in, tau, out);
  const std::size_t n = out.size();
  const int li = logits.id;
  return push(std::move(out), n, 1, tracks(logits),
              [li, tau](Graph& g, const Node& self) {
                const auto& p = self.value;
                double gp = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) gp += self.grad[i] * p[i];
                auto& gl = g.grad(li);
                for (std::size_t i = 0; i < p.size(); ++i) {
                  gl[i] += p[i] * (self.grad[i] - gp) / tau;
                }
              });
}

Var Graph::log_softmax(Var logits) {
  expect_vector(logits, "log_softmax");
  const auto& in = node(logits).value;
  const double mx = *std::max_element(in.begin(), in.end());
  double sum = 0.0;
  for (double v : in) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - lse;
  const std::size_t n = out.size();
  const int li = logits.id;
  return push(std::move(out), n, 1, tracks(logits),
              [li](Graph& g, const Node& self) {
                double gsum = 0.0;
                for (double v : self.grad) gsum += v;
                auto& gl = g.grad(li);
                for (std::size_t i = 0; i < gl.size(); ++i) {
                  gl[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
                }
              });
}

Var Graph::pick(Var a, std::size_t index) {
  if (index >= node(a).value.size()) throw ShapeError("pick index out of range");
  const int ai = a.id;
  return push({node(a).value[index]}, 1, 1, tracks(a),
              [ai, index](Graph& g, const Node& self) {
                g.grad(ai)[index] += self.grad[0];
              });
}

Var Graph::mean(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("mean of no vectors");
  const std::size_t n = node(xs[0]).value.size();
  std::vector<double> out(n, 0.0);
  bool needs = false;
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (Var x : xs) {
    expect_same_size(xs[0], x, "mean");
    const auto& v = node(x).value;
    for (std::size_t i = 0; i < n; ++i) out[i] += v[i];
    needs = needs || tracks(x);
    ids.push_back(x.id);
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& v : out) v *= inv;
  return push(std::move(out), n, 1, needs,
              [ids = std::move(ids), inv](Graph& g, const Node& self) {
                for (int id : ids) {
                  if (!g.nodes_[id].needs_grad) continue;
                  auto& gi = g.grad(id);
                  for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += inv * self.grad[i];
                }
              });
}

Var Graph::dot(Var a, Var b) {
  expect_same_size(a, b, "dot");
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const int ai = a.id, bi = b.id;
  return push({s}, 1, 1, tracks(a) || tracks(b),
              [ai, bi](Graph& g, const Node& self) {
                const double gs = self.grad[0];
                const auto& av = g.nodes_[ai].value;
                const auto& bv = g.nodes_[bi].value;
                if (g.nodes_[ai].needs_grad) {
                  auto& ga = g.grad(ai);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gs * bv[i];
                }
                if (g.nodes_[bi].needs_grad) {
                  auto& gb = g.grad(bi);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gs * av[i];
                }
              });
}

Var Graph::cosine(Var a, Var b) {
  expect_same_size(a, b, "cosine");
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    ab += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ZeroVector();
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double c = ab / (na * nb);
  const int ai = a.id, bi = b.id;
  return push({c}, 1, 1, tracks(a) || tracks(b),
              [ai, bi, na, nb, c](Graph& g, const Node& self) {
                const double gs = self.grad[0];
                const auto& av = g.nodes_[ai].value;
                const auto& bv = g.nodes_[bi].value;
                // dc/da = b/(|a||b|) - c a/|a|^2
                if (g.nodes_[ai].needs_grad) {
                  auto& ga = g.grad(ai);
                  for (std::size_t i = 0; i < ga.size(); ++i) {
                    ga[i] += gs * (bv[i] / (na * nb) - c * av[i] / (na * na));
                  }
                }
                if (g.nodes_[bi].needs_grad) {
                  auto& gb = g.grad(bi);
                  for (std::size_t i = 0; i < gb.size(); ++i) {
                    gb[i] += gs * (av[i] / (na * nb) - c * bv[i] / (nb * nb));
                  }
                }
              });
}

Var Graph::half_sq_dist(Var a, Var b) {
  expect_same_size(a, b, "half_sq_dist");
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  const int ai = a.id, bi = b.id;
  return push({0.5 * s}, 1, 1, tracks(a) || tracks(b),
              [ai, bi](Graph& g, const Node& self) {
                const double gs = self.grad[0];
                const auto& av = g.nodes_[ai].value;
                const auto& bv = g.nodes_[bi].value;
                if (g.nodes_[ai].needs_grad) {
                  auto& ga = g.grad(ai);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gs * (av[i] - bv[i]);
                }
                if (g.nodes_[bi].needs_grad) {
                  auto& gb = g.grad(bi);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gs * (bv[i] - av[i]);
                }
              });
}

Var Graph::weighted_sum(std::span<const std::pair<double, Var>> terms) {
  if (terms.empty()) throw ShapeError("weighted_sum of no terms");
  const std::size_t n = node(terms[0].second).value.size();
  std::vector<double> out(n, 0.0);
  bool needs = false;
  std::vector<std::pair<double, int>> ids;
  for (const auto& [w, v] : terms) {
    expect_same_size(terms[0].second, v, "weighted_sum");
    const auto& vv = node(v).value;
    for (std::size_t i = 0; i < n; ++i) out[i] += w * vv[i];
    needs = needs || tracks(v);
    ids.emplace_back(w, v.id);
  }
  return push(std::move(out), n, 1, needs,
              [ids = std::move(ids)](Graph& g, const Node& self) {
                for (const auto& [w, id] : ids) {
                  if (!g.nodes_[id].needs_grad) continue;
                  auto& gi = g.grad(id);
                  for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += w * self.grad[i];
                }
              });
}

void Graph::backward(Var root) {
  if (node(root).value.size() != 1) {
    throw ShapeError("backward() needs a scalar root");
  }
  grad(root.id)[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n);
  }
}

void Graph::accumulate_param_grads(ParamSet& grads) const {
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!grads.contains(name)) {
      grads.add(name, Tensor::zeros(params_->at(name).shape()));
    }
    if (n.grad.empty()) continue;
    auto dst = grads.at(name).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

// --------------------------------------------------------------- GruCell

GruCell GruCell::bind(Graph& g, std::string_view prefix) {
  const std::string p(prefix);
  return GruCell{g.param(p + "W_u"), g.param(p + "U_u"), g.param(p + "b_u"),
                 g.param(p + "W_r"), g.param(p + "U_r"), g.param(p + "b_r"),
                 g.param(p + "W_h"), g.param(p + "U_h"), g.param(p + "b_h")};
}

void GruCell::init(ParamSet& params, std::string_view prefix,
                   std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                   double scale) {
  const std::string p(prefix);
  for (const char* gate : {"u", "r", "h"}) {
    params.add(p + "W_" + gate,
               Tensor::uniform({hidden_dim, input_dim}, rng, scale));
    params.add(p + "U_" + gate,
               Tensor::uniform({hidden_dim, hidden_dim}, rng, scale));
    params.add(p + "b_" + gate, Tensor::uniform({hidden_dim}, rng, scale));
  }
}

Var GruCell::step(Graph& g, Var h, Var x) const {
  const Var u = g.sigmoid(g.add(g.affine(w_u, x, b_u), g.matvec(u_u, h)));
  const Var r = g.sigmoid(g.add(g.affine(w_r, x, b_r), g.matvec(u_r, h)));
  const Var cand =
      g.tanh(g.add(g.affine(w_h, x, b_h), g.matvec(u_h, g.mul(r, h))));
  // (1-u)*h + u*h~ == h + u*(h~ - h)
  return g.add(h, g.mul(u, g.sub(cand, h)));
}

// ------------------------------------------------------ free functions

Tensor softmax_with_temperature(const Tensor& logits, double tau) {
  if (!(tau > 0)) throw ConfigError("softmax temperature must be > 0");
  if (logits.shape().size() > 2) throw ShapeError("softmax expects rank <= 2");
  const std::size_t cols =
      logits.shape().size() == 1 ? logits.size() : logits.cols();
  std::vector<double> out(logits.size());
  for (std::size_t start = 0; start < logits.size(); start += cols) {
    softmax_kernel(logits.data().subspan(start, cols), tau,
                   std::span<double>(out).subspan(start, cols));
  }
  return Tensor(logits.shape(), std::move(out));
}

Tensor gru_step(const ParamSet& params, std::string_view prefix,
                const Tensor& h, const Tensor& x_emb) {
  Graph g(&params);
  const GruCell cell = GruCell::bind(g, prefix);
  const Var out = cell.step(g, g.constant(h), g.constant(x_emb));
  return Tensor::vector(g.value(out));
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
  Graph g;
  return g.scalar(g.cosine(g.constant(a.values()), g.constant(b.values())));
}

GradCheckResult grad_check_detailed(const LossFn& loss_fn,
                                    const ParamSet& params, double eps) {
  if (eps < 1e-6 || eps > 1e-3) {
    throw ConfigError("grad_check eps must lie in [1e-6, 1e-3]");
  }
  ParamSet analytic = params.zeros_like();
  loss_fn(params, &analytic);

  GradCheckResult result;
  ParamSet probe = params;
  for (const auto& [name, tensor] : params) {
    const bool has = analytic.contains(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double orig = tensor[i];
      probe.at(name)[i] = orig + eps;
      const double plus = loss_fn(probe, nullptr);
      probe.at(name)[i] = orig - eps;
      const double minus = loss_fn(probe, nullptr);
      probe.at(name)[i] = orig;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = has ? analytic.at(name)[i] : 0.0;
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_rel_error) {
        result = {err, name, i};
      }
    }
  }
  return result;
}

double grad_check(const LossFn& loss_fn, const ParamSet& params, double eps) {
  return grad_check_detailed(loss_fn, params, eps).max_rel_error;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (!(cfg.lr > 0)) throw ConfigError("Adam lr must be > 0");
  for (const auto& [name, g] : grads) {
    if (params.at(name).shape() != g.shape()) {
      throw ShapeError("gradient shape mismatch for '" + name + "'");
    }
    if (!state.m.contains(name)) {
      state.m.add(name, Tensor::zeros(g.shape()));
      state.v.add(name, Tensor::zeros(g.shape()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    auto p = params.at(name).data();
    auto m = state.m.at(name).data();
    auto v = state.v.at(name).data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void clip_grad_norm(ParamSet& grads, double max_norm) {
  const double norm = grads.l2_norm();
  if (norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
}

}  // namespace stylebench::dif

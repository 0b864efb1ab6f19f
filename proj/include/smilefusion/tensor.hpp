// Copyright 2026 The SmileFusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SMILEFUSION_TENSOR_HPP_
#define SMILEFUSION_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace smilefusion::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles. A rank-0 tensor holds one value.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  // Extent along `axis`; negative axes count from the back.
  std::size_t dim(int axis) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Node;

// Handle on a node of the differentiation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const;
  Tensor& mutable_value();
  const Tensor& grad() const;
  Tensor& mutable_grad();
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  void zero_grad();
  bool defined() const { return node_ != nullptr; }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad();
};

Var constant(Tensor value);

// Builds a node from a forward value. `backward` is only stored when some
// parent requires gradients. Throws NonFiniteValue if `value` has NaN/Inf.
Var make_result(const char* op, Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
// calls; intermediate gradients are recomputed each call.
void backward(const Var& loss);

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
};

// Ordered, uniquely named parameter collection.
class ParameterSet {
 public:
  Var add(std::string name, Tensor init, bool trainable = true);
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }
  std::size_t count() const;  // total scalar entries
  std::size_t size() const { return params_.size(); }
  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

// ---- operations -------------------------------------------------------------
// Binary elementwise ops broadcast right-aligned axes whose extents are equal
// or 1. All reductions and axis ops accept negative axes.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double c);
Var one_minus(const Var& x);

// [..., n, k] x [..., k, m] with broadcast leading axes.
Var matmul(const Var& a, const Var& b);
// x[..., in] * weight[out, in]^T + bias[out]; bias may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

Var sum(const Var& x);
Var sum_over_axis(const Var& x, int axis, bool keep_dim = false);
Var mean_over_axis(const Var& x, int axis, bool keep_dim = false);
Var max_over_axis(const Var& x, int axis, bool keep_dim = false);

Var transpose(const Var& x, int axis0, int axis1);
Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& x, int axis, std::size_t start, std::size_t length);

Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);
Var softmax_over_axis(const Var& x, int axis);
// Normalizes along `axis` without affine terms: (x - mean) / sqrt(var + eps).
Var layer_norm(const Var& x, int axis, double eps = 1e-5);
// Inverted dropout; identity when rate == 0 or !train. The mask is a pure
// function of (seed, element index).
Var dropout(const Var& x, double rate, bool train, std::uint64_t seed);

// out[b, o] = sum_ij x[b, i] * core[o, i, j] * z[b, j]
Var bilinear_form(const Var& x, const Var& core, const Var& z);

// Mean binary cross-entropy of probabilities (any shape, one per label)
// clamped to [1e-12, 1 - 1e-12].
Var bce_mean(const Var& prob, std::span<const double> labels);

// ---- numerics helpers ---------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace smilefusion::ad

#endif  // SMILEFUSION_TENSOR_HPP_

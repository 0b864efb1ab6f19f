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

#include "smilefusion/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <Eigen/Core>

#include "smilefusion/error.hpp"

namespace smilefusion::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeMismatch("axis " + std::to_string(axis) + " out of range for rank " +
                        std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit out;
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  out.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keep_dim) {
  Shape out = s;
  if (keep_dim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Flat source offsets of every output element when broadcasting `a` and `b`.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_index, b_index;
  bool same = false;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      throw ShapeMismatch(std::string(op) + ": cannot broadcast " + shape_string(a) +
                          " with " + shape_string(b));
    }
  }
  const auto sa = strides_of(pa), sb = strides_of(pb);
  const std::size_t total = shape_size(plan.out);
  plan.a_index.resize(total);
  plan.b_index.resize(total);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      if (pa[d] != 1) ia += idx[d] * sa[d];
      if (pb[d] != 1) ib += idx[d] * sb[d];
    }
    plan.a_index[flat] = ia;
    plan.b_index[flat] = ib;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < plan.out[d]) break;
      idx[d] = 0;
    }
  }
  return plan;
}

void check_finite(const char* op, const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NonFiniteValue(std::string(op) + " produced a non-finite value");
    }
  }
}

// Copy of `src` with axes permuted: out axis i is src axis perm[i].
Tensor permute(const Tensor& src, const std::vector<std::size_t>& perm) {
  const Shape& s = src.shape();
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out_shape[i] = s[perm[i]];
  const auto src_strides = strides_of(s);
  Tensor out(out_shape);
  const std::size_t rank = s.size();
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < rank; ++d) off += idx[d] * src_strides[perm[d]];
    out[flat] = src[off];
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename Fwd, typename Deriv>
Var unary_map(const char* op, const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const auto in = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(op, std::move(out), {x}, [deriv](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      p.grad[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeMismatch("tensor extents must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeMismatch("data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

std::size_t Tensor::dim(int axis) const { return shape_[normalize_axis(axis, rank())]; }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeMismatch("item() on " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

// ---- graph ------------------------------------------------------------------

void Node::ensure_grad() {
  if (grad.shape() != value.shape() || grad.size() != value.size()) {
    grad = Tensor(value.shape(), 0.0);
  }
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->ensure_grad();
}

const Tensor& Var::value() const { return node_->value; }
Tensor& Var::mutable_value() { return node_->value; }
const Tensor& Var::grad() const {
  node_->ensure_grad();
  return node_->grad;
}
Tensor& Var::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}
bool Var::requires_grad() const { return node_->requires_grad; }
void Var::zero_grad() {
  node_->ensure_grad();
  std::fill(node_->grad.data().begin(), node_->grad.data().end(), 0.0);
}

Var constant(Tensor value) { return Var(std::move(value), false); }

Var make_result(const char* op, Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward_fn) {
  check_finite(op, value);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  for (const Var& p : parents) {
    if (p.defined() && p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const Var& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw NotScalarLoss("backward needs a scalar loss, got shape " +
                        shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p != nullptr && p->requires_grad && seen.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->parents.empty()) {
      n->grad = Tensor(n->value.shape(), 0.0);
    } else {
      n->ensure_grad();
    }
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

// ---- ParameterSet -----------------------------------------------------------

Var ParameterSet::add(std::string name, Tensor init, bool trainable) {
  if (find(name) != nullptr) {
    throw InvalidArgument("duplicate parameter name: " + name);
  }
  Var v(std::move(init), true);
  params_.push_back({std::move(name), v, trainable});
  return v;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.var.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.var.zero_grad();
}

// ---- elementwise ------------------------------------------------------------

namespace {

template <typename Fwd, typename GradA, typename GradB>
Var binary_map(const char* op, const Var& a, const Var& b, Fwd fwd, GradA ga, GradB gb) {
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape(), op));
  Tensor out(plan->out);
  const auto av = a.value().data();
  const auto bv = b.value().data();
  if (plan->same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = fwd(av[plan->a_index[i]], bv[plan->b_index[i]]);
    }
  }
  return make_result(op, std::move(out), {a, b}, [plan, ga, gb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const std::size_t n = self.value.size();
    if (pa.requires_grad) pa.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ia = plan->same ? i : plan->a_index[i];
      const std::size_t ib = plan->same ? i : plan->b_index[i];
      const double g = self.grad[i];
      if (pa.requires_grad) pa.grad[ia] += g * ga(pa.value[ia], pb.value[ib]);
      if (pb.requires_grad) pb.grad[ib] += g * gb(pa.value[ia], pb.value[ib]);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_map(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_map(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_map(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(const Var& x, double factor) {
  return unary_map(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double c) {
  return unary_map(
      "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var one_minus(const Var& x) {
  return unary_map(
      "one_minus", x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Var sigmoid(const Var& x) {
  return unary_map(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary_map(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& x) {
  return unary_map(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

// ---- linear algebra ---------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw ShapeMismatch("matmul needs rank >= 2, got " + shape_string(sa) + " and " +
                        shape_string(sb));
  }
  const std::size_t n = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = sb[sb.size() - 2], m = sb.back();
  if (k != kb) {
    throw ShapeMismatch("matmul inner extents differ: " + shape_string(sa) + " x " +
                        shape_string(sb));
  }
  const Shape lead_a(sa.begin(), sa.end() - 2), lead_b(sb.begin(), sb.end() - 2);
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(lead_a, lead_b, "matmul"));
  const std::size_t batches = shape_size(plan->out);
  Shape out_shape = plan->out;
  out_shape.push_back(n);
  out_shape.push_back(m);
  Tensor out(out_shape);
  auto a_off = [plan, n, k](std::size_t i) {
    return (plan->same ? i : plan->a_index[i]) * n * k;
  };
  auto b_off = [plan, k, m](std::size_t i) {
    return (plan->same ? i : plan->b_index[i]) * k * m;
  };
  for (std::size_t i = 0; i < batches; ++i) {
    ConstMapMat A(a.value().data().data() + a_off(i), n, k);
    ConstMapMat B(b.value().data().data() + b_off(i), k, m);
    MapMat C(out.data().data() + i * n * m, n, m);
    C.noalias() = A * B;
  }
  return make_result("matmul", std::move(out), {a, b},
                     [a_off, b_off, batches, n, k, m](Node& self) {
                       Node& pa = parent(self, 0);
                       Node& pb = parent(self, 1);
                       if (pa.requires_grad) pa.ensure_grad();
                       if (pb.requires_grad) pb.ensure_grad();
                       for (std::size_t i = 0; i < batches; ++i) {
                         ConstMapMat G(self.grad.data().data() + i * n * m, n, m);
                         if (pa.requires_grad) {
                           ConstMapMat B(pb.value.data().data() + b_off(i), k, m);
                           MapMat dA(pa.grad.data().data() + a_off(i), n, k);
                           dA.noalias() += G * B.transpose();
                         }
                         if (pb.requires_grad) {
                           ConstMapMat A(pa.value.data().data() + a_off(i), n, k);
                           MapMat dB(pb.grad.data().data() + b_off(i), k, m);
                           dB.noalias() += A.transpose() * G;
                         }
                       }
                     });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sw.size() != 2 || sx.empty() || sx.back() != sw[1]) {
    throw ShapeMismatch("linear: input " + shape_string(sx) + " vs weight " +
                        shape_string(sw));
  }
  const std::size_t in = sw[1], outd = sw[0];
  const bool has_bias = bias.defined();
  if (has_bias && bias.value().size() != outd) {
    throw ShapeMismatch("linear: bias " + shape_string(bias.shape()) + " vs weight " +
                        shape_string(sw));
  }
  const std::size_t rows = x.value().size() / in;
  Shape out_shape = sx;
  out_shape.back() = outd;
  Tensor out(out_shape);
  {
    ConstMapMat X(x.value().data().data(), rows, in);
    ConstMapMat W(weight.value().data().data(), outd, in);
    MapMat Y(out.data().data(), rows, outd);
    Y.noalias() = X * W.transpose();
    if (has_bias) {
      Eigen::Map<const Eigen::RowVectorXd> b(bias.value().data().data(), outd);
      Y.rowwise() += b;
    }
  }
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result("linear", std::move(out), parents,
                     [rows, in, outd, has_bias](Node& self) {
                       Node& px = parent(self, 0);
                       Node& pw = parent(self, 1);
                       ConstMapMat G(self.grad.data().data(), rows, outd);
                       if (px.requires_grad) {
                         px.ensure_grad();
                         ConstMapMat W(pw.value.data().data(), outd, in);
                         MapMat dX(px.grad.data().data(), rows, in);
                         dX.noalias() += G * W;
                       }
                       if (pw.requires_grad) {
                         pw.ensure_grad();
                         ConstMapMat X(px.value.data().data(), rows, in);
                         MapMat dW(pw.grad.data().data(), outd, in);
                         dW.noalias() += G.transpose() * X;
                       }
                       if (has_bias) {
                         Node& pb = parent(self, 2);
                         if (pb.requires_grad) {
                           pb.ensure_grad();
                           Eigen::Map<Eigen::RowVectorXd> db(pb.grad.data().data(), outd);
                           db += G.colwise().sum();
                         }
                       }
                     });
}

Var bilinear_form(const Var& x, const Var& core, const Var& z) {
  const Shape& sx = x.shape();
  const Shape& sc = core.shape();
  const Shape& sz = z.shape();
  if (sx.size() != 2 || sz.size() != 2 || sc.size() != 3 || sx[0] != sz[0] ||
      sc[1] != sx[1] || sc[2] != sz[1]) {
    throw ShapeMismatch("bilinear_form: " + shape_string(sx) + ", core " +
                        shape_string(sc) + ", " + shape_string(sz));
  }
  const std::size_t batch = sx[0], I = sx[1], J = sz[1], O = sc[0];
  // cz[(o*I + i), b] = sum_j core[o, i, j] z[b, j]
  auto cz = std::make_shared<RowMat>(O * I, batch);
  ConstMapMat C(core.value().data().data(), O * I, J);
  ConstMapMat Z(z.value().data().data(), batch, J);
  ConstMapMat X(x.value().data().data(), batch, I);
  cz->noalias() = C * Z.transpose();
  Tensor out(Shape{batch, O});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < O; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < I; ++i) s += X(b, i) * (*cz)(o * I + i, b);
      out[b * O + o] = s;
    }
  }
  return make_result("bilinear_form", std::move(out), {x, core, z},
                     [cz, batch, I, J, O](Node& self) {
                       Node& px = parent(self, 0);
                       Node& pc = parent(self, 1);
                       Node& pz = parent(self, 2);
                       ConstMapMat G(self.grad.data().data(), batch, O);
                       ConstMapMat X(px.value.data().data(), batch, I);
                       ConstMapMat Z(pz.value.data().data(), batch, J);
                       ConstMapMat C(pc.value.data().data(), O * I, J);
                       if (px.requires_grad) {
                         px.ensure_grad();
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t o = 0; o < O; ++o)
                             for (std::size_t i = 0; i < I; ++i)
                               px.grad[b * I + i] += G(b, o) * (*cz)(o * I + i, b);
                       }
                       // w[(o*I+i), b] = g[b,o] x[b,i]
                       RowMat w(O * I, batch);
                       for (std::size_t o = 0; o < O; ++o)
                         for (std::size_t i = 0; i < I; ++i)
                           for (std::size_t b = 0; b < batch; ++b)
                             w(o * I + i, b) = G(b, o) * X(b, i);
                       if (pz.requires_grad) {
                         pz.ensure_grad();
                         MapMat dZ(pz.grad.data().data(), batch, J);
                         dZ.noalias() += w.transpose() * C;
                       }
                       if (pc.requires_grad) {
                         pc.ensure_grad();
                         MapMat dC(pc.grad.data().data(), O * I, J);
                         dC.noalias() += w * Z;
                       }
                     });
}

// ---- reductions -------------------------------------------------------------

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result("sum", Tensor::scalar(s), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double g = self.grad[0];
    for (double& v : p.grad.data()) v += g;
  });
}

Var sum_over_axis(const Var& x, int axis, bool keep_dim) {
  const std::size_t ax = normalize_axis(axis, x.value().rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  Tensor out(reduced_shape(x.shape(), ax, keep_dim));
  const auto in = x.value().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.n; ++j)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += in[(o * s.n + j) * s.inner + i];
  return make_result("sum_over_axis", std::move(out), {x}, [s](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t j = 0; j < s.n; ++j)
        for (std::size_t i = 0; i < s.inner; ++i)
          p.grad[(o * s.n + j) * s.inner + i] += self.grad[o * s.inner + i];
  });
}

Var mean_over_axis(const Var& x, int axis, bool keep_dim) {
  const std::size_t ax = normalize_axis(axis, x.value().rank());
  const double n = static_cast<double>(x.shape()[ax]);
  const AxisSplit s = split_axis(x.shape(), ax);
  Tensor out(reduced_shape(x.shape(), ax, keep_dim));
  const auto in = x.value().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.n; ++j)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += in[(o * s.n + j) * s.inner + i];
  for (double& v : out.data()) v /= n;
  return make_result("mean_over_axis", std::move(out), {x}, [s, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t j = 0; j < s.n; ++j)
        for (std::size_t i = 0; i < s.inner; ++i)
          p.grad[(o * s.n + j) * s.inner + i] += self.grad[o * s.inner + i] / n;
  });
}

Var max_over_axis(const Var& x, int axis, bool keep_dim) {
  const std::size_t ax = normalize_axis(axis, x.value().rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  Tensor out(reduced_shape(x.shape(), ax, keep_dim));
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto in = x.value().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = (o * s.n) * s.inner + i;
      for (std::size_t j = 1; j < s.n; ++j) {
        const std::size_t idx = (o * s.n + j) * s.inner + i;
        if (in[idx] > in[best]) best = idx;
      }
      out[o * s.inner + i] = in[best];
      (*arg)[o * s.inner + i] = best;
    }
  }
  return make_result("max_over_axis", std::move(out), {x}, [arg](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t k = 0; k < arg->size(); ++k) p.grad[(*arg)[k]] += self.grad[k];
  });
}

// ---- shape ops --------------------------------------------------------------

Var transpose(const Var& x, int axis0, int axis1) {
  const std::size_t rank = x.value().rank();
  const std::size_t a0 = normalize_axis(axis0, rank), a1 = normalize_axis(axis1, rank);
  std::vector<std::size_t> perm(rank);
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[a0], perm[a1]);
  return make_result("transpose", permute(x.value(), perm), {x}, [perm](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    const Tensor back = permute(self.grad, perm);
    for (std::size_t i = 0; i < back.size(); ++i) p.grad[i] += back[i];
  });
}

Var reshape(const Var& x, Shape shape) {
  if (shape_size(shape) != x.value().size()) {
    throw ShapeMismatch("reshape " + shape_string(x.shape()) + " to " +
                        shape_string(shape));
  }
  return make_result("reshape", x.value().reshaped(std::move(shape)), {x},
                     [](Node& self) {
                       Node& p = parent(self, 0);
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p.grad[i] += self.grad[i];
                     });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat of nothing");
  const Shape& first = parts.front().shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      if (d != ax && s[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw ShapeMismatch("concat: " + shape_string(first) + " vs " + shape_string(s));
    }
    out_shape[ax] += s[ax];
    widths.push_back(s[ax]);
  }
  const AxisSplit os = split_axis(out_shape, ax);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto in = parts[k].value().data();
    const std::size_t w = widths[k] * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(o * w), w,
                  out.data().begin() +
                      static_cast<std::ptrdiff_t>(o * os.n * os.inner + offset));
    }
    offset += w;
  }
  return make_result("concat", std::move(out), parts, [widths, os](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = parent(self, k);
      const std::size_t w = widths[k] * os.inner;
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t o = 0; o < os.outer; ++o)
          for (std::size_t i = 0; i < w; ++i)
            p.grad[o * w + i] += self.grad[o * os.n * os.inner + offset + i];
      }
      offset += w;
    }
  });
}

Var slice(const Var& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, x.value().rank());
  if (length == 0 || start + length > x.shape()[ax]) {
    throw ShapeMismatch("slice [" + std::to_string(start) + ", +" +
                        std::to_string(length) + ") out of " + shape_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  Tensor out(out_shape);
  const auto in = x.value().data();
  const std::size_t w = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((o * s.n + start) * s.inner), w,
                out.data().begin() + static_cast<std::ptrdiff_t>(o * w));
  }
  return make_result("slice", std::move(out), {x}, [s, start, w](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < w; ++i)
        p.grad[(o * s.n + start) * s.inner + i] += self.grad[o * w + i];
  });
}

// ---- normalizers ------------------------------------------------------------

Var softmax_over_axis(const Var& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.value().rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  Tensor out(x.shape());
  const auto in = x.value().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t j) { return (o * s.n + j) * s.inner + i; };
      double m = in[at(0)];
      for (std::size_t j = 1; j < s.n; ++j) m = std::max(m, in[at(j)]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        out[at(j)] = std::exp(in[at(j)] - m);
        z += out[at(j)];
      }
      for (std::size_t j = 0; j < s.n; ++j) out[at(j)] /= z;
    }
  }
  return make_result("softmax", std::move(out), {x}, [s](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t j) { return (o * s.n + j) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) dot += self.grad[at(j)] * self.value[at(j)];
        for (std::size_t j = 0; j < s.n; ++j)
          p.grad[at(j)] += self.value[at(j)] * (self.grad[at(j)] - dot);
      }
    }
  });
}

Var layer_norm(const Var& x, int axis, double eps) {
  const std::size_t ax = normalize_axis(axis, x.value().rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  Tensor out(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(s.outer * s.inner);
  const auto in = x.value().data();
  const double n = static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t j) { return (o * s.n + j) * s.inner + i; };
      double mean = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) mean += in[at(j)];
      mean /= n;
      double var = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) var += (in[at(j)] - mean) * (in[at(j)] - mean);
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      (*inv_std)[o * s.inner + i] = inv;
      for (std::size_t j = 0; j < s.n; ++j) out[at(j)] = (in[at(j)] - mean) * inv;
    }
  }
  return make_result("layer_norm", std::move(out), {x}, [s, inv_std, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t j) { return (o * s.n + j) * s.inner + i; };
        double mg = 0.0, mgx = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) {
          mg += self.grad[at(j)];
          mgx += self.grad[at(j)] * self.value[at(j)];
        }
        mg /= n;
        mgx /= n;
        const double inv = (*inv_std)[o * s.inner + i];
        for (std::size_t j = 0; j < s.n; ++j)
          p.grad[at(j)] += inv * (self.grad[at(j)] - mg - self.value[at(j)] * mgx);
      }
    }
  });
}

Var dropout(const Var& x, double rate, bool train, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  Tensor out(x.shape());
  const std::uint64_t base = splitmix64(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u =
        static_cast<double>(splitmix64(base ^ splitmix64(i)) >> 11) * 0x1.0p-53;
    (*mask)[i] = u >= rate ? 1.0 / keep : 0.0;
    out[i] = x.value()[i] * (*mask)[i];
  }
  return make_result("dropout", std::move(out), {x}, [mask](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < mask->size(); ++i) p.grad[i] += self.grad[i] * (*mask)[i];
  });
}

constexpr double kProbLo = 1e-12;
constexpr double kProbHi = 1.0 - 1e-12;

Var bce_mean(const Var& prob, std::span<const double> labels) {
  if (prob.value().size() != labels.size() || labels.empty()) {
    throw ShapeMismatch("bce: " + std::to_string(prob.value().size()) +
                        " probabilities vs " + std::to_string(labels.size()) + " labels");
  }
  const double n = static_cast<double>(labels.size());
  auto y = std::make_shared<std::vector<double>>(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(prob.value()[i], kProbLo, kProbHi);
    total -= (*y)[i] * std::log(p) + (1.0 - (*y)[i]) * std::log(1.0 - p);
  }
  return make_result("bce", Tensor::scalar(total / n), {prob}, [y, n](Node& self) {
    Node& pp = parent(self, 0);
    if (!pp.requires_grad) return;
    pp.ensure_grad();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < y->size(); ++i) {
      const double p = pp.value[i];
      if (p < kProbLo || p > kProbHi) continue;
      pp.grad[i] += -g / n * ((*y)[i] / p - (1.0 - (*y)[i]) / (1.0 - p));
    }
  });
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace smilefusion::ad

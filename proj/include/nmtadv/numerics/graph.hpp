#pragma once

// Define-by-run reverse-mode differentiation over dense row-major matrices.
//
// Every operation is evaluated eagerly when it is recorded, so node ids are
// already a topological order.  backward() walks the tape from the output
// node down to id 0.

#include "nmtadv/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace nmtadv {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

template <typename Scalar>
class BasicGraph;

template <typename Scalar>
struct Var {
  BasicGraph<Scalar>* graph = nullptr;
  int id = -1;

  [[nodiscard]] bool valid() const { return graph != nullptr && id >= 0; }
  [[nodiscard]] const Matrix<Scalar>& value() const { return graph->value(*this); }
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
};

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  MatMulTransposedRhs,
  Transpose,
  Add,
  AddRowBroadcast,
  Sub,
  Mul,
  MulRowBroadcast,
  Scale,
  Tanh,
  Sigmoid,
  Relu,
  Exp,
  Log,
  Softmax,
  LogSoftmax,
  LayerNorm,
  ConcatCols,
  ConcatRows,
  SliceRows,
  SliceCols,
  Sum,
  Mean,
  Gather,
};

template <typename Scalar>
class BasicGraph {
 public:
  using MatrixType = Matrix<Scalar>;
  using VarType = Var<Scalar>;

  BasicGraph() = default;
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  // -- leaves ---------------------------------------------------------------

  VarType input(MatrixType value, bool requires_grad = false) {
    Node& n = push(OpKind::Leaf, {}, requires_grad);
    n.value = std::move(value);
    return {this, last()};
  }

  /// Leaf that aliases caller-owned storage.  The storage must outlive the
  /// graph and stay unchanged while the graph is in use.
  VarType reference(const MatrixType& value, bool requires_grad = false) {
    Node& n = push(OpKind::Leaf, {}, requires_grad);
    n.external = &value;
    return {this, last()};
  }

  VarType scalar(Scalar v) { return input(MatrixType::Constant(1, 1, v)); }

  // -- linear algebra -------------------------------------------------------

  VarType matmul(VarType a, VarType b) {
    check_same_graph(a, b);
    if (value(a).cols() != value(b).rows()) shape_error("matmul", a, b);
    Node& n = push(OpKind::MatMul, {a.id, b.id});
    n.value.noalias() = value(a) * value(b);
    return {this, last()};
  }

  /// a * b^T without materialising the transpose.
  VarType matmul_transposed(VarType a, VarType b) {
    check_same_graph(a, b);
    if (value(a).cols() != value(b).cols()) shape_error("matmul_transposed", a, b);
    Node& n = push(OpKind::MatMulTransposedRhs, {a.id, b.id});
    n.value.noalias() = value(a) * value(b).transpose();
    return {this, last()};
  }

  VarType transpose(VarType a) {
    Node& n = push(OpKind::Transpose, {a.id});
    n.value = value(a).transpose();
    return {this, last()};
  }

  // -- elementwise ----------------------------------------------------------

  VarType add(VarType a, VarType b) {
    check_same_graph(a, b);
    if (value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols()) {
      Node& n = push(OpKind::Add, {a.id, b.id});
      n.value = value(a) + value(b);
      return {this, last()};
    }
    if (value(b).rows() == 1 && value(b).cols() == value(a).cols()) {
      Node& n = push(OpKind::AddRowBroadcast, {a.id, b.id});
      n.value = value(a).rowwise() + value(b).row(0);
      return {this, last()};
    }
    shape_error("add", a, b);
  }

  VarType sub(VarType a, VarType b) {
    check_same_graph(a, b);
    require_same_shape("sub", a, b);
    Node& n = push(OpKind::Sub, {a.id, b.id});
    n.value = value(a) - value(b);
    return {this, last()};
  }

  VarType mul(VarType a, VarType b) {
    check_same_graph(a, b);
    if (value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols()) {
      Node& n = push(OpKind::Mul, {a.id, b.id});
      n.value = value(a).cwiseProduct(value(b));
      return {this, last()};
    }
    if (value(b).rows() == 1 && value(b).cols() == value(a).cols()) {
      Node& n = push(OpKind::MulRowBroadcast, {a.id, b.id});
      n.value = value(a).array().rowwise() * value(b).row(0).array();
      return {this, last()};
    }
    shape_error("mul", a, b);
  }

  VarType scale(VarType a, Scalar factor) {
    Node& n = push(OpKind::Scale, {a.id});
    n.scalar = factor;
    n.value = value(a) * factor;
    return {this, last()};
  }

  VarType tanh(VarType a) {
    Node& n = push(OpKind::Tanh, {a.id});
    n.value = value(a).array().tanh();
    return {this, last()};
  }

  VarType sigmoid(VarType a) {
    Node& n = push(OpKind::Sigmoid, {a.id});
    n.value = (Scalar(1) + (-value(a).array()).exp()).inverse();
    return {this, last()};
  }

  VarType relu(VarType a) {
    Node& n = push(OpKind::Relu, {a.id});
    n.value = value(a).cwiseMax(Scalar(0));
    return {this, last()};
  }

  VarType exp(VarType a) {
    Node& n = push(OpKind::Exp, {a.id});
    n.value = value(a).array().exp();
    return {this, last()};
  }

  VarType log(VarType a) {
    Node& n = push(OpKind::Log, {a.id});
    n.value = value(a).array().log();
    return {this, last()};
  }

  // -- row-wise normalisations ---------------------------------------------

  static constexpr Scalar kExpUnderflow = std::is_same_v<Scalar, float> ? Scalar(-87) : Scalar(-708);

  VarType softmax(VarType a) {
    Node& n = push(OpKind::Softmax, {a.id});
    const MatrixType& x = value(a);
    n.value.resize(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar m = x.row(r).maxCoeff();
      const auto shifted = (x.row(r).array() - m).eval();
      // Vectorised exp clamps very negative inputs to a denormal; masked
      // entries must come out as exact zeros.
      n.value.row(r) = (shifted < kExpUnderflow).select(Scalar(0), shifted.exp());
      n.value.row(r) /= n.value.row(r).sum();
    }
    return {this, last()};
  }

  VarType log_softmax(VarType a) {
    Node& n = push(OpKind::LogSoftmax, {a.id});
    const MatrixType& x = value(a);
    n.value.resize(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar m = x.row(r).maxCoeff();
      const Scalar lse = m + std::log((x.row(r).array() - m).exp().sum());
      n.value.row(r) = x.row(r).array() - lse;
    }
    return {this, last()};
  }

  /// (x - mean) / sqrt(var + eps) per row; gain and bias are applied by the
  /// caller with mul/add broadcasts.
  VarType layer_norm(VarType a, Scalar eps = Scalar(1e-5)) {
    Node& n = push(OpKind::LayerNorm, {a.id});
    const MatrixType& x = value(a);
    const auto cols = static_cast<Scalar>(x.cols());
    n.value.resize(x.rows(), x.cols());
    n.aux.resize(x.rows(), 1);  // inverse standard deviation per row
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar mu = x.row(r).sum() / cols;
      const auto centered = (x.row(r).array() - mu).eval();
      const Scalar var = centered.square().sum() / cols;
      const Scalar inv = Scalar(1) / std::sqrt(var + eps);
      n.aux(r, 0) = inv;
      n.value.row(r) = centered * inv;
    }
    return {this, last()};
  }

  // -- structure ------------------------------------------------------------

  VarType concat_cols(std::span<const VarType> parts) {
    if (parts.empty()) throw ContractViolation("concat_cols: no inputs");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
      if (value(p).rows() != rows) shape_error("concat_cols", parts[0], p);
      cols += value(p).cols();
    }
    Node& n = push(OpKind::ConcatCols, {});
    n.value.resize(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      n.many.push_back(p.id);
      n.value.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
      n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
    }
    return {this, last()};
  }

  VarType concat_cols(std::initializer_list<VarType> parts) {
    return concat_cols(std::span<const VarType>(parts.begin(), parts.size()));
  }

  VarType concat_rows(std::span<const VarType> parts) {
    if (parts.empty()) throw ContractViolation("concat_rows: no inputs");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
      if (value(p).cols() != cols) shape_error("concat_rows", parts[0], p);
      rows += value(p).rows();
    }
    Node& n = push(OpKind::ConcatRows, {});
    n.value.resize(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      n.many.push_back(p.id);
      n.value.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
      n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
    }
    return {this, last()};
  }

  VarType slice_rows(VarType a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count <= 0 || begin + count > value(a).rows())
      throw ContractViolation("slice_rows: range out of bounds");
    Node& n = push(OpKind::SliceRows, {a.id});
    n.offset = begin;
    n.value = value(a).middleRows(begin, count);
    return {this, last()};
  }

  VarType slice_cols(VarType a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count <= 0 || begin + count > value(a).cols())
      throw ContractViolation("slice_cols: range out of bounds");
    Node& n = push(OpKind::SliceCols, {a.id});
    n.offset = begin;
    n.value = value(a).middleCols(begin, count);
    return {this, last()};
  }

  // -- reductions -----------------------------------------------------------

  VarType sum(VarType a) {
    Node& n = push(OpKind::Sum, {a.id});
    n.value = MatrixType::Constant(1, 1, value(a).sum());
    return {this, last()};
  }

  VarType mean(VarType a) {
    Node& n = push(OpKind::Mean, {a.id});
    n.value = MatrixType::Constant(1, 1, value(a).mean());
    return {this, last()};
  }

  /// Column vector whose row i is a(i, index[i]).
  VarType gather(VarType a, std::span<const int> index) {
    if (static_cast<Eigen::Index>(index.size()) != value(a).rows())
      throw ContractViolation("gather: one index per row required");
    Node& n = push(OpKind::Gather, {a.id});
    const MatrixType& x = value(a);
    n.index.assign(index.begin(), index.end());
    n.value.resize(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const int c = index[static_cast<std::size_t>(r)];
      if (c < 0 || c >= x.cols()) throw ContractViolation("gather: index out of range");
      n.value(r, 0) = x(r, c);
    }
    return {this, last()};
  }

  // -- evaluation state -----------------------------------------------------

  [[nodiscard]] const MatrixType& value(VarType v) const { return node_value(nodes_[check(v)]); }

  /// Gradient of the last backward() output with respect to v.  Nodes that do
  /// not depend on a differentiable leaf have no gradient.
  [[nodiscard]] const MatrixType& grad(VarType v) const {
    const Node& n = nodes_[check(v)];
    if (!n.needs_grad) throw ContractViolation("grad: node is not differentiable");
    if (n.grad.size() == 0) throw ContractViolation("grad: backward has not reached this node");
    return n.grad;
  }

  [[nodiscard]] bool requires_grad(VarType v) const { return nodes_[check(v)].needs_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] OpKind kind(VarType v) const { return nodes_[check(v)].op; }

  /// Drops every node recorded after `mark` (a value previously returned by
  /// size()).  Vars that referenced dropped nodes become dangling.
  void truncate(std::size_t mark) {
    if (mark > nodes_.size()) throw ContractViolation("truncate: mark beyond tape");
    nodes_.resize(mark);
  }

  /// Reverse sweep from a 1x1 output.  Gradients are recomputed from zero on
  /// every call, so repeated calls yield identical results.
  void backward(VarType output) {
    const int out = check(output);
    if (node_value(nodes_[out]).size() != 1)
      throw ContractViolation("backward: output node must be scalar");
    for (int i = 0; i <= out; ++i) {
      Node& n = nodes_[i];
      if (n.needs_grad) {
        const MatrixType& v = node_value(n);
        n.grad.setZero(v.rows(), v.cols());
      } else {
        n.grad.resize(0, 0);
      }
    }
    for (std::size_t i = out + 1; i < nodes_.size(); ++i) nodes_[i].grad.resize(0, 0);
    if (!nodes_[out].needs_grad) return;
    nodes_[out].grad(0, 0) = Scalar(1);
    for (int i = out; i >= 0; --i) propagate(i);
  }

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::array<int, 2> parents{-1, -1};
    std::vector<int> many;  // concat inputs
    std::vector<int> index; // gather indices
    MatrixType value;
    MatrixType grad;
    MatrixType aux;
    const MatrixType* external = nullptr;
    Scalar scalar = Scalar(0);
    Eigen::Index offset = 0;
    bool needs_grad = false;
  };

  static const MatrixType& node_value(const Node& n) { return n.external ? *n.external : n.value; }

  int last() const { return static_cast<int>(nodes_.size()) - 1; }

  int check(VarType v) const {
    if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw ContractViolation("variable does not belong to this graph");
    return v.id;
  }

  void check_same_graph(VarType a, VarType b) const {
    check(a);
    check(b);
  }

  Node& push(OpKind op, std::initializer_list<int> parents, bool leaf_grad = false) {
    Node n;
    n.op = op;
    int k = 0;
    for (int p : parents) {
      n.parents[static_cast<std::size_t>(k++)] = p;
      n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
    }
    if (op == OpKind::Leaf) n.needs_grad = leaf_grad;
    nodes_.push_back(std::move(n));
    return nodes_.back();
  }

  [[noreturn]] void shape_error(const char* op, VarType a, VarType b) const {
    const auto& x = value(a);
    const auto& y = value(b);
    throw ContractViolation(std::string(op) + ": incompatible shapes " + std::to_string(x.rows()) +
                            "x" + std::to_string(x.cols()) + " and " + std::to_string(y.rows()) +
                            "x" + std::to_string(y.cols()));
  }

  void require_same_shape(const char* op, VarType a, VarType b) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      shape_error(op, a, b);
  }

  MatrixType* grad_of(int id) {
    Node& n = nodes_[id];
    return n.needs_grad ? &n.grad : nullptr;
  }

  void propagate(int id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.op == OpKind::Leaf) return;
    const MatrixType& g = n.grad;
    const MatrixType& y = node_value(n);
    const int pa = n.parents[0];
    const int pb = n.parents[1];
    switch (n.op) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul: {
        if (auto* ga = grad_of(pa)) ga->noalias() += g * node_value(nodes_[pb]).transpose();
        if (auto* gb = grad_of(pb)) gb->noalias() += node_value(nodes_[pa]).transpose() * g;
        break;
      }
      case OpKind::MatMulTransposedRhs: {
        // y = a b^T
        if (auto* ga = grad_of(pa)) ga->noalias() += g * node_value(nodes_[pb]);
        if (auto* gb = grad_of(pb)) gb->noalias() += g.transpose() * node_value(nodes_[pa]);
        break;
      }
      case OpKind::Transpose:
        if (auto* ga = grad_of(pa)) *ga += g.transpose();
        break;
      case OpKind::Add:
        if (auto* ga = grad_of(pa)) *ga += g;
        if (auto* gb = grad_of(pb)) *gb += g;
        break;
      case OpKind::AddRowBroadcast:
        if (auto* ga = grad_of(pa)) *ga += g;
        if (auto* gb = grad_of(pb)) *gb += g.colwise().sum();
        break;
      case OpKind::Sub:
        if (auto* ga = grad_of(pa)) *ga += g;
        if (auto* gb = grad_of(pb)) *gb -= g;
        break;
      case OpKind::Mul:
        if (auto* ga = grad_of(pa)) *ga += g.cwiseProduct(node_value(nodes_[pb]));
        if (auto* gb = grad_of(pb)) *gb += g.cwiseProduct(node_value(nodes_[pa]));
        break;
      case OpKind::MulRowBroadcast: {
        const MatrixType& a = node_value(nodes_[pa]);
        const MatrixType& b = node_value(nodes_[pb]);
        if (auto* ga = grad_of(pa)) ga->array() += g.array().rowwise() * b.row(0).array();
        if (auto* gb = grad_of(pb)) *gb += g.cwiseProduct(a).colwise().sum();
        break;
      }
      case OpKind::Scale:
        if (auto* ga = grad_of(pa)) *ga += g * n.scalar;
        break;
      case OpKind::Tanh:
        if (auto* ga = grad_of(pa)) ga->array() += g.array() * (Scalar(1) - y.array().square());
        break;
      case OpKind::Sigmoid:
        if (auto* ga = grad_of(pa)) ga->array() += g.array() * y.array() * (Scalar(1) - y.array());
        break;
      case OpKind::Relu:
        if (auto* ga = grad_of(pa))
          ga->array() += (node_value(nodes_[pa]).array() > Scalar(0)).select(g.array(), Scalar(0));
        break;
      case OpKind::Exp:
        if (auto* ga = grad_of(pa)) ga->array() += g.array() * y.array();
        break;
      case OpKind::Log:
        if (auto* ga = grad_of(pa)) ga->array() += g.array() / node_value(nodes_[pa]).array();
        break;
      case OpKind::Softmax:
        if (auto* ga = grad_of(pa)) {
          for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const Scalar dot = g.row(r).dot(y.row(r));
            ga->row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
          }
        }
        break;
      case OpKind::LogSoftmax:
        if (auto* ga = grad_of(pa)) {
          for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const Scalar total = g.row(r).sum();
            ga->row(r).array() += g.row(r).array() - y.row(r).array().exp() * total;
          }
        }
        break;
      case OpKind::LayerNorm:
        if (auto* ga = grad_of(pa)) {
          const auto cols = static_cast<Scalar>(y.cols());
          for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const Scalar mean_g = g.row(r).sum() / cols;
            const Scalar mean_gy = g.row(r).dot(y.row(r)) / cols;
            ga->row(r).array() +=
                n.aux(r, 0) * (g.row(r).array() - mean_g - y.row(r).array() * mean_gy);
          }
        }
        break;
      case OpKind::ConcatCols: {
        Eigen::Index at = 0;
        for (int p : n.many) {
          const Eigen::Index w = node_value(nodes_[p]).cols();
          if (auto* gp = grad_of(p)) *gp += g.middleCols(at, w);
          at += w;
        }
        break;
      }
      case OpKind::ConcatRows: {
        Eigen::Index at = 0;
        for (int p : n.many) {
          const Eigen::Index h = node_value(nodes_[p]).rows();
          if (auto* gp = grad_of(p)) *gp += g.middleRows(at, h);
          at += h;
        }
        break;
      }
      case OpKind::SliceRows:
        if (auto* ga = grad_of(pa)) ga->middleRows(n.offset, g.rows()) += g;
        break;
      case OpKind::SliceCols:
        if (auto* ga = grad_of(pa)) ga->middleCols(n.offset, g.cols()) += g;
        break;
      case OpKind::Sum:
        if (auto* ga = grad_of(pa)) ga->array() += g(0, 0);
        break;
      case OpKind::Mean:
        if (auto* ga = grad_of(pa)) ga->array() += g(0, 0) / static_cast<Scalar>(ga->size());
        break;
      case OpKind::Gather:
        if (auto* ga = grad_of(pa)) {
          for (std::size_t r = 0; r < n.index.size(); ++r)
            (*ga)(static_cast<Eigen::Index>(r), n.index[r]) += g(static_cast<Eigen::Index>(r), 0);
        }
        break;
    }
  }

  std::vector<Node> nodes_;
};

using Graph = BasicGraph<float>;

// Expression-style free functions.

template <typename S> Var<S> matmul(Var<S> a, Var<S> b) { return a.graph->matmul(a, b); }
template <typename S> Var<S> matmul_transposed(Var<S> a, Var<S> b) { return a.graph->matmul_transposed(a, b); }
template <typename S> Var<S> transpose(Var<S> a) { return a.graph->transpose(a); }
template <typename S> Var<S> tanh(Var<S> a) { return a.graph->tanh(a); }
template <typename S> Var<S> sigmoid(Var<S> a) { return a.graph->sigmoid(a); }
template <typename S> Var<S> relu(Var<S> a) { return a.graph->relu(a); }
template <typename S> Var<S> exp(Var<S> a) { return a.graph->exp(a); }
template <typename S> Var<S> log(Var<S> a) { return a.graph->log(a); }
template <typename S> Var<S> softmax(Var<S> a) { return a.graph->softmax(a); }
template <typename S> Var<S> log_softmax(Var<S> a) { return a.graph->log_softmax(a); }
template <typename S> Var<S> layer_norm(Var<S> a) { return a.graph->layer_norm(a); }
template <typename S> Var<S> sum(Var<S> a) { return a.graph->sum(a); }
template <typename S> Var<S> mean(Var<S> a) { return a.graph->mean(a); }
template <typename S> Var<S> slice_rows(Var<S> a, Eigen::Index b, Eigen::Index n) { return a.graph->slice_rows(a, b, n); }
template <typename S> Var<S> slice_cols(Var<S> a, Eigen::Index b, Eigen::Index n) { return a.graph->slice_cols(a, b, n); }
template <typename S> Var<S> gather(Var<S> a, std::span<const int> idx) { return a.graph->gather(a, idx); }

template <typename S> Var<S> operator+(Var<S> a, Var<S> b) { return a.graph->add(a, b); }
template <typename S> Var<S> operator-(Var<S> a, Var<S> b) { return a.graph->sub(a, b); }
template <typename S> Var<S> operator*(Var<S> a, Var<S> b) { return a.graph->mul(a, b); }
template <typename S> Var<S> operator*(Var<S> a, S k) { return a.graph->scale(a, k); }
template <typename S> Var<S> operator-(Var<S> a) { return a.graph->scale(a, S(-1)); }

/// Embedding lookup expressed as a product of (possibly relaxed) one-hot rows
/// with the embedding matrix.
template <typename S> Var<S> embed(Var<S> one_hot_rows, Var<S> table) { return matmul(one_hot_rows, table); }

}  // namespace nmtadv

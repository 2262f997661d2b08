#pragma once

// Reverse-mode differentiation over a linear tape of matrix nodes.

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "platoon/nn/kernels.hpp"
#include "platoon/nn/params.hpp"

namespace platoon::nn {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  /// With `record == false` no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Mat value);
  /// Leaf bound to parameter `index` of `store`. Reused within one tape.
  Var param(const ParameterStore& store, int index);

  const Mat& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.ref ? *n.ref : n.value;
  }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  bool needs_grad(Var v) const { return record_ && nodes_[v.id].needs; }

  /// Seeds d(loss)=1 for a 1x1 node and runs every closure in reverse.
  void backward(Var loss);
  /// Adds leaf gradients of parameters from `store` into `grads`.
  void accumulate(const ParameterStore& store, std::vector<Mat>& grads) const;

  std::size_t size() const { return nodes_.size(); }

  // Internal: add a node whose backward is `fn` (called with the node's
  // grad). `fn` is dropped when none of `inputs` needs a gradient.
  Var push(Mat value, std::initializer_list<Var> inputs, std::function<void(Tape&, const Mat&)> fn);
  Var push(Mat value, const std::vector<Var>& inputs, std::function<void(Tape&, const Mat&)> fn);
  void add_grad(Var v, const Mat& g);
  void add_grad_block(Var v, Eigen::Index row, Eigen::Index col, const Mat& g);

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;  // parameter leaves alias the store
    Mat grad;
    bool needs = false;
    std::function<void(Tape&, const Mat&)> back;
    const ParameterStore* store = nullptr;
    int param = -1;
  };
  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::pair<const ParameterStore*, std::vector<int>>> leaves_;
};

// Linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// Adds a 1 x c row to every row of a.
Var add_row(Var a, Var row);
/// Multiplies row r of `a` by c(r, 0).
Var mul_col(Var a, Var c);

// Pointwise nonlinearities.
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var elu(Var a);
Var abs(Var a);
Var square(Var a);

/// Per-row standardization, eps inside the square root.
Var layer_norm(Var x, double eps = 1e-8);

/// Grouped attention; see attention_forward. `mask` may be empty.
Var attention(Var q, Var k, Var v, int groups, double scale, const Mat& mask = Mat());

// Shape plumbing.
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var select_rows(Var a, const std::vector<int>& rows);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);  // row-major order
/// Stacks `times` copies of a vertically.
Var tile_rows(Var a, int times);
/// Repeats each row `times` times in place.
Var repeat_rows(Var a, int times);
Var col_block(Var a, Eigen::Index col, Eigen::Index width);
Var row_block(Var a, Eigen::Index row, Eigen::Index height);

// Reductions and indexing.
Var sum(Var a);  // 1x1
Var row_sum(Var a);  // r x 1
/// Picks a(r, idx[r]) into an r x 1 column.
Var gather_cols(Var a, const std::vector<int>& idx);
/// Row r: out(r, :) = q(r, :) * reshape(w(r, :), n, m), with n = q.cols().
Var batched_vecmat(Var q, Var w, Eigen::Index m);

}  // namespace platoon::nn

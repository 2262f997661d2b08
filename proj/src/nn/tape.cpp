#include "platoon/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace platoon::nn {

const Mat& Var::value() const { return tape->value(*this); }

Var Tape::constant(Mat value) { return push(std::move(value), std::vector<Var>{}, nullptr); }

Var Tape::param(const ParameterStore& store, int index) {
  auto it = leaves_.begin();
  for (; it != leaves_.end(); ++it)
    if (it->first == &store) break;
  if (it == leaves_.end()) {
    leaves_.emplace_back(&store, std::vector<int>(store.size(), -1));
    it = leaves_.end() - 1;
  }
  int& slot = it->second.at(index);
  if (slot >= 0) return {this, slot};
  Node n;
  n.ref = &store.value(index);
  n.needs = record_;
  n.store = &store;
  n.param = index;
  nodes_.push_back(std::move(n));
  slot = static_cast<int>(nodes_.size()) - 1;
  return {this, slot};
}

Var Tape::push(Mat value, std::initializer_list<Var> inputs, std::function<void(Tape&, const Mat&)> fn) {
  return push(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::push(Mat value, const std::vector<Var>& inputs, std::function<void(Tape&, const Mat&)> fn) {
  if (!value.allFinite()) throw std::runtime_error("non-finite value produced on tape");
  Node n;
  n.value = std::move(value);
  if (record_)
    for (const auto& v : inputs)
      if (nodes_[v.id].needs) n.needs = true;
  if (n.needs) n.back = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::add_grad(Var v, const Mat& g) {
  Node& n = nodes_[v.id];
  if (!n.needs) return;
  if (n.grad.size() == 0) n.grad = g;
  else n.grad += g;
}

void Tape::add_grad_block(Var v, Eigen::Index row, Eigen::Index col, const Mat& g) {
  Node& n = nodes_[v.id];
  if (!n.needs) return;
  if (n.grad.size() == 0) {
    const Mat& val = n.ref ? *n.ref : n.value;
    n.grad = Mat::Zero(val.rows(), val.cols());
  }
  n.grad.block(row, col, g.rows(), g.cols()) += g;
}

void Tape::backward(Var loss) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  if (value(loss).size() != 1) throw std::invalid_argument("backward needs a scalar loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = Mat::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size()) n.back(*this, n.grad);
  }
}

void Tape::accumulate(const ParameterStore& store, std::vector<Mat>& grads) const {
  for (const auto& [st, ids] : leaves_) {
    if (st != &store) continue;
    for (std::size_t p = 0; p < ids.size(); ++p)
      if (ids[p] >= 0 && nodes_[ids[p]].grad.size()) grads[p] += nodes_[ids[p]].grad;
  }
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), op);
}

template <typename F, typename G>
Var pointwise(Var a, F f, G df) {
  Tape& t = *a.tape;
  Mat y = a.value().unaryExpr(f);
  return t.push(std::move(y), {a}, [a, df](Tape& t, const Mat& g) {
    t.add_grad(a, g.cwiseProduct(t.value(a).unaryExpr(df)));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  check_shape(a.cols() == b.rows(), "matmul inner dims");
  return a.tape->push(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.needs_grad(a)) t.add_grad(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.add_grad(b, t.value(a).transpose() * g);
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.add_grad(a, g);
    t.add_grad(b, g);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.add_grad(a, g);
    t.add_grad(b, -g);
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  return a.tape->push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.needs_grad(a)) t.add_grad(a, g.cwiseProduct(t.value(b)));
    if (t.needs_grad(b)) t.add_grad(b, g.cwiseProduct(t.value(a)));
  });
}

Var scale(Var a, double s) {
  return a.tape->push(a.value() * s, {a}, [a, s](Tape& t, const Mat& g) { t.add_grad(a, g * s); });
}

Var add_scalar(Var a, double s) {
  return a.tape->push(a.value().array() + s, {a}, [a](Tape& t, const Mat& g) { t.add_grad(a, g); });
}

Var add_row(Var a, Var row) {
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Mat y = a.value();
  y.rowwise() += row.value().row(0);
  return a.tape->push(std::move(y), {a, row}, [a, row](Tape& t, const Mat& g) {
    t.add_grad(a, g);
    if (t.needs_grad(row)) t.add_grad(row, g.colwise().sum());
  });
}

Var mul_col(Var a, Var c) {
  check_shape(c.cols() == 1 && c.rows() == a.rows(), "mul_col");
  Mat y = a.value().array().colwise() * c.value().col(0).array();
  return a.tape->push(std::move(y), {a, c}, [a, c](Tape& t, const Mat& g) {
    if (t.needs_grad(a)) t.add_grad(a, g.array().colwise() * t.value(c).col(0).array());
    if (t.needs_grad(c)) t.add_grad(c, g.cwiseProduct(t.value(a)).rowwise().sum());
  });
}

Var sigmoid(Var a) {
  return pointwise(a, [](double v) { return nn::sigmoid(v); },
                   [](double v) {
                     const double s = nn::sigmoid(v);
                     return s * (1.0 - s);
                   });
}

Var tanh(Var a) {
  return pointwise(a, [](double v) { return std::tanh(v); },
                   [](double v) {
                     const double s = std::tanh(v);
                     return 1.0 - s * s;
                   });
}

Var relu(Var a) {
  return pointwise(a, [](double v) { return v > 0.0 ? v : 0.0; },
                   [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return pointwise(a, [](double v) { return nn::elu(v); }, [](double v) { return nn::elu_grad(v); });
}

Var abs(Var a) {
  return pointwise(a, [](double v) { return std::abs(v); },
                   [](double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; });
}

Var square(Var a) {
  return pointwise(a, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var layer_norm(Var x, double eps) {
  auto cache = std::make_shared<LayerNormCache<double>>();
  Mat y = layer_norm_forward<double>(x.value(), eps, cache.get());
  return x.tape->push(std::move(y), {x}, [x, cache](Tape& t, const Mat& g) {
    t.add_grad(x, layer_norm_backward<double>(g, *cache));
  });
}

Var attention(Var q, Var k, Var v, int groups, double scale, const Mat& mask) {
  auto w = std::make_shared<Mat>();
  Mat y = attention_forward<double>(q.value(), k.value(), v.value(), groups, scale, mask, w.get());
  return q.tape->push(std::move(y), {q, k, v}, [q, k, v, w, groups, scale](Tape& t, const Mat& g) {
    auto d = attention_backward<double>(g, t.value(q), t.value(k), t.value(v), *w, groups, scale);
    t.add_grad(q, d.dQ);
    t.add_grad(k, d.dK);
    t.add_grad(v, d.dV);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check_shape(!parts.empty(), "concat_cols of nothing");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    check_shape(p.rows() == parts[0].rows(), "concat_cols rows");
    cols += p.cols();
  }
  Mat y(parts[0].rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts[0].tape->push(std::move(y), parts, [parts](Tape& t, const Mat& g) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      const Eigen::Index w = t.value(p).cols();
      if (t.needs_grad(p)) t.add_grad(p, g.middleCols(c, w));
      c += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  check_shape(!parts.empty(), "concat_rows of nothing");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    check_shape(p.cols() == parts[0].cols(), "concat_rows cols");
    rows += p.rows();
  }
  Mat y(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts[0].tape->push(std::move(y), parts, [parts](Tape& t, const Mat& g) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      const Eigen::Index h = t.value(p).rows();
      if (t.needs_grad(p)) t.add_grad(p, g.middleRows(r, h));
      r += h;
    }
  });
}

Var select_rows(Var a, const std::vector<int>& rows) {
  const Mat& av = a.value();
  Mat y(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_shape(rows[i] >= 0 && rows[i] < av.rows(), "select_rows index");
    y.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
  }
  return a.tape->push(std::move(y), {a}, [a, rows](Tape& t, const Mat& g) {
    Mat d = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    for (std::size_t i = 0; i < rows.size(); ++i) d.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    t.add_grad(a, d);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  check_shape(rows * cols == a.value().size(), "reshape size");
  Mat y = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return a.tape->push(std::move(y), {a}, [a, r0, c0](Tape& t, const Mat& g) {
    t.add_grad(a, Eigen::Map<const Mat>(g.data(), r0, c0));
  });
}

Var tile_rows(Var a, int times) {
  const Eigen::Index r = a.rows();
  Mat y(r * times, a.cols());
  for (int k = 0; k < times; ++k) y.middleRows(k * r, r) = a.value();
  return a.tape->push(std::move(y), {a}, [a, r, times](Tape& t, const Mat& g) {
    Mat d = g.topRows(r);
    for (int k = 1; k < times; ++k) d += g.middleRows(k * r, r);
    t.add_grad(a, d);
  });
}

Var repeat_rows(Var a, int times) {
  const Eigen::Index r = a.rows();
  Mat y(r * times, a.cols());
  for (Eigen::Index i = 0; i < r; ++i)
    for (int k = 0; k < times; ++k) y.row(i * times + k) = a.value().row(i);
  return a.tape->push(std::move(y), {a}, [a, r, times](Tape& t, const Mat& g) {
    Mat d = Mat::Zero(r, g.cols());
    for (Eigen::Index i = 0; i < r; ++i)
      for (int k = 0; k < times; ++k) d.row(i) += g.row(i * times + k);
    t.add_grad(a, d);
  });
}

Var col_block(Var a, Eigen::Index col, Eigen::Index width) {
  check_shape(col >= 0 && col + width <= a.cols(), "col_block range");
  Mat y = a.value().middleCols(col, width);
  return a.tape->push(std::move(y), {a}, [a, col](Tape& t, const Mat& g) {
    t.add_grad_block(a, 0, col, g);
  });
}

Var row_block(Var a, Eigen::Index row, Eigen::Index height) {
  check_shape(row >= 0 && row + height <= a.rows(), "row_block range");
  Mat y = a.value().middleRows(row, height);
  return a.tape->push(std::move(y), {a}, [a, row](Tape& t, const Mat& g) {
    t.add_grad_block(a, row, 0, g);
  });
}

Var sum(Var a) {
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, const Mat& g) {
    t.add_grad(a, Mat::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

Var row_sum(Var a) {
  Mat y = a.value().rowwise().sum();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, const Mat& g) {
    t.add_grad(a, g.col(0).replicate(1, t.value(a).cols()));
  });
}

Var gather_cols(Var a, const std::vector<int>& idx) {
  check_shape(static_cast<Eigen::Index>(idx.size()) == a.rows(), "gather_cols length");
  Mat y(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    check_shape(idx[r] >= 0 && idx[r] < a.cols(), "gather_cols index");
    y(r, 0) = a.value()(r, idx[r]);
  }
  return a.tape->push(std::move(y), {a}, [a, idx](Tape& t, const Mat& g) {
    Mat d = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, idx[r]) = g(r, 0);
    t.add_grad(a, d);
  });
}

Var batched_vecmat(Var q, Var w, Eigen::Index m) {
  const Eigen::Index n = q.cols();
  check_shape(w.rows() == q.rows() && w.cols() == n * m, "batched_vecmat shapes");
  Mat y(q.rows(), m);
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    Eigen::Map<const Mat> W(w.value().row(r).data(), n, m);
    y.row(r) = q.value().row(r) * W;
  }
  return q.tape->push(std::move(y), {q, w}, [q, w, n, m](Tape& t, const Mat& g) {
    const Mat& qv = t.value(q);
    const Mat& wv = t.value(w);
    Mat dq(qv.rows(), n), dw(wv.rows(), n * m);
    for (Eigen::Index r = 0; r < qv.rows(); ++r) {
      Eigen::Map<const Mat> W(wv.row(r).data(), n, m);
      dq.row(r) = g.row(r) * W.transpose();
      Eigen::Map<Mat> dW(dw.row(r).data(), n, m);
      dW = qv.row(r).transpose() * g.row(r);
    }
    if (t.needs_grad(q)) t.add_grad(q, dq);
    if (t.needs_grad(w)) t.add_grad(w, dw);
  });
}

}  // namespace platoon::nn

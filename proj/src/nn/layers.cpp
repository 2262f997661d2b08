#include "platoon/nn/layers.hpp"

namespace platoon::nn {

Linear Linear::create(ParameterStore& st, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.W = st.add(name + ".W", uniform_init(in, out, in, rng));
  l.b = st.add(name + ".b", uniform_init(1, out, in, rng));
  return l;
}

Var Linear::operator()(Tape& t, const ParameterStore& st, Var x) const {
  return add_row(matmul(x, t.param(st, W)), t.param(st, b));
}

LayerNorm LayerNorm::create(ParameterStore& st, const std::string& name, Eigen::Index width) {
  LayerNorm l;
  l.gamma = st.add(name + ".gamma", Mat::Ones(1, width));
  l.beta = st.add(name + ".beta", Mat::Zero(1, width));
  return l;
}

Var LayerNorm::operator()(Tape& t, const ParameterStore& st, Var x) const {
  Var y = layer_norm(x, eps);
  Var g = tile_rows(t.param(st, gamma), static_cast<int>(x.rows()));
  return add_row(mul(y, g), t.param(st, beta));
}

GruCell GruCell::create(ParameterStore& st, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  GruCell c;
  c.in = in;
  c.hidden = hidden;
  c.Wx = st.add(name + ".Wx", uniform_init(in, 3 * hidden, hidden, rng));
  c.bx = st.add(name + ".bx", uniform_init(1, 3 * hidden, hidden, rng));
  c.Wh = st.add(name + ".Wh", uniform_init(hidden, 3 * hidden, hidden, rng));
  c.bh = st.add(name + ".bh", uniform_init(1, 3 * hidden, hidden, rng));
  return c;
}

Var GruCell::operator()(Tape& t, const ParameterStore& st, Var x, Var h) const {
  const Eigen::Index H = hidden;
  Var gx = add_row(matmul(x, t.param(st, Wx)), t.param(st, bx));
  Var gh = add_row(matmul(h, t.param(st, Wh)), t.param(st, bh));
  Var r = sigmoid(add(col_block(gx, 0, H), col_block(gh, 0, H)));
  Var z = sigmoid(add(col_block(gx, H, H), col_block(gh, H, H)));
  Var n = tanh(add(col_block(gx, 2 * H, H), mul(r, col_block(gh, 2 * H, H))));
  // h' = (1 - z) n + z h = n + z (h - n)
  return add(n, mul(z, sub(h, n)));
}

}  // namespace platoon::nn

#pragma once

// Forward/backward kernels as free functions over row-major Eigen matrices.
// Rows are samples (or tokens), columns are features.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace platoon::nn {

template <typename S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Mat = MatT<double>;
using Vec = VecT<double>;

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

/// y = x W + b, with b a 1 x out row.
template <typename S>
MatT<S> dense_forward(const MatT<S>& x, const MatT<S>& W, const MatT<S>& b) {
  check_shape(x.cols() == W.rows(), "dense inner dims");
  check_shape(b.rows() == 1 && b.cols() == W.cols(), "dense bias");
  MatT<S> y = x * W;
  y.rowwise() += b.row(0);
  return y;
}

template <typename S>
struct DenseGrads {
  MatT<S> dx, dW, db;
};

template <typename S>
DenseGrads<S> dense_backward(const MatT<S>& dy, const MatT<S>& x, const MatT<S>& W) {
  return {dy * W.transpose(), x.transpose() * dy, dy.colwise().sum()};
}

template <typename S>
S sigmoid(S v) {
  return v >= S(0) ? S(1) / (S(1) + std::exp(-v)) : std::exp(v) / (S(1) + std::exp(v));
}

template <typename S>
S elu(S v) {
  return v > S(0) ? v : std::expm1(v);
}

template <typename S>
S elu_grad(S v) {
  return v > S(0) ? S(1) : std::exp(v);
}

/// Numerically stable row softmax with an optional additive mask.
template <typename S>
void softmax_rows_inplace(MatT<S>& a) {
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const S m = a.row(r).maxCoeff();
    a.row(r) = (a.row(r).array() - m).exp();
    a.row(r) /= a.row(r).sum();
  }
}

template <typename S>
struct LayerNormCache {
  MatT<S> xhat;
  VecT<S> rstd;
};

/// Per-row standardization (no affine part).
template <typename S>
MatT<S> layer_norm_forward(const MatT<S>& x, S eps, LayerNormCache<S>* cache) {
  const auto n = static_cast<S>(x.cols());
  VecT<S> mean = x.rowwise().sum() / n;
  MatT<S> xc = x.colwise() - mean;
  VecT<S> var = xc.array().square().rowwise().sum() / n;
  VecT<S> rstd = (var.array() + eps).rsqrt();
  MatT<S> y = xc.array().colwise() * rstd.array();
  if (cache) {
    cache->xhat = y;
    cache->rstd = rstd;
  }
  return y;
}

template <typename S>
MatT<S> layer_norm_backward(const MatT<S>& dy, const LayerNormCache<S>& c) {
  const auto n = static_cast<S>(dy.cols());
  VecT<S> mean_dy = dy.rowwise().sum() / n;
  VecT<S> mean_dyx = (dy.array() * c.xhat.array()).rowwise().sum() / n;
  MatT<S> t = dy.colwise() - mean_dy;
  t -= (c.xhat.array().colwise() * mean_dyx.array()).matrix();
  return t.array().colwise() * c.rstd.array();
}

/// Grouped scaled dot-product attention. Q has groups*nq rows, K and V have
/// groups*nk rows; each group attends only within itself. `mask`, when
/// non-empty, is groups*nq x nk and is added to the logits.
template <typename S>
MatT<S> attention_forward(const MatT<S>& Q, const MatT<S>& K, const MatT<S>& V, int groups, S scale,
                          const MatT<S>& mask, MatT<S>* weights) {
  check_shape(groups > 0 && Q.rows() % groups == 0 && K.rows() % groups == 0, "attention groups");
  check_shape(K.rows() == V.rows() && Q.cols() == K.cols(), "attention q/k/v");
  const Eigen::Index nq = Q.rows() / groups;
  const Eigen::Index nk = K.rows() / groups;
  check_shape(mask.size() == 0 || (mask.rows() == Q.rows() && mask.cols() == nk), "attention mask");
  MatT<S> W(Q.rows(), nk);
  MatT<S> O(Q.rows(), V.cols());
  for (int g = 0; g < groups; ++g) {
    MatT<S> logits = Q.middleRows(g * nq, nq) * K.middleRows(g * nk, nk).transpose() * scale;
    if (mask.size()) logits += mask.middleRows(g * nq, nq);
    softmax_rows_inplace(logits);
    O.middleRows(g * nq, nq) = logits * V.middleRows(g * nk, nk);
    W.middleRows(g * nq, nq) = logits;
  }
  if (weights) *weights = std::move(W);
  return O;
}

template <typename S>
struct AttentionGrads {
  MatT<S> dQ, dK, dV;
};

template <typename S>
AttentionGrads<S> attention_backward(const MatT<S>& dO, const MatT<S>& Q, const MatT<S>& K,
                                     const MatT<S>& V, const MatT<S>& weights, int groups, S scale) {
  const Eigen::Index nq = Q.rows() / groups;
  const Eigen::Index nk = K.rows() / groups;
  AttentionGrads<S> g{MatT<S>::Zero(Q.rows(), Q.cols()), MatT<S>::Zero(K.rows(), K.cols()),
                      MatT<S>::Zero(V.rows(), V.cols())};
  for (int b = 0; b < groups; ++b) {
    const auto A = weights.middleRows(b * nq, nq);
    const auto dOb = dO.middleRows(b * nq, nq);
    g.dV.middleRows(b * nk, nk) = A.transpose() * dOb;
    MatT<S> dA = dOb * V.middleRows(b * nk, nk).transpose();
    VecT<S> inner = (dA.array() * A.array()).rowwise().sum();
    MatT<S> dL = A.array() * (dA.colwise() - inner).array();
    g.dQ.middleRows(b * nq, nq) = dL * K.middleRows(b * nk, nk) * scale;
    g.dK.middleRows(b * nk, nk) = dL.transpose() * Q.middleRows(b * nq, nq) * scale;
  }
  return g;
}

/// Gated recurrent update with the conventional gate layout: the input and
/// hidden projections are [r | z | n] blocks of width H.
///   r = sigmoid(x Wr + h Ur + br),  z = sigmoid(x Wz + h Uz + bz)
///   n = tanh(x Wn + bn + r * (h Un + cn)),  h' = (1 - z) * n + z * h
template <typename S>
MatT<S> gru_forward(const MatT<S>& x, const MatT<S>& h, const MatT<S>& Wx, const MatT<S>& bx,
                    const MatT<S>& Wh, const MatT<S>& bh) {
  const Eigen::Index H = h.cols();
  check_shape(Wx.cols() == 3 * H && Wh.cols() == 3 * H && Wh.rows() == H, "gru weights");
  const MatT<S> gx = dense_forward(x, Wx, bx);
  const MatT<S> gh = dense_forward(h, Wh, bh);
  MatT<S> out(h.rows(), H);
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j < H; ++j) {
      const S r = sigmoid(gx(i, j) + gh(i, j));
      const S z = sigmoid(gx(i, H + j) + gh(i, H + j));
      const S n = std::tanh(gx(i, 2 * H + j) + r * gh(i, 2 * H + j));
      out(i, j) = (S(1) - z) * n + z * h(i, j);
    }
  return out;
}

}  // namespace platoon::nn

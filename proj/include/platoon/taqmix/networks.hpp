#pragma once

#include <string>
#include <vector>

#include "platoon/dynamics.hpp"
#include "platoon/nn/layers.hpp"

namespace platoon::taqmix {

using nn::Mat;
using nn::ParameterStore;
using nn::Tape;
using nn::Var;

struct NetConfig {
  int q = 5;  // observed partners; observations have 2q+3 entries
  int n_slots = 100;  // N_max
  int edge_dim = 0;  // alpha |E|
  int embed = 32;  // attention width d
  int gru = 64;
  int mix_embed = 32;
  int hyper = 64;
  bool use_tca = true;
  bool use_tsa = true;
  bool per_truck = false;  // one agent parameter set per slot
  bool mask_inactive_tokens = false;

  int obs_dim() const { return 2 * q + 3; }
  int state_dim() const { return edge_dim + n_slots; }
};

/// Agent network. Observation layout: (s', s_2, Z_delay, q x (rs_1, rs_2)).
/// With the cross-attention block the partner tokens query the truck's own
/// token; otherwise the observation enters one dense layer.
class AgentNet {
 public:
  AgentNet() = default;
  AgentNet(ParameterStore& st, const NetConfig& cfg, Rng& rng);

  const NetConfig& config() const { return cfg_; }
  int heads() const { return static_cast<int>(heads_.size()); }
  int head_of(int slot) const { return cfg_.per_truck ? slot : 0; }

  /// Pre-recurrent features for a block of observation rows.
  Var features(Tape& t, const ParameterStore& st, const Mat& obs, int head) const;
  Var recur(Tape& t, const ParameterStore& st, Var x, Var h, int head) const;
  Var q_values(Tape& t, const ParameterStore& st, Var h, int head) const;

  /// One decision for a single truck; returns the 4 Q-values and advances h.
  Eigen::Vector4d step(const ParameterStore& st, const Eigen::VectorXd& obs, Mat& hidden, int slot) const;

  /// Unrolls rows over time. `obs[t]` is rows x obs_dim and `active[t]` is a
  /// rows x 1 0/1 column (hidden state only advances where 1). `slots[r]` is
  /// the truck slot of row r. Returns (T * rows) x 4, time-major.
  Var unroll(Tape& t, const ParameterStore& st, const std::vector<Mat>& obs, const std::vector<Mat>& active,
             const std::vector<int>& slots) const;

 private:
  struct Head {
    int Wq = -1, Wk = -1, Wv = -1;
    nn::Linear post;  // FC after attention
    nn::LayerNorm ln;
    nn::Linear delay;
    nn::Linear in;  // into the recurrent cell
    nn::GruCell cell;
    nn::Linear out;
  };
  NetConfig cfg_;
  std::vector<Head> heads_;
};

/// Monotone mixer: Q_total from per-slot chosen values and the state.
///
/// The hypernetworks f11..f14 read S_edge. With the slot-attention block the
/// slot tokens (from S_co and a learned slot embedding) decide the attention
/// pattern, and the values carrying Q are lifted through |a|, so every path
/// from Q_i to Q_total has a non-negative gain.
class MixingNet {
 public:
  MixingNet() = default;
  MixingNet(ParameterStore& st, const NetConfig& cfg, Rng& rng);

  const NetConfig& config() const { return cfg_; }

  /// q: M x n_slots chosen values; state: M x state_dim; active: M x n_slots
  /// 0/1 flags (used only when inactive tokens are masked). Returns M x 1.
  Var total(Tape& t, const ParameterStore& st, Var q, const Mat& state, const Mat& active = Mat()) const;
  Var q_catt(Tape& t, const ParameterStore& st, Var q, const Mat& state, const Mat& active) const;

  // Hypernetwork heads, exposed for tests.
  nn::Linear f11, f12, f13, f14a, f14b;

 private:
  NetConfig cfg_;
  int lift = -1, lift_b = -1;  // |a| and bias lifting Q_i to width d
  int slot_embed = -1, co_embed = -1;  // N x d and 1 x d
  int Wq1 = -1, Wk1 = -1;
  int state_embed = -1, state_bias = -1;
  int Wq2 = -1, Wk2 = -1, Wv2 = -1;
  int r1 = -1, r2 = -1;  // d x 1 readouts; r1 enters through |.|
};

/// Greedy action over the feasible set; ties resolve Low < Medium < High < Wait.
int masked_argmax(const Eigen::Vector4d& q, const ActionMask& mask);
double masked_max(const Eigen::Vector4d& q, const ActionMask& mask);

}  // namespace platoon::taqmix

#pragma once

#include <string>

#include "platoon/nn/params.hpp"
#include "platoon/nn/tape.hpp"

namespace platoon::nn {

/// Affine map y = x W + b. Holds indices into a ParameterStore so the same
/// layer description runs against online and target stores alike.
struct Linear {
  int W = -1;
  int b = -1;
  Eigen::Index in = 0;
  Eigen::Index out = 0;

  static Linear create(ParameterStore& st, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  Var operator()(Tape& t, const ParameterStore& st, Var x) const;
};

/// Per-row normalization followed by a learned scale and shift.
struct LayerNorm {
  int gamma = -1;
  int beta = -1;
  double eps = 1e-8;

  static LayerNorm create(ParameterStore& st, const std::string& name, Eigen::Index width);
  Var operator()(Tape& t, const ParameterStore& st, Var x) const;
};

/// Gated recurrent cell; gate blocks are laid out [reset | update | candidate]
/// and the hidden-side bias sits inside the reset product for the candidate,
/// as in the usual cuDNN-compatible formulation.
struct GruCell {
  int Wx = -1, bx = -1, Wh = -1, bh = -1;
  Eigen::Index in = 0;
  Eigen::Index hidden = 0;

  static GruCell create(ParameterStore& st, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng);
  Var operator()(Tape& t, const ParameterStore& st, Var x, Var h) const;
};

}  // namespace platoon::nn

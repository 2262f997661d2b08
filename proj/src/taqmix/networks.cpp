#include "platoon/taqmix/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace platoon::taqmix {

using namespace nn;

AgentNet::AgentNet(ParameterStore& st, const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
  const int d = cfg.embed;
  const int n_heads = cfg.per_truck ? cfg.n_slots : 1;
  for (int k = 0; k < n_heads; ++k) {
    const std::string p = "agent" + std::to_string(k) + ".";
    Head h;
    if (cfg.use_tca) {
      h.Wq = st.add(p + "Wq", uniform_init(2, d, 2, rng));
      h.Wk = st.add(p + "Wk", uniform_init(2, d, 2, rng));
      h.Wv = st.add(p + "Wv", uniform_init(2, d, 2, rng));
      h.post = Linear::create(st, p + "post", d, d, rng);
      h.ln = LayerNorm::create(st, p + "ln", d);
      h.delay = Linear::create(st, p + "delay", 1, d, rng);
      h.in = Linear::create(st, p + "in", cfg.q * d + d, cfg.gru, rng);
    } else {
      h.in = Linear::create(st, p + "in", cfg.obs_dim(), cfg.gru, rng);
    }
    h.cell = GruCell::create(st, p + "gru", cfg.gru, cfg.gru, rng);
    h.out = Linear::create(st, p + "out", cfg.gru, kActionCount, rng);
    heads_.push_back(h);
  }
}

Var AgentNet::features(Tape& t, const ParameterStore& st, const Mat& obs, int head) const {
  check_shape(obs.cols() == cfg_.obs_dim(), "agent observation width");
  const Head& h = heads_.at(head);
  if (!cfg_.use_tca) return relu(h.in(t, st, t.constant(obs)));
  const Eigen::Index R = obs.rows();
  const int q = cfg_.q, d = cfg_.embed;
  Mat others_block = obs.middleCols(3, 2 * q);
  Mat others = Eigen::Map<const Mat>(others_block.data(), R * q, 2);
  Var self = t.constant(obs.leftCols(2));
  Var query = matmul(t.constant(std::move(others)), t.param(st, h.Wq));
  Var key = matmul(self, t.param(st, h.Wk));
  Var value = matmul(self, t.param(st, h.Wv));
  Var att = attention(query, key, value, static_cast<int>(R), 1.0 / std::sqrt(static_cast<double>(d)));
  Var s_att = h.ln(t, st, add(h.post(t, st, att), query));
  Var flat = reshape(s_att, R, static_cast<Eigen::Index>(q) * d);
  Var delay = relu(h.delay(t, st, t.constant(obs.col(2))));
  return relu(h.in(t, st, concat_cols({flat, delay})));
}

Var AgentNet::recur(Tape& t, const ParameterStore& st, Var x, Var h, int head) const {
  return heads_.at(head).cell(t, st, x, h);
}

Var AgentNet::q_values(Tape& t, const ParameterStore& st, Var h, int head) const {
  return heads_.at(head).out(t, st, h);
}

Eigen::Vector4d AgentNet::step(const ParameterStore& st, const Eigen::VectorXd& obs, Mat& hidden, int slot) const {
  if (hidden.size() == 0) hidden = Mat::Zero(1, cfg_.gru);
  const int k = head_of(slot);
  Tape t(false);
  Mat row = obs.transpose();
  Var h = recur(t, st, features(t, st, row, k), t.constant(hidden), k);
  hidden = h.value();
  const Mat q = q_values(t, st, h, k).value();
  return Eigen::Vector4d(q(0, 0), q(0, 1), q(0, 2), q(0, 3));
}

Var AgentNet::unroll(Tape& t, const ParameterStore& st, const std::vector<Mat>& obs,
                     const std::vector<Mat>& active, const std::vector<int>& slots) const {
  const int T = static_cast<int>(obs.size());
  check_shape(T > 0 && obs.size() == active.size(), "unroll lengths");
  const Eigen::Index rows = obs[0].rows();
  check_shape(static_cast<Eigen::Index>(slots.size()) == rows, "unroll slots");

  std::vector<std::vector<int>> members(heads_.size());
  for (Eigen::Index r = 0; r < rows; ++r) members.at(head_of(slots[r])).push_back(static_cast<int>(r));

  std::vector<Var> parts;
  std::vector<Eigen::Index> offset(heads_.size(), 0);
  Eigen::Index total = 0;
  for (int k = 0; k < heads(); ++k) {
    const auto& rk = members[k];
    offset[k] = total;
    if (rk.empty()) continue;
    const auto nk = static_cast<Eigen::Index>(rk.size());
    Mat ob(T * nk, cfg_.obs_dim());
    Mat act(T * nk, 1);
    for (int s = 0; s < T; ++s)
      for (Eigen::Index j = 0; j < nk; ++j) {
        ob.row(s * nk + j) = obs[s].row(rk[j]);
        act(s * nk + j, 0) = active[s](rk[j], 0);
      }
    Var x = features(t, st, ob, k);
    Var h = t.constant(Mat::Zero(nk, cfg_.gru));
    std::vector<Var> hs;
    for (int s = 0; s < T; ++s) {
      Var hn = recur(t, st, row_block(x, s * nk, nk), h, k);
      h = add(h, mul_col(sub(hn, h), t.constant(act.middleRows(s * nk, nk))));
      hs.push_back(h);
    }
    parts.push_back(q_values(t, st, concat_rows(hs), k));
    total += T * nk;
  }
  if (heads() == 1) return parts.front();

  std::vector<int> pos_in(rows);
  for (const auto& rk : members)
    for (std::size_t j = 0; j < rk.size(); ++j) pos_in[rk[j]] = static_cast<int>(j);
  std::vector<int> order(static_cast<std::size_t>(T * rows));
  for (int s = 0; s < T; ++s)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int k = head_of(slots[r]);
      const auto nk = static_cast<Eigen::Index>(members[k].size());
      order[s * rows + r] = static_cast<int>(offset[k] + s * nk + pos_in[r]);
    }
  return select_rows(concat_rows(parts), order);
}

MixingNet::MixingNet(ParameterStore& st, const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.edge_dim <= 0) throw std::invalid_argument("mixing network needs a positive edge encoding width");
  const int N = cfg.n_slots, m = cfg.mix_embed, d = cfg.embed;
  f11 = Linear::create(st, "mix.f11", cfg.edge_dim, static_cast<Eigen::Index>(N) * m, rng);
  f12 = Linear::create(st, "mix.f12", cfg.edge_dim, m, rng);
  f13 = Linear::create(st, "mix.f13", cfg.edge_dim, m, rng);
  f14a = Linear::create(st, "mix.f14a", cfg.edge_dim, cfg.hyper, rng);
  f14b = Linear::create(st, "mix.f14b", cfg.hyper, 1, rng);
  if (!cfg.use_tsa) return;
  lift = st.add("mix.lift", uniform_init(1, d, 1, rng));
  lift_b = st.add("mix.lift_b", uniform_init(1, d, 1, rng));
  slot_embed = st.add("mix.slot", uniform_init(N, d, 1, rng));
  co_embed = st.add("mix.co", uniform_init(1, d, 1, rng));
  Wq1 = st.add("mix.Wq1", uniform_init(d, d, d, rng));
  Wk1 = st.add("mix.Wk1", uniform_init(d, d, d, rng));
  state_embed = st.add("mix.state", uniform_init(1, d, 1, rng));
  state_bias = st.add("mix.state_b", uniform_init(1, d, 1, rng));
  Wq2 = st.add("mix.Wq2", uniform_init(d, d, d, rng));
  Wk2 = st.add("mix.Wk2", uniform_init(d, d, d, rng));
  Wv2 = st.add("mix.Wv2", uniform_init(d, d, d, rng));
  r1 = st.add("mix.r1", uniform_init(d, 1, d, rng));
  r2 = st.add("mix.r2", uniform_init(d, 1, d, rng));
}

Var MixingNet::q_catt(Tape& t, const ParameterStore& st, Var q, const Mat& state, const Mat& active) const {
  const Eigen::Index M = q.rows(), N = cfg_.n_slots;
  const double sc = 1.0 / std::sqrt(static_cast<double>(cfg_.embed));
  Mat co = state.rightCols(N);
  Var co_col = t.constant(Eigen::Map<const Mat>(co.data(), M * N, 1));
  Var tokens = add(matmul(co_col, t.param(st, co_embed)), tile_rows(t.param(st, slot_embed), static_cast<int>(M)));
  Var values = add_row(matmul(reshape(q, M * N, 1), abs(t.param(st, lift))), t.param(st, lift_b));
  Mat mask;
  if (cfg_.mask_inactive_tokens) {
    check_shape(active.rows() == M && active.cols() == N, "mixing active flags");
    mask = Mat::Zero(M * N, N);
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index k = 0; k < N; ++k)
        if (active(m, k) == 0.0) mask.col(k).segment(m * N, N).setConstant(-1e9);
  }
  Var self_att = attention(matmul(tokens, t.param(st, Wq1)), matmul(tokens, t.param(st, Wk1)), values,
                           static_cast<int>(M), sc, mask);
  Var coop = add_row(matmul(co_col, t.param(st, state_embed)), t.param(st, state_bias));
  Var state_att = attention(matmul(tokens, t.param(st, Wq2)), matmul(coop, t.param(st, Wk2)),
                            matmul(coop, t.param(st, Wv2)), static_cast<int>(M), sc);
  Var gain = reshape(matmul(self_att, abs(t.param(st, r1))), M, N);
  Var shift = reshape(matmul(state_att, t.param(st, r2)), M, N);
  return add(q, add(gain, shift));
}

Var MixingNet::total(Tape& t, const ParameterStore& st, Var q, const Mat& state, const Mat& active) const {
  check_shape(q.cols() == cfg_.n_slots, "mixing input width");
  check_shape(state.rows() == q.rows() && state.cols() == cfg_.state_dim(), "mixing state shape");
  Var edges = t.constant(state.leftCols(cfg_.edge_dim));
  Var qc = cfg_.use_tsa ? q_catt(t, st, q, state, active) : q;
  Var W1 = abs(f11(t, st, edges));
  Var hidden = elu(add(batched_vecmat(qc, W1, cfg_.mix_embed), f12(t, st, edges)));
  Var W2 = abs(f13(t, st, edges));
  Var B2 = f14b(t, st, relu(f14a(t, st, edges)));
  return add(row_sum(mul(hidden, W2)), B2);
}

int masked_argmax(const Eigen::Vector4d& q, const ActionMask& mask) {
  int best = -1;
  for (int a = 0; a < kActionCount; ++a)
    if (mask[a] && (best < 0 || q[a] > q[best])) best = a;
  if (best < 0) throw std::invalid_argument("no feasible action");
  return best;
}

double masked_max(const Eigen::Vector4d& q, const ActionMask& mask) { return q[masked_argmax(q, mask)]; }

}  // namespace platoon::taqmix

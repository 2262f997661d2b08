#include "platoon/taqmix/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace platoon::taqmix {

using namespace nn;
using json = nlohmann::json;

Model::Model(const NetConfig& c, std::uint64_t init_seed) : cfg(c) {
  Rng rng(init_seed);
  agent = AgentNet(params, cfg, rng);
  mixer = MixingNet(params, cfg, rng);
}

NetConfig net_config_for(const NetworkGraph& g, const SimParams& p, bool use_tca, bool use_tsa) {
  NetConfig c;
  c.q = p.observed_partners;
  c.n_slots = p.max_trucks;
  c.edge_dim = p.segments_per_edge * g.edge_count();
  c.use_tca = use_tca;
  c.use_tsa = use_tsa;
  return c;
}

// ---------------------------------------------------------------- replay --

bool EpisodeData::operator==(const EpisodeData& o) const {
  auto same = [](const std::vector<Mat>& a, const std::vector<Mat>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols() ||
          std::memcmp(a[i].data(), b[i].data(), sizeof(double) * a[i].size()) != 0)
        return false;
    return true;
  };
  return same(obs, o.obs) && same(masks, o.masks) && same(active, o.active) && same(state, o.state) &&
         actions == o.actions &&
         rewards.size() == o.rewards.size() &&
         std::memcmp(rewards.data(), o.rewards.data(), sizeof(double) * rewards.size()) == 0;
}

void ReplayBuffer::push(EpisodeData ep) {
  if (capacity_ <= 0) return;
  if (static_cast<int>(eps_.size()) == capacity_) eps_.pop_front();
  eps_.push_back(std::move(ep));
}

std::vector<const EpisodeData*> ReplayBuffer::sample(int batch, Rng& rng) const {
  std::vector<int> idx(eps_.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int n = std::min(batch, size());
  // partial Fisher-Yates
  for (int i = 0; i < n; ++i) std::swap(idx[i], idx[uniform_int(rng, i, size() - 1)]);
  std::vector<const EpisodeData*> out;
  for (int i = 0; i < n; ++i) out.push_back(&eps_[idx[i]]);
  return out;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("replay: truncated data");
  return v;
}

void put_mats(std::ostream& os, const std::vector<Mat>& ms) {
  put<std::uint64_t>(os, ms.size());
  for (const auto& m : ms) {
    put<std::uint64_t>(os, m.rows());
    put<std::uint64_t>(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
}

std::vector<Mat> get_mats(std::istream& is) {
  std::vector<Mat> ms(get<std::uint64_t>(is));
  for (auto& m : ms) {
    const auto r = get<std::uint64_t>(is);
    const auto c = get<std::uint64_t>(is);
    m.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw std::runtime_error("replay: truncated matrix");
  }
  return ms;
}

constexpr char kReplayMagic[8] = {'P', 'L', 'T', 'N', 'R', 'P', 'L', 'Y'};

}  // namespace

std::string ReplayBuffer::serialize() const {
  std::ostringstream os(std::ios::binary);
  os.write(kReplayMagic, sizeof(kReplayMagic));
  put<std::int32_t>(os, capacity_);
  put<std::uint64_t>(os, eps_.size());
  for (const auto& e : eps_) {
    put_mats(os, e.obs);
    put_mats(os, e.masks);
    put_mats(os, e.active);
    put_mats(os, e.state);
    put<std::uint64_t>(os, e.actions.size());
    for (const auto& a : e.actions) {
      put<std::uint64_t>(os, a.size());
      for (int v : a) put<std::int32_t>(os, v);
    }
    put<std::uint64_t>(os, e.rewards.size());
    for (double r : e.rewards) put<double>(os, r);
  }
  return os.str();
}

ReplayBuffer ReplayBuffer::deserialize(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kReplayMagic, sizeof(magic)) != 0) throw std::runtime_error("not a replay buffer");
  ReplayBuffer rb(get<std::int32_t>(is));
  const auto n = get<std::uint64_t>(is);
  for (std::uint64_t k = 0; k < n; ++k) {
    EpisodeData e;
    e.obs = get_mats(is);
    e.masks = get_mats(is);
    e.active = get_mats(is);
    e.state = get_mats(is);
    e.actions.resize(get<std::uint64_t>(is));
    for (auto& a : e.actions) {
      a.resize(get<std::uint64_t>(is));
      for (int& v : a) v = get<std::int32_t>(is);
    }
    e.rewards.resize(get<std::uint64_t>(is));
    for (double& r : e.rewards) r = get<double>(is);
    rb.eps_.push_back(std::move(e));
  }
  return rb;
}

// ---------------------------------------------------------------- policy --

int select_action(const Eigen::Vector4d& q, const ActionMask& mask, double eps, Rng& rng) {
  if (eps > 0.0 && uniform01(rng) < eps) {
    std::vector<int> feas;
    for (int a = 0; a < kActionCount; ++a)
      if (mask[a]) feas.push_back(a);
    if (feas.empty()) throw std::invalid_argument("no feasible action");
    return feas[uniform_int(rng, 0, static_cast<int>(feas.size()) - 1)];
  }
  return masked_argmax(q, mask);
}

double epsilon_at(long env_steps, double eps_start, double eps_min, double decay) {
  return std::max(eps_min, eps_start - decay * static_cast<double>(env_steps));
}

namespace {

Mat padding_obs_row(int q) {
  Mat row = Mat::Zero(1, 2 * q + 3);
  row(0, 0) = 3.0;
  for (int k = 0; k < q; ++k) row(0, 3 + 2 * k) = 3.0;
  return row;
}

Mat mask_row(const ActionMask& m) {
  Mat r(1, kActionCount);
  for (int a = 0; a < kActionCount; ++a) r(0, a) = m[a] ? 1.0 : 0.0;
  return r;
}

ActionMask mask_from_row(const Mat& m, Eigen::Index r) {
  ActionMask out{};
  for (int a = 0; a < kActionCount; ++a) out[a] = m(r, a) != 0.0;
  return out;
}

}  // namespace

LossTerms td_loss(Tape& t, const Model& m, const ParameterStore& online, const ParameterStore& target,
                  const std::vector<const EpisodeData*>& batch, double gamma, double reward_scale) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int B = static_cast<int>(batch.size());
  const int N = m.cfg.n_slots;
  int T = 0, Nb = 0;
  for (const auto* e : batch) {
    T = std::max(T, e->steps());
    Nb = std::max(Nb, e->trucks());
  }
  if (Nb > N) throw std::invalid_argument("episode has more trucks than mixer slots");
  const int rows = B * Nb;
  const Mat pad = padding_obs_row(m.cfg.q);
  const Mat noop = mask_row(kNoopMask);

  std::vector<Mat> obs(T + 1), act(T + 1), mask(T + 1), state(T + 1), flags(T + 1);
  Mat exists = Mat::Zero(T * B, Nb);
  for (int s = 0; s <= T; ++s) {
    obs[s].resize(rows, m.cfg.obs_dim());
    act[s] = Mat::Zero(rows, 1);
    mask[s].resize(rows, kActionCount);
    state[s].resize(B, m.cfg.state_dim());
    flags[s] = Mat::Zero(B, N);
    for (int b = 0; b < B; ++b) {
      const auto& e = *batch[b];
      const int se = std::min(s, e.steps());
      state[s].row(b) = e.state[se].row(0);
      for (int n = 0; n < Nb; ++n) {
        const int r = b * Nb + n;
        if (n < e.trucks() && s <= e.steps()) {
          obs[s].row(r) = e.obs[s].row(n);
          act[s](r, 0) = e.active[s](n, 0);
          mask[s].row(r) = e.masks[s].row(n);
          flags[s](b, n) = e.active[s](n, 0);
          if (s < T) exists(s * B + b, n) = 1.0;
        } else {
          obs[s].row(r) = pad;
          mask[s].row(r) = noop;
        }
      }
    }
  }
  std::vector<int> slots(rows);
  for (int r = 0; r < rows; ++r) slots[r] = r % Nb;

  auto stack = [&](const std::vector<Mat>& parts, int from, int count) {
    Mat out(static_cast<Eigen::Index>(count) * parts[0].rows(), parts[0].cols());
    for (int k = 0; k < count; ++k) out.middleRows(k * parts[0].rows(), parts[0].rows()) = parts[from + k];
    return out;
  };
  const Mat states_now = stack(state, 0, T), states_next = stack(state, 1, T);
  const Mat flags_now = stack(flags, 0, T), flags_next = stack(flags, 1, T);

  // Online chosen values.
  std::vector<Mat> obs_now(obs.begin(), obs.begin() + T), act_now(act.begin(), act.begin() + T);
  Var q_all = m.agent.unroll(t, online, obs_now, act_now, slots);
  std::vector<int> chosen_idx(static_cast<std::size_t>(T) * rows);
  for (int s = 0; s < T; ++s)
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < Nb; ++n) {
        const auto& e = *batch[b];
        const bool live = n < e.trucks() && s < e.steps();
        chosen_idx[static_cast<std::size_t>(s) * rows + b * Nb + n] = live ? e.actions[s][n] : 1;
      }
  Var chosen = reshape(gather_cols(q_all, chosen_idx), static_cast<Eigen::Index>(T) * B, Nb);
  chosen = mul(chosen, t.constant(exists));
  if (Nb < N) chosen = concat_cols({chosen, t.constant(Mat::Zero(static_cast<Eigen::Index>(T) * B, N - Nb))});
  Var q_tot = m.mixer.total(t, online, chosen, states_now, flags_now);

  // Bootstrapped targets.
  Mat y(static_cast<Eigen::Index>(T) * B, 1), valid = Mat::Zero(static_cast<Eigen::Index>(T) * B, 1);
  {
    Tape tt(false);
    const Mat q_next_all = m.agent.unroll(tt, target, obs, act, slots).value();
    Mat q_next = Mat::Zero(static_cast<Eigen::Index>(T) * B, N);
    for (int s = 1; s <= T; ++s)
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < Nb; ++n) {
          const int r = b * Nb + n;
          if (exists((s - 1) * B + b, n) == 0.0) continue;
          const Eigen::Vector4d qv = q_next_all.row(static_cast<Eigen::Index>(s) * rows + r).transpose();
          q_next((s - 1) * B + b, n) = masked_max(qv, mask_from_row(mask[s], r));
        }
    const Mat q_tot_next = m.mixer.total(tt, target, tt.constant(q_next), states_next, flags_next).value();
    for (int s = 0; s < T; ++s)
      for (int b = 0; b < B; ++b) {
        const auto& e = *batch[b];
        const Eigen::Index i = static_cast<Eigen::Index>(s) * B + b;
        if (s >= e.steps()) {
          y(i, 0) = 0.0;
          continue;
        }
        valid(i, 0) = 1.0;
        const bool terminal = s == e.steps() - 1;
        y(i, 0) = reward_scale * e.rewards[s] + (terminal ? 0.0 : gamma * q_tot_next(i, 0));
      }
  }
  Var err = mul(sub(q_tot, t.constant(y)), t.constant(valid));
  LossTerms out;
  out.loss = sum(square(err));
  out.q_total = Eigen::Map<const Mat>(q_tot.value().data(), T, B);
  out.target = Eigen::Map<const Mat>(y.data(), T, B);
  out.valid = Eigen::Map<const Mat>(valid.data(), T, B);
  return out;
}

// -------------------------------------------------------------- executor --

Executor::Executor(const Model& m, const ParameterStore& params, int trucks)
    : m_(&m), p_(&params), hidden_(trucks), last_q_(trucks, Eigen::Vector4d::Zero()) {
  if (m.cfg.per_truck && trucks > m.cfg.n_slots) throw std::invalid_argument("more trucks than agent heads");
}

std::vector<SpeedAction> Executor::act(const Env& env, double eps, Rng* rng, std::vector<double>* latency_s) {
  std::vector<SpeedAction> out(env.trucks(), SpeedAction::Medium);
  for (int i = 0; i < env.trucks(); ++i) {
    if (!env.world().active(i)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::VectorXd obs = env.observation_of(i);
    const Eigen::Vector4d q = m_->agent.step(*p_, obs, hidden_[i], i);
    const ActionMask mask = feasible_actions(env.scenario(), env.world(), i);
    const int a = (rng && eps > 0.0) ? select_action(q, mask, eps, *rng) : masked_argmax(q, mask);
    if (latency_s) latency_s->push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    last_q_[i] = q;
    out[i] = action_from_index(a);
  }
  return out;
}

void record_step(const Env& env, EpisodeData& ep) {
  const int n = env.trucks();
  Mat obs(n, 2 * env.scenario().params.observed_partners + 3), masks(n, kActionCount), active(n, 1);
  for (int i = 0; i < n; ++i) {
    obs.row(i) = env.observation_of(i).transpose();
    masks.row(i) = mask_row(feasible_actions(env.scenario(), env.world(), i));
    active(i, 0) = env.world().active(i) ? 1.0 : 0.0;
  }
  ep.obs.push_back(std::move(obs));
  ep.masks.push_back(std::move(masks));
  ep.active.push_back(std::move(active));
  ep.state.push_back(env.state().transpose());
}

namespace {

std::vector<int> to_ints(const std::vector<SpeedAction>& a) {
  std::vector<int> out;
  for (auto x : a) out.push_back(action_index(x));
  return out;
}

double error_rate(double reward, double fv) {
  if (fv == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(reward - fv) / std::abs(fv);
}

}  // namespace

ExecResult execute_policy(const Model& m, const ParameterStore& params, const NetworkGraph& g, const MissionSet& ms,
                          const SimParams& p, bool noise, std::uint64_t seed) {
  if (p.observed_partners != m.cfg.q || p.max_trucks != m.cfg.n_slots ||
      p.segments_per_edge * g.edge_count() != m.cfg.edge_dim)
    throw std::invalid_argument("policy dimensions do not match the scenario");
  ExecResult res;
  Env env(g, ms, p, noise, seed);
  Executor ex(m, params, env.trucks());
  while (!env.done()) {
    int active = 0;
    for (int i = 0; i < env.trucks(); ++i) active += env.world().active(i);
    const std::size_t first = res.latency_s.size();
    auto acts = ex.act(env, 0.0, nullptr, &res.latency_s);
    double slowest = 0.0;
    for (std::size_t k = first; k < res.latency_s.size(); ++k) slowest = std::max(slowest, res.latency_s[k]);
    res.decision_epochs.emplace_back(active, slowest);
    res.actions.push_back(to_ints(acts));
    env.step(acts);
  }
  res.trajectory = env.trajectory();
  res.metrics = episode_metrics(res.trajectory, ms, p);
  res.total_reward = env.total_reward();
  res.error_rate = error_rate(res.total_reward, res.metrics.F_v);
  return res;
}

// --------------------------------------------------------------- trainer --

TrainerState init_trainer(const NetConfig& cfg, const TrainConfig& tc) {
  TrainerState s;
  s.model = Model(cfg, stream_seed(tc.seed, Stream::Init));
  s.target = s.model.params;
  s.best = s.model.params;
  s.opt = RmsProp(s.model.params, tc.optim);
  return s;
}

std::pair<double, double> evaluate_greedy(const Model& m, const ParameterStore& params,
                                          const std::vector<TrainingMission>& missions, const SimParams& p,
                                          bool noise, std::uint64_t seed) {
  double reward = 0.0, fv = 0.0;
  for (std::size_t k = 0; k < missions.size(); ++k) {
    const auto r = execute_policy(m, params, *missions[k].graph, *missions[k].missions, p, noise,
                                  stream_seed(seed, Stream::Noise, 1000000 + k));
    reward += r.total_reward;
    fv += r.metrics.F_v;
  }
  const double n = static_cast<double>(std::max<std::size_t>(missions.size(), 1));
  return {reward / n, fv / n};
}

std::vector<CurveRow> train(TrainerState& st, const std::vector<TrainingMission>& missions, const SimParams& p,
                            const TrainConfig& tc, const std::function<void(const CurveRow&)>& on_eval) {
  if (missions.empty()) throw std::invalid_argument("no training missions");
  if (tc.batch <= 0 || tc.target_period <= 0 || tc.eval_every <= 0) throw std::invalid_argument("bad train config");
  ReplayBuffer buffer(tc.buffer);
  std::vector<CurveRow> curve;
  const int M = static_cast<int>(missions.size());
  double last_loss = std::numeric_limits<double>::quiet_NaN();

  auto mission_for = [&](int epoch) {
    if (!tc.shuffle_missions) return epoch % M;
    std::vector<int> perm(M);
    std::iota(perm.begin(), perm.end(), 0);
    Rng r(stream_seed(tc.seed, Stream::Replay, 1u << 30 | static_cast<unsigned>(epoch / M)));
    for (int i = M - 1; i > 0; --i) std::swap(perm[i], perm[uniform_int(r, 0, i)]);
    return perm[epoch % M];
  };

  for (int e = st.epoch; e < tc.epochs; ++e) {
    const auto& tm = missions[mission_for(e)];
    Rng explore(stream_seed(tc.seed, Stream::Exploration, static_cast<std::uint64_t>(e)));
    Env env(*tm.graph, *tm.missions, p, tc.noise, stream_seed(tc.seed, Stream::Noise, static_cast<std::uint64_t>(e)));
    Executor ex(st.model, st.model.params, env.trucks());
    EpisodeData ep;
    while (!env.done()) {
      record_step(env, ep);
      const double eps = epsilon_at(st.env_steps, tc.eps_start, tc.eps_min, tc.eps_decay);
      const auto acts = ex.act(env, eps, &explore);
      ep.actions.push_back(to_ints(acts));
      ep.rewards.push_back(env.step(acts).team_reward);
      ++st.env_steps;
    }
    record_step(env, ep);
    buffer.push(std::move(ep));

    if (buffer.size() >= std::min(tc.batch, tc.buffer)) {
      Rng sampler(stream_seed(tc.seed, Stream::Replay, static_cast<std::uint64_t>(e)));
      const auto batch = buffer.sample(tc.batch, sampler);
      Tape tape;
      auto terms = td_loss(tape, st.model, st.model.params, st.target, batch, tc.gamma, tc.reward_scale);
      last_loss = terms.loss.value()(0, 0);
      if (!std::isfinite(last_loss)) throw std::runtime_error("training diverged: non-finite loss");
      tape.backward(terms.loss);
      auto grads = st.model.params.zeros_like();
      tape.accumulate(st.model.params, grads);
      st.opt.step(st.model.params, grads);
      ++st.updates;
      if (st.updates % tc.target_period == 0) st.target = st.model.params;
    }
    st.epoch = e + 1;

    if (st.epoch % tc.eval_every == 0) {
      const auto [reward, fv] = evaluate_greedy(st.model, st.model.params, missions, p, tc.noise, tc.seed);
      CurveRow row{st.epoch, last_loss, reward, fv, epsilon_at(st.env_steps, tc.eps_start, tc.eps_min, tc.eps_decay)};
      if (reward > st.best_eval) {
        st.best_eval = reward;
        st.best = st.model.params;
      }
      curve.push_back(row);
      if (on_eval) on_eval(row);
    }
  }
  return curve;
}

// ------------------------------------------------------------ checkpoint --

namespace {

json env_header(const SimParams& p, const NetConfig& c) {
  return {{"q", c.q},
          {"alpha", p.segments_per_edge},
          {"n_max", c.n_slots},
          {"edge_dim", c.edge_dim},
          {"actions", {"low", "medium", "high", "wait"}},
          {"dt_min", p.dt_min},
          {"speeds_kmh", {p.v_low, p.v_medium, p.v_high}},
          {"km_scale", kKmScale},
          {"delay_budget_rate", p.delay_budget_rate},
          {"t_avgtotal_min", p.t_avgtotal_min},
          {"w_fuel", p.w_fuel},
          {"w_delay", p.w_delay}};
}

}  // namespace

void save_policy(const std::string& path, const TrainerState& st, const SimParams& p, const TrainConfig& tc,
                 bool best) {
  const auto& c = st.model.cfg;
  json h;
  h["kind"] = "platoon-policy";
  h["env"] = env_header(p, c);
  h["net"] = {{"embed", c.embed}, {"gru", c.gru}, {"mix_embed", c.mix_embed}, {"hyper", c.hyper},
              {"use_tca", c.use_tca}, {"use_tsa", c.use_tsa}, {"per_truck", c.per_truck},
              {"mask_inactive_tokens", c.mask_inactive_tokens}};
  h["trainer"] = {{"env_steps", st.env_steps}, {"epoch", st.epoch}, {"updates", st.updates},
                  {"best_eval", st.best_eval}, {"seed", tc.seed}, {"lr", tc.optim.lr},
                  {"alpha", tc.optim.alpha}, {"eps", tc.optim.eps}, {"clip_norm", tc.optim.clip_norm},
                  {"reward_scale", tc.reward_scale}};
  h["weights"] = best ? "best" : "final";
  Checkpoint ck;
  ck.header_json = h.dump();
  ck.params = best ? st.best : st.model.params;
  ParameterStore sq;
  for (int i = 0; i < st.model.params.size(); ++i) sq.add(st.model.params.name(i), st.opt.square_avg().at(i));
  ck.extra = {st.target, sq, st.best};
  save_checkpoint(path, ck);
}

TrainerState load_policy(const std::string& path, const SimParams& p, const NetworkGraph& g) {
  Checkpoint ck = load_checkpoint(path);
  const json h = json::parse(ck.header_json);
  if (h.value("kind", "") != "platoon-policy") throw std::runtime_error("'" + path + "' is not a policy checkpoint");
  const auto& env = h.at("env");
  NetConfig c;
  c.q = env.at("q");
  c.n_slots = env.at("n_max");
  c.edge_dim = env.at("edge_dim");
  const auto& net = h.at("net");
  c.embed = net.at("embed");
  c.gru = net.at("gru");
  c.mix_embed = net.at("mix_embed");
  c.hyper = net.at("hyper");
  c.use_tca = net.at("use_tca");
  c.use_tsa = net.at("use_tsa");
  c.per_truck = net.at("per_truck");
  c.mask_inactive_tokens = net.at("mask_inactive_tokens");
  if (c.q != p.observed_partners || c.n_slots != p.max_trucks || env.at("alpha").get<int>() != p.segments_per_edge ||
      c.edge_dim != p.segments_per_edge * g.edge_count())
    throw std::runtime_error("checkpoint is incompatible with the scenario (q, alpha, N_max or edge count differ)");
  TrainerState st;
  st.model = Model(c, 0);
  if (!st.model.params.same_layout(ck.params)) throw std::runtime_error("checkpoint parameter layout mismatch");
  st.model.params = ck.params;
  const auto& tr = h.at("trainer");
  RmsPropConfig oc;
  oc.lr = tr.at("lr");
  oc.alpha = tr.at("alpha");
  oc.eps = tr.at("eps");
  oc.clip_norm = tr.at("clip_norm");
  st.opt = RmsProp(st.model.params, oc);
  st.target = st.model.params;
  st.best = st.model.params;
  if (ck.extra.size() == 3) {
    st.target = ck.extra[0];
    for (int i = 0; i < ck.extra[1].size(); ++i) st.opt.square_avg().at(i) = ck.extra[1].value(i);
    st.best = ck.extra[2];
  }
  st.env_steps = tr.at("env_steps");
  st.epoch = tr.at("epoch");
  st.updates = tr.at("updates");
  st.best_eval = tr.at("best_eval");
  return st;
}

}  // namespace platoon::taqmix

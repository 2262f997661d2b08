#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "platoon/env.hpp"
#include "platoon/nn/params.hpp"
#include "platoon/taqmix/networks.hpp"

namespace platoon::taqmix {

/// Agent and mixer sharing one parameter store.
struct Model {
  NetConfig cfg;
  ParameterStore params;
  AgentNet agent;
  MixingNet mixer;

  Model() = default;
  Model(const NetConfig& cfg, std::uint64_t init_seed);
};

/// Network dimensions implied by a scenario and method flags.
NetConfig net_config_for(const NetworkGraph& g, const SimParams& p, bool use_tca, bool use_tsa);

/// One stored episode. Step t runs from 0 to steps(); per-step arrays of
/// length steps()+1 include the observation after the last transition.
struct EpisodeData {
  std::vector<Mat> obs;  // trucks x obs_dim
  std::vector<Mat> masks;  // trucks x 4, 0/1
  std::vector<Mat> active;  // trucks x 1, 0/1
  std::vector<Mat> state;  // 1 x state_dim
  std::vector<std::vector<int>> actions;  // steps() rows
  std::vector<double> rewards;  // team reward per step

  int steps() const { return static_cast<int>(actions.size()); }
  int trucks() const { return obs.empty() ? 0 : static_cast<int>(obs.front().rows()); }
  bool operator==(const EpisodeData& o) const;
};

/// Ring buffer of whole episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 100) : capacity_(capacity) {}

  void push(EpisodeData ep);
  int size() const { return static_cast<int>(eps_.size()); }
  int capacity() const { return capacity_; }
  const EpisodeData& at(int i) const { return eps_.at(i); }

  /// Uniform without replacement; returns min(batch, size()) episodes.
  std::vector<const EpisodeData*> sample(int batch, Rng& rng) const;

  std::string serialize() const;
  static ReplayBuffer deserialize(const std::string& bytes);

 private:
  int capacity_;
  std::deque<EpisodeData> eps_;
};

/// With probability eps a uniform feasible action, otherwise the greedy one.
int select_action(const Eigen::Vector4d& q, const ActionMask& mask, double eps, Rng& rng);

/// max(eps_min, eps_start - decay * env_steps).
double epsilon_at(long env_steps, double eps_start = 1.0, double eps_min = 0.05, double decay = 0.00019);

struct LossTerms {
  Var loss;
  Mat q_total;  // T x B, online
  Mat target;  // T x B, r + gamma Q'
  Mat valid;  // T x B, 1 where the transition exists
};

/// Sum over episodes and steps of (r + gamma Q'_total(t+1) - Q_total(t))^2,
/// with Q' from `target` and zero bootstrap at the last transition. Rewards
/// are multiplied by `reward_scale`, which leaves the greedy policy unchanged.
LossTerms td_loss(Tape& t, const Model& m, const ParameterStore& online, const ParameterStore& target,
                  const std::vector<const EpisodeData*>& batch, double gamma, double reward_scale = 1.0);

/// Decentralized per-truck decision loop. Keeps one hidden state per truck.
class Executor {
 public:
  Executor(const Model& m, const ParameterStore& params, int trucks);

  /// Actions for every truck at the env's current step. Inactive trucks get
  /// Medium (ignored by the dynamics) and keep their hidden state.
  std::vector<SpeedAction> act(const Env& env, double eps, Rng* rng, std::vector<double>* latency_s = nullptr);

  /// Q-values of the last decision per truck (zero before any).
  const std::vector<Eigen::Vector4d>& last_q() const { return last_q_; }

 private:
  const Model* m_;
  const ParameterStore* p_;
  std::vector<Mat> hidden_;
  std::vector<Eigen::Vector4d> last_q_;
};

/// Records (obs, masks, active, state) of the env's current step into `ep`.
void record_step(const Env& env, EpisodeData& ep);

struct ExecResult {
  Trajectory trajectory;
  Metrics metrics;
  double total_reward = 0.0;
  double error_rate = 0.0;  // |R - F_v| / |F_v|, NaN when F_v = 0
  std::vector<double> latency_s;  // one per truck decision
  // (active trucks, slowest single-truck decision). Trucks decide in parallel,
  // so this is the wall time of one distributed decision epoch.
  std::vector<std::pair<int, double>> decision_epochs;
  std::vector<std::vector<int>> actions;
};

/// Greedy distributed execution of a trained agent network.
ExecResult execute_policy(const Model& m, const ParameterStore& params, const NetworkGraph& g,
                          const MissionSet& ms, const SimParams& p, bool noise, std::uint64_t seed);

struct TrainConfig {
  int epochs = 4000;
  int batch = 16;
  int buffer = 100;
  double gamma = 0.99;
  double reward_scale = 1.0;  // TD targets use reward_scale * r
  nn::RmsPropConfig optim;
  int target_period = 50;  // C, in optimizer steps
  double eps_start = 1.0;
  double eps_min = 0.05;
  double eps_decay = 0.00019;  // per environment step
  int eval_every = 40;
  std::uint64_t seed = 1;
  bool shuffle_missions = false;
  bool noise = true;
};

struct CurveRow {
  int epoch = 0;
  double loss = 0.0;
  double eval_reward = 0.0;
  double eval_F_v = 0.0;
  double epsilon = 0.0;
};

struct TrainingMission {
  const NetworkGraph* graph = nullptr;
  const MissionSet* missions = nullptr;
};

/// Resumable learner state.
struct TrainerState {
  Model model;
  ParameterStore target;
  nn::RmsProp opt;
  ParameterStore best;
  double best_eval = -1e300;
  long env_steps = 0;
  int epoch = 0;
  int updates = 0;
};

TrainerState init_trainer(const NetConfig& cfg, const TrainConfig& tc);

/// Runs epochs [state.epoch, tc.epochs). `on_eval` sees each curve row.
std::vector<CurveRow> train(TrainerState& state, const std::vector<TrainingMission>& missions, const SimParams& p,
                            const TrainConfig& tc, const std::function<void(const CurveRow&)>& on_eval = {});

/// Mean greedy reward and F_v over the missions with fixed evaluation seeds.
std::pair<double, double> evaluate_greedy(const Model& m, const ParameterStore& params,
                                          const std::vector<TrainingMission>& missions, const SimParams& p,
                                          bool noise, std::uint64_t seed);

/// Checkpoint with a compatibility header (q, alpha, N_max, actions, constants).
void save_policy(const std::string& path, const TrainerState& st, const SimParams& p, const TrainConfig& tc, bool best);
/// Loads a checkpoint into a fresh trainer state; throws when the header does
/// not match `p` or the parameter layout.
TrainerState load_policy(const std::string& path, const SimParams& p, const NetworkGraph& g);

}  // namespace platoon::taqmix

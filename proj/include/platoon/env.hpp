#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "platoon/dynamics.hpp"
#include "platoon/objectives.hpp"

namespace platoon {

/// Who talks to whom at one instant. Arrays are per truck; -1 marks inactive
/// trucks or a missing next-next hub.
struct CommView {
  std::vector<int> comm_hub;  // h_i
  std::vector<int> next_hub;  // m_{i,1}
  std::vector<int> edge;  // travelled edge, -1 at a hub
  std::vector<int> hub;  // hub index, -1 on an edge
};

CommView communication_view(const Scenario& sc, const WorldState& w);

/// Trucks sharing the communication hub (excluding i).
std::vector<int> communication_set(const CommView& v, int truck);
/// Potential platoon partners of a truck; empty for inactive trucks.
std::vector<int> potential_partners(const CommView& v, int truck);

/// Observation before normalization.
struct RawObservation {
  int category = 3;  // s': 0 hub, 1 solo on edge, 2 co-located on edge, 3 inactive
  double remaining_km = 0.0;
  double delay_budget_min = 0.0;  // Z_delay
  std::vector<std::pair<int, double>> others;  // (rs_1, rs_2), sorted, at most q
};

/// `past_speed_sum_kmh` is the sum of speeds the truck applied since departure.
RawObservation raw_observation(const Scenario& sc, const WorldState& w, const CommView& v, int truck,
                               double past_speed_sum_kmh, int past_steps);

/// Network input of length 2q+3: (s', s_2/100, Z_delay/(K_d normal), then q
/// partner pairs with rs_2/100; padding (3, 0)).
Eigen::VectorXd observation_vector(const RawObservation& obs, const Mission& m, const SimParams& p);

inline constexpr double kKmScale = 100.0;

/// Segment index j in [1, alpha] for a remaining distance on an edge of length L.
int edge_segment(double remaining_km, double length_km, int alpha);

/// S = (S_edge, S_co): alpha|E| segment counts followed by N_max flags.
Eigen::VectorXd encode_state(const Scenario& sc, const WorldState& w);

struct StepOutcome {
  std::vector<double> rewards;  // per truck
  std::vector<double> fuel_rewards;
  std::vector<double> time_rewards;
  std::vector<double> ending_rewards;
  double team_reward = 0.0;
  bool done = false;
};

/// One episode of the Dec-POMDP. Rewards normalize time by t_avgtotal.
class Env {
 public:
  Env(const NetworkGraph& graph, const MissionSet& missions, SimParams params, bool noise,
      std::uint64_t episode_seed);

  void reset(std::uint64_t episode_seed);

  const Scenario& scenario() const { return sc_; }
  const WorldState& world() const { return world_; }
  int trucks() const { return sc_.trucks(); }
  bool done() const { return done_; }
  std::uint64_t seed() const { return noise_.episode_seed; }

  std::vector<ActionMask> masks() const;
  std::vector<RawObservation> raw_observations() const;
  /// N x (2q+3), one row per truck slot.
  Eigen::MatrixXd observations() const;
  RawObservation raw_observation_of(int truck) const;
  Eigen::VectorXd observation_of(int truck) const;
  Eigen::VectorXd state() const { return encode_state(sc_, world_); }

  StepOutcome step(const std::vector<SpeedAction>& actions);

  const Trajectory& trajectory() const { return traj_; }
  double total_reward() const { return total_reward_; }

 private:
  void finish_timeouts(StepOutcome& out);

  Scenario sc_;
  NoiseModel noise_;
  WorldState world_;
  bool done_ = false;
  std::vector<int> prev_omega_;
  std::vector<double> speed_sum_;
  std::vector<int> steps_taken_;
  Trajectory traj_;
  double total_reward_ = 0.0;
};

/// Replayable description of one episode.
struct EpisodeRecord {
  std::string mission_ref;
  std::uint64_t seed = 0;
  bool noise = true;
  std::vector<std::vector<int>> actions;  // per step, per truck
  std::vector<double> team_rewards;
  std::uint64_t encoding_hash = 0;
};

/// FNV-1a over the raw bytes of a vector, chained from `h`.
std::uint64_t hash_doubles(const Eigen::VectorXd& v, std::uint64_t h);
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;

std::string episode_to_json(const EpisodeRecord& rec);
EpisodeRecord episode_from_json(const std::string& doc);

/// Re-runs an episode; returns the encoding hash seen along the way.
std::uint64_t replay_episode(const EpisodeRecord& rec, const NetworkGraph& graph,
                             const MissionSet& missions, const SimParams& params,
                             std::vector<double>* team_rewards = nullptr);

}  // namespace platoon

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/network.hpp"
#include "platoon/params.hpp"

namespace platoon {

class DynamicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discrete speed choice. The integer value is also the action index used by
/// the learners; ties between equal Q-values resolve in this order.
enum class SpeedAction : int { Low = 0, Medium = 1, High = 2, Wait = 3 };
inline constexpr int kActionCount = 4;

using ActionMask = std::array<bool, kActionCount>;

double speed_of(SpeedAction a, const SimParams& p);
const char* action_name(SpeedAction a);
inline int action_index(SpeedAction a) { return static_cast<int>(a); }
inline SpeedAction action_from_index(int i) { return static_cast<SpeedAction>(i); }
inline constexpr ActionMask kNoopMask{false, true, false, false};

enum class Phase : std::uint8_t { NotDeparted, Active, Arrived };

/// Per-truck state. At a hub (on_edge == false) the truck sits at
/// route.hubs[route_pos] and remaining_km is the full length of
/// route.edges[route_pos]; on an edge it travels route.edges[route_pos].
struct TruckState {
  Phase phase = Phase::NotDeparted;
  int route_pos = 0;
  bool on_edge = false;
  double remaining_km = 0.0;
  double speed_kmh = 0.0;  // speed applied in the most recent step
  std::vector<int> hub_waits;  // per route hub
  int arrival_step = -1;
};

/// Everything the world evolution needs besides the mutable state.
struct Scenario {
  const NetworkGraph* graph = nullptr;
  const MissionSet* missions = nullptr;
  SimParams params;

  int trucks() const { return missions->size(); }
  const Mission& mission(int i) const { return missions->missions[i]; }
};

struct WorldState {
  int t = 1;
  std::vector<TruckState> trucks;
  // Equivalence classes; -1 for inactive trucks. Ids are the smallest member index.
  std::vector<int> position_group;  // same location and remaining distance
  std::vector<int> platoon_group;  // same position and same nonzero current speed
  std::vector<int> position_group_size;
  std::vector<int> platoon_group_size;

  int size() const { return static_cast<int>(trucks.size()); }
  bool active(int i) const { return trucks[i].phase == Phase::Active; }
  bool all_arrived() const;
};

/// World at t = 1 with trucks departing at step 1 placed at their origin hub.
WorldState initial_world(const Scenario& sc);

/// Recomputes the position/platoon partitions after manual state edits.
WorldState regroup(const Scenario& sc, WorldState w);

/// Current edge of a truck: the edge it travels, or the outgoing route edge
/// when it waits at a hub. -1 when inactive.
int current_edge(const Scenario& sc, const WorldState& w, int truck);
/// Hub index the truck sits at, -1 when on an edge or inactive.
int current_hub(const Scenario& sc, const WorldState& w, int truck);
bool same_position(const WorldState& w, const Scenario& sc, int a, int b);

ActionMask feasible_actions(const Scenario& sc, const WorldState& w, int truck);

struct PlatoonView {
  std::vector<int> omega;  // same position and same nonzero speed, excluding self
  std::vector<int> colocated;  // same position, excluding self
};
PlatoonView platoon_of(const Scenario& sc, const WorldState& w, int truck);

struct RendezvousGroup {
  enum class Kind { MSet, CatchUp, SlowDown } kind = Kind::MSet;
  int edge = -1;
  std::vector<int> members;  // ascending
  int anchor = -1;
  double target_km = 0.0;  // anchor remaining minus anchor step, before noise
};

/// Groups for the chosen actions. `arriving` marks trucks that reach their
/// next hub this step; they never rendezvous. Empty means "compute with zero
/// noise".
std::vector<RendezvousGroup> rendezvous_groups(const Scenario& sc, const WorldState& w,
                                               const std::vector<SpeedAction>& actions,
                                               const std::vector<bool>& arriving = {});

struct NoiseModel {
  double sigma_km = 0.0;
  std::uint64_t episode_seed = 0;

  /// Truncated (+-3 sigma) draw for a motion group at step t.
  double draw(int t, int group_id) const;
};

/// What happened to one active truck during step t -> t+1.
struct TruckStepLog {
  int t = 0;
  int truck = 0;
  bool on_edge = false;
  int edge = -1;  // travelled edge, or outgoing edge at a hub
  int hub = -1;  // hub index when at a hub
  double remaining_km = 0.0;
  SpeedAction action = SpeedAction::Medium;
  int group = -1;  // motion group (same position and speed) at step t
  int omega_size = 0;
  double noise_km = 0.0;
  double moved_km = 0.0;
  bool arrived_final = false;
};

struct StepResult {
  WorldState next;
  std::vector<TruckStepLog> log;  // active trucks only, ascending truck index
  std::vector<RendezvousGroup> rendezvous;
};

/// One transition. Actions for inactive trucks are ignored; an infeasible
/// action for an active truck throws DynamicsError.
StepResult step_world(const Scenario& sc, const WorldState& w, const std::vector<SpeedAction>& actions,
                      const NoiseModel& noise);

/// Line-delimited JSON trajectory records.
std::string log_line(const TruckStepLog& rec, const Scenario& sc);
TruckStepLog parse_log_line(const std::string& line);

}  // namespace platoon

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/params.hpp"

namespace platoon {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hub {
  int id = 0;
  std::string name;
  double x = 0.0;
  double y = 0.0;
  double weight = 1.0;
  int block = 0;
};

/// Directed edge between internal hub indices.
struct Edge {
  int from = 0;
  int to = 0;
  double length_km = 0.0;
};

/// Edge as written in a network document: endpoints are hub ids.
struct EdgeSpec {
  int from_id = 0;
  int to_id = 0;
  double length_km = 0.0;
};

/// Hubs and directed edges. Immutable once built; all lookups are by
/// internal index (position in hubs()).
class NetworkGraph {
 public:
  NetworkGraph() = default;

  /// Validates ids, endpoints, self-loops, duplicates and the minimum edge
  /// length L > v_h * dt. Throws NetworkError.
  static NetworkGraph build(std::vector<Hub> hubs, const std::vector<EdgeSpec>& edges,
                            const SimParams& params);

  const std::vector<Hub>& hubs() const { return hubs_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int hub_count() const { return static_cast<int>(hubs_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  /// Internal index for a hub id; throws NetworkError when unknown.
  int hub_index(int hub_id) const;
  std::optional<int> find_hub(int hub_id) const;
  std::optional<int> find_edge(int from, int to) const;
  const std::vector<int>& out_edges(int hub) const { return out_edges_[hub]; }

  double mean_edge_length() const;

 private:
  std::vector<Hub> hubs_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_edges_;
  std::vector<std::pair<int, int>> id_to_index_;  // sorted by id
};

/// A fixed path through the graph. Hubs and edges are internal indices.
struct Route {
  std::vector<int> hubs;
  std::vector<int> edges;
  std::vector<double> edge_km;  // edge_km[k] = L(hubs[k], hubs[k+1])
  std::vector<double> cumulative_km;  // cumulative_km[k] = distance from hubs[0] to hubs[k]

  int hub_count() const { return static_cast<int>(hubs.size()); }
  double total_km() const { return cumulative_km.empty() ? 0.0 : cumulative_km.back(); }
};

/// Builds a route from a hub sequence, checking every consecutive pair is an
/// edge and that there are at least two hubs.
Route make_route(const NetworkGraph& graph, const std::vector<int>& hub_indices);

struct Mission {
  int truck_id = 0;
  Route route;
  int depart_step = 1;
  int normal_arrival_step = 1;

  int normal_travel_steps() const { return normal_arrival_step - depart_step; }
};

struct MissionSet {
  std::vector<Mission> missions;
  double t_total_min = 0.0;  // sum of normal travel times of this set

  int size() const { return static_cast<int>(missions.size()); }
};

/// d + sum over edges of ceil(L / (v_m dt)).
int normal_arrival_time(const Route& route, int depart_step, const SimParams& params);

/// Recomputes normal arrivals and t_total; validates the horizon.
MissionSet make_mission_set(std::vector<Mission> missions, const SimParams& params);

/// Minimum-length directed path; equal-length ties go to the lexicographically
/// smaller hub-id sequence. When block >= 0 only hubs of that block are used.
Route shortest_route(const NetworkGraph& graph, int origin, int destination, int block = -1);

struct MissionGenConfig {
  int trucks = 100;
  int block = -1;  // -1: whole network
  int depart_first_step = 1;
  int depart_last_step = 90;
  int max_retries = 1000;
};

/// Start/end hubs drawn proportional to hub weight, departures uniform over
/// the window. Deterministic for a fixed seed.
MissionSet generate_missions(const NetworkGraph& graph, const MissionGenConfig& config,
                             std::uint64_t seed, const SimParams& params);

// Documents. Both formats are JSON with self-describing keys.
NetworkGraph load_network(const std::string& document, const SimParams& params);
NetworkGraph load_network_file(const std::string& path, const SimParams& params);
std::string network_to_json(const NetworkGraph& graph);

MissionSet load_missions(const std::string& document, const NetworkGraph& graph,
                         const SimParams& params);
MissionSet load_missions_file(const std::string& path, const NetworkGraph& graph,
                              const SimParams& params);
std::string missions_to_json(const MissionSet& set, const NetworkGraph& graph);

struct SyntheticNetworkConfig {
  int hubs = 41;
  int blocks = 12;
  int directed_edges = 202;
  double mean_length_km = 140.95;
};

/// Clustered planar network with bidirectional edges, blocks internally
/// connected, edge lengths rescaled to the requested mean.
NetworkGraph synthesize_network(const SyntheticNetworkConfig& config, std::uint64_t seed,
                                const SimParams& params);

}  // namespace platoon

#pragma once

#include <memory>
#include <vector>

#include "platoon/dynamics.hpp"
#include "platoon/network.hpp"

namespace fixtures {

using namespace platoon;

/// Hubs 0..n-1 in a line with the given edge lengths, both directions.
inline NetworkGraph line_graph(const std::vector<double>& lengths, const SimParams& p = {}) {
  std::vector<Hub> hubs;
  for (int i = 0; i <= static_cast<int>(lengths.size()); ++i) {
    Hub h;
    h.id = i;
    h.name = "H" + std::to_string(i);
    h.x = i;
    hubs.push_back(h);
  }
  std::vector<EdgeSpec> edges;
  for (int i = 0; i < static_cast<int>(lengths.size()); ++i) {
    edges.push_back({i, i + 1, lengths[i]});
    edges.push_back({i + 1, i, lengths[i]});
  }
  return NetworkGraph::build(hubs, edges, p);
}

/// Owns graph + missions so a Scenario can point into it.
struct World {
  NetworkGraph graph;
  MissionSet missions;
  SimParams params;

  Scenario scenario() const { return Scenario{&graph, &missions, params}; }
};

struct TruckSpec {
  std::vector<int> hubs;
  int depart = 1;
};

inline std::unique_ptr<World> make_world(NetworkGraph g, const std::vector<TruckSpec>& trucks,
                                         SimParams p = {}) {
  auto w = std::make_unique<World>();
  w->graph = std::move(g);
  w->params = p;
  std::vector<Mission> ms;
  for (int i = 0; i < static_cast<int>(trucks.size()); ++i) {
    Mission m;
    m.truck_id = i;
    m.route = make_route(w->graph, trucks[i].hubs);
    m.depart_step = trucks[i].depart;
    ms.push_back(m);
  }
  w->missions = make_mission_set(std::move(ms), p);
  return w;
}

/// Places every truck on the first edge of its route with the given remaining
/// distance and last speed.
inline WorldState place_on_edge(const Scenario& sc, const std::vector<double>& remaining,
                                const std::vector<double>& speeds) {
  WorldState w = initial_world(sc);
  for (int i = 0; i < w.size(); ++i) {
    auto& s = w.trucks[i];
    s.phase = Phase::Active;
    s.route_pos = 0;
    s.on_edge = true;
    s.remaining_km = remaining[i];
    s.speed_kmh = speeds[i];
  }
  return regroup(sc, w);
}

}  // namespace fixtures

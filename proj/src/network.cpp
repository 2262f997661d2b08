#include "platoon/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "platoon/rng.hpp"

namespace platoon {

using nlohmann::json;

NetworkGraph NetworkGraph::build(std::vector<Hub> hubs, const std::vector<EdgeSpec>& edges,
                                 const SimParams& params) {
  NetworkGraph g;
  g.hubs_ = std::move(hubs);
  for (int i = 0; i < g.hub_count(); ++i) g.id_to_index_.emplace_back(g.hubs_[i].id, i);
  std::sort(g.id_to_index_.begin(), g.id_to_index_.end());
  for (std::size_t i = 1; i < g.id_to_index_.size(); ++i) {
    if (g.id_to_index_[i].first == g.id_to_index_[i - 1].first)
      throw NetworkError("duplicate hub id " + std::to_string(g.id_to_index_[i].first));
  }

  const double min_len = params.step_km(params.v_high);
  g.out_edges_.assign(g.hubs_.size(), {});
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    auto from = g.find_hub(e.from_id);
    auto to = g.find_hub(e.to_id);
    if (!from || !to)
      throw NetworkError("edge " + std::to_string(e.from_id) + "->" + std::to_string(e.to_id) +
                         " references an unknown hub");
    if (*from == *to) throw NetworkError("self-loop at hub " + std::to_string(e.from_id));
    if (!seen.insert({*from, *to}).second)
      throw NetworkError("duplicate edge " + std::to_string(e.from_id) + "->" +
                         std::to_string(e.to_id));
    if (!(e.length_km > min_len)) {
      std::ostringstream msg;
      msg << "edge too short: " << e.from_id << "->" << e.to_id << " has " << e.length_km
          << " km, must exceed " << min_len << " km (one high-speed step)";
      throw NetworkError(msg.str());
    }
    g.out_edges_[*from].push_back(g.edge_count());
    g.edges_.push_back({*from, *to, e.length_km});
  }
  return g;
}

std::optional<int> NetworkGraph::find_hub(int hub_id) const {
  auto it = std::lower_bound(id_to_index_.begin(), id_to_index_.end(),
                             std::make_pair(hub_id, std::numeric_limits<int>::min()));
  if (it == id_to_index_.end() || it->first != hub_id) return std::nullopt;
  return it->second;
}

int NetworkGraph::hub_index(int hub_id) const {
  auto idx = find_hub(hub_id);
  if (!idx) throw NetworkError("unknown hub id " + std::to_string(hub_id));
  return *idx;
}

std::optional<int> NetworkGraph::find_edge(int from, int to) const {
  for (int e : out_edges_.at(from))
    if (edges_[e].to == to) return e;
  return std::nullopt;
}

double NetworkGraph::mean_edge_length() const {
  if (edges_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : edges_) sum += e.length_km;
  return sum / static_cast<double>(edges_.size());
}

Route make_route(const NetworkGraph& graph, const std::vector<int>& hub_indices) {
  if (hub_indices.size() < 2) throw NetworkError("route needs at least two hubs");
  Route r;
  r.hubs = hub_indices;
  r.cumulative_km.push_back(0.0);
  for (std::size_t k = 0; k + 1 < hub_indices.size(); ++k) {
    auto e = graph.find_edge(hub_indices[k], hub_indices[k + 1]);
    if (!e)
      throw NetworkError("route hubs " + std::to_string(graph.hubs()[hub_indices[k]].id) + " and " +
                         std::to_string(graph.hubs()[hub_indices[k + 1]].id) +
                         " are not connected");
    r.edges.push_back(*e);
    r.edge_km.push_back(graph.edges()[*e].length_km);
    r.cumulative_km.push_back(r.cumulative_km.back() + graph.edges()[*e].length_km);
  }
  return r;
}

int normal_arrival_time(const Route& route, int depart_step, const SimParams& params) {
  const double per_step = params.step_km(params.v_medium);
  int steps = 0;
  for (double len : route.edge_km) steps += static_cast<int>(std::ceil(len / per_step));
  return depart_step + steps;
}

namespace {

double mission_total(const std::vector<Mission>& ms, const SimParams& params) {
  double total = 0.0;
  for (const auto& m : ms) total += m.normal_travel_steps() * params.dt_min;
  return total;
}

}  // namespace

MissionSet make_mission_set(std::vector<Mission> missions, const SimParams& params) {
  MissionSet set;
  for (auto& m : missions) {
    if (m.depart_step < 1 || m.depart_step > params.horizon_steps)
      throw NetworkError("departure step " + std::to_string(m.depart_step) + " of truck " +
                         std::to_string(m.truck_id) + " outside [1, T_e]");
    if (m.normal_arrival_step <= m.depart_step)
      m.normal_arrival_step = normal_arrival_time(m.route, m.depart_step, params);
    if (m.normal_arrival_step > params.horizon_steps)
      throw NetworkError("truck " + std::to_string(m.truck_id) +
                         " cannot arrive within the horizon at normal speed");
  }
  set.missions = std::move(missions);
  set.t_total_min = mission_total(set.missions, params);
  return set;
}

Route shortest_route(const NetworkGraph& graph, int origin, int destination, int block) {
  const int n = graph.hub_count();
  if (origin < 0 || origin >= n || destination < 0 || destination >= n)
    throw NetworkError("route endpoint outside the graph");
  if (origin == destination) throw NetworkError("origin equals destination");
  const auto& hubs = graph.hubs();
  auto allowed = [&](int h) { return block < 0 || hubs[h].block == block; };
  if (!allowed(origin) || !allowed(destination))
    throw NetworkError("route endpoint outside the requested block");

  // Label = (distance, hub-id path). Positive lengths make prefix extension
  // order preserving, so label setting on this pair is exact.
  constexpr double kTieTol = 1e-9;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::vector<int>> path_ids(n), path_idx(n);
  std::vector<bool> done(n, false);
  dist[origin] = 0.0;
  path_ids[origin] = {hubs[origin].id};
  path_idx[origin] = {origin};

  auto better = [&](double d1, const std::vector<int>& p1, double d2, const std::vector<int>& p2) {
    if (d1 < d2 - kTieTol) return true;
    if (d1 > d2 + kTieTol) return false;
    return std::lexicographical_compare(p1.begin(), p1.end(), p2.begin(), p2.end());
  };

  for (;;) {
    int u = -1;
    for (int v = 0; v < n; ++v) {
      if (done[v] || dist[v] == inf) continue;
      if (u < 0 || better(dist[v], path_ids[v], dist[u], path_ids[u])) u = v;
    }
    if (u < 0 || u == destination) break;
    done[u] = true;
    for (int e : graph.out_edges(u)) {
      const int v = graph.edges()[e].to;
      if (done[v] || !allowed(v)) continue;
      const double nd = dist[u] + graph.edges()[e].length_km;
      auto cand = path_ids[u];
      cand.push_back(hubs[v].id);
      if (dist[v] == inf || better(nd, cand, dist[v], path_ids[v])) {
        dist[v] = nd;
        path_ids[v] = std::move(cand);
        path_idx[v] = path_idx[u];
        path_idx[v].push_back(v);
      }
    }
  }
  if (dist[destination] == inf)
    throw NetworkError("hub " + std::to_string(hubs[destination].id) + " unreachable from hub " +
                       std::to_string(hubs[origin].id));
  return make_route(graph, path_idx[destination]);
}

namespace {

int sample_weighted(Rng& rng, const std::vector<int>& candidates, const std::vector<Hub>& hubs) {
  double total = 0.0;
  for (int h : candidates) total += hubs[h].weight;
  double x = uniform01(rng) * total;
  for (int h : candidates) {
    x -= hubs[h].weight;
    if (x < 0.0) return h;
  }
  return candidates.back();
}

}  // namespace

MissionSet generate_missions(const NetworkGraph& graph, const MissionGenConfig& config,
                             std::uint64_t seed, const SimParams& params) {
  std::vector<int> pool;
  for (int h = 0; h < graph.hub_count(); ++h)
    if (config.block < 0 || graph.hubs()[h].block == config.block) pool.push_back(h);
  if (pool.size() < 2)
    throw NetworkError("block " + std::to_string(config.block) + " has fewer than two hubs");
  if (config.depart_first_step < 1 || config.depart_last_step < config.depart_first_step)
    throw NetworkError("invalid departure window");

  Rng rng(seed);
  std::vector<Mission> missions;
  for (int truck = 0; truck < config.trucks; ++truck) {
    bool placed = false;
    for (int attempt = 0; attempt <= config.max_retries && !placed; ++attempt) {
      const int start = sample_weighted(rng, pool, graph.hubs());
      std::vector<int> rest;
      for (int h : pool)
        if (h != start) rest.push_back(h);
      const int end = sample_weighted(rng, rest, graph.hubs());
      const int depart = uniform_int(rng, config.depart_first_step, config.depart_last_step);
      Route route;
      try {
        route = shortest_route(graph, start, end, config.block);
      } catch (const NetworkError&) {
        continue;
      }
      const int arrival = normal_arrival_time(route, depart, params);
      if (arrival > params.horizon_steps) continue;
      missions.push_back({truck, std::move(route), depart, arrival});
      placed = true;
    }
    if (!placed)
      throw NetworkError("could not place truck " + std::to_string(truck) + " after " +
                         std::to_string(config.max_retries) + " retries");
  }
  return make_mission_set(std::move(missions), params);
}

NetworkGraph load_network(const std::string& document, const SimParams& params) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("network document parse failure: ") + e.what());
  }
  try {
    std::vector<Hub> hubs;
    for (const auto& h : doc.at("hubs")) {
      Hub hub;
      hub.id = h.at("id").get<int>();
      hub.name = h.value("name", std::to_string(hub.id));
      hub.x = h.value("x", 0.0);
      hub.y = h.value("y", 0.0);
      hub.weight = h.value("weight", 1.0);
      hub.block = h.value("block", 0);
      hubs.push_back(std::move(hub));
    }
    std::vector<EdgeSpec> edges;
    for (const auto& e : doc.at("edges"))
      edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(), e.at("length_km").get<double>()});
    return NetworkGraph::build(std::move(hubs), edges, params);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("network document malformed: ") + e.what());
  }
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NetworkError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

NetworkGraph load_network_file(const std::string& path, const SimParams& params) {
  return load_network(read_file(path), params);
}

std::string network_to_json(const NetworkGraph& graph) {
  json doc;
  doc["hubs"] = json::array();
  for (const auto& h : graph.hubs())
    doc["hubs"].push_back({{"id", h.id}, {"name", h.name}, {"x", h.x}, {"y", h.y},
                           {"weight", h.weight}, {"block", h.block}});
  doc["edges"] = json::array();
  for (const auto& e : graph.edges())
    doc["edges"].push_back({{"from", graph.hubs()[e.from].id},
                            {"to", graph.hubs()[e.to].id},
                            {"length_km", e.length_km}});
  return doc.dump(1);
}

MissionSet load_missions(const std::string& document, const NetworkGraph& graph,
                         const SimParams& params) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("mission document parse failure: ") + e.what());
  }
  try {
    std::vector<Mission> missions;
    for (const auto& m : doc.at("missions")) {
      std::vector<int> idx;
      for (const auto& id : m.at("hubs")) idx.push_back(graph.hub_index(id.get<int>()));
      Mission mission;
      mission.truck_id = m.at("truck_id").get<int>();
      mission.route = make_route(graph, idx);
      mission.depart_step = m.at("depart_step").get<int>();
      mission.normal_arrival_step =
          normal_arrival_time(mission.route, mission.depart_step, params);
      missions.push_back(std::move(mission));
    }
    return make_mission_set(std::move(missions), params);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("mission document malformed: ") + e.what());
  }
}

MissionSet load_missions_file(const std::string& path, const NetworkGraph& graph,
                              const SimParams& params) {
  return load_missions(read_file(path), graph, params);
}

std::string missions_to_json(const MissionSet& set, const NetworkGraph& graph) {
  json doc;
  doc["missions"] = json::array();
  for (const auto& m : set.missions) {
    json hubs = json::array();
    for (int h : m.route.hubs) hubs.push_back(graph.hubs()[h].id);
    doc["missions"].push_back({{"truck_id", m.truck_id}, {"hubs", hubs}, {"depart_step", m.depart_step}});
  }
  doc["t_total_min"] = set.t_total_min;
  return doc.dump(1);
}

NetworkGraph synthesize_network(const SyntheticNetworkConfig& config, std::uint64_t seed,
                                const SimParams& params) {
  if (config.blocks < 1 || config.hubs < 2 * config.blocks)
    throw NetworkError("synthetic network needs at least two hubs per block");
  Rng rng(seed);
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.blocks))));
  const double spacing = 260.0;

  std::vector<Hub> hubs;
  std::vector<std::vector<int>> members(config.blocks);
  for (int i = 0; i < config.hubs; ++i) {
    const int b = i % config.blocks;
    const double cx = (b % cols) * spacing;
    const double cy = (b / cols) * spacing;
    const double r = 40.0 + 60.0 * uniform01(rng);
    const double a = 2.0 * 3.14159265358979323846 * uniform01(rng);
    Hub h;
    h.id = i;
    h.name = "city_" + std::to_string(i);
    h.x = std::round((cx + r * std::cos(a)) * 100.0) / 100.0;
    h.y = std::round((cy + r * std::sin(a)) * 100.0) / 100.0;
    // Heavy-tailed synthetic population weights.
    h.weight = std::round(std::exp(1.0 + 1.2 * standard_normal(rng)) * 100.0) / 100.0 + 0.1;
    h.block = b;
    members[b].push_back(i);
    hubs.push_back(h);
  }

  auto dist = [&](int a, int b) { return std::hypot(hubs[a].x - hubs[b].x, hubs[a].y - hubs[b].y); };
  std::set<std::pair<int, int>> undirected;
  auto link = [&](int a, int b) { undirected.insert({std::min(a, b), std::max(a, b)}); };

  // Chain inside every block keeps block-restricted routing connected.
  for (auto& m : members) {
    std::vector<int> order{m.front()};
    std::vector<bool> used(m.size(), false);
    used[0] = true;
    for (std::size_t step = 1; step < m.size(); ++step) {
      int best = -1;
      for (std::size_t j = 0; j < m.size(); ++j)
        if (!used[j] && (best < 0 || dist(order.back(), m[j]) < dist(order.back(), m[best])))
          best = static_cast<int>(j);
      used[best] = true;
      link(order.back(), m[best]);
      order.push_back(m[best]);
    }
  }
  // Neighbouring blocks on the grid get their closest hub pair linked.
  for (int b = 0; b < config.blocks; ++b) {
    for (int nb : {b + 1, b + cols}) {
      if (nb >= config.blocks || (nb == b + 1 && (b % cols) == cols - 1)) continue;
      int ba = -1, bb = -1;
      for (int x : members[b])
        for (int y : members[nb])
          if (ba < 0 || dist(x, y) < dist(ba, bb)) ba = x, bb = y;
      link(ba, bb);
    }
  }
  // Fill remaining edges with the shortest unused pairs.
  std::vector<std::pair<double, std::pair<int, int>>> pairs;
  for (int a = 0; a < config.hubs; ++a)
    for (int b = a + 1; b < config.hubs; ++b) pairs.push_back({dist(a, b), {a, b}});
  std::sort(pairs.begin(), pairs.end());
  const std::size_t target = static_cast<std::size_t>(config.directed_edges / 2);
  for (const auto& p : pairs) {
    if (undirected.size() >= target) break;
    undirected.insert(p.second);
  }

  double raw_mean = 0.0;
  for (const auto& p : undirected) raw_mean += dist(p.first, p.second);
  raw_mean /= static_cast<double>(undirected.size());
  const double scale = config.mean_length_km / raw_mean;
  const double floor_km = params.step_km(params.v_high) * 3.0;

  std::vector<EdgeSpec> edges;
  for (const auto& p : undirected) {
    double len = std::max(floor_km, dist(p.first, p.second) * scale);
    len = std::round(len * 100.0) / 100.0;
    edges.push_back({p.first, p.second, len});
    edges.push_back({p.second, p.first, len});
  }
  return NetworkGraph::build(std::move(hubs), edges, params);
}

}  // namespace platoon

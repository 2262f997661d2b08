#include "platoon/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "platoon/rng.hpp"

namespace platoon::experiment {

namespace fs = std::filesystem;

json default_config() {
  return json::parse(R"({
    "network": "",
    "synthetic": {"hubs": 41, "blocks": 12, "directed_edges": 202, "mean_length_km": 140.95, "seed": 7},
    "missions": [],
    "manifest": "",
    "generator": {"trucks": 100, "per_block": 5, "blocks": [], "whole_network": false, "count": 60,
                  "depart_first_step": 1, "depart_last_step": 90},
    "method": "taqmix",
    "methods": [],
    "checkpoint": "",
    "env": {"dt_min": 4.0, "v_low": 60.0, "v_medium": 75.0, "v_high": 90.0, "sigma_km": 0.01, "noise": true,
            "horizon_steps": 250, "K_d": 1.1, "c_b": 2.0, "phi_solo": 1.0, "phi_platoon": 0.68,
            "alpha": 10, "q": 5, "n_max": 100, "t_avgtotal_min": null,
            "w_fuel_factor": 7.03125, "w_delay_factor": 10.5},
    "net": {"embed": 32, "gru": 64, "mix_embed": 32, "hyper": 64, "per_truck": false,
            "mask_inactive_tokens": false},
    "train": {"epochs": 4000, "batch": 16, "buffer": 100, "gamma": 0.99, "lr": 0.0005, "rms_alpha": 0.99,
              "rms_eps": 1e-5, "clip_norm": 10.0, "target_period": 50, "eps_start": 1.0, "eps_min": 0.05,
              "eps_decay": 0.00019, "eval_every": 40, "shuffle_missions": false, "reward_scale": 1.0},
    "repeats": 3,
    "seed": 1,
    "out_dir": "out",
    "save_episodes": false
  })");
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

namespace {

void merge_into(json& base, const json& user, const std::string& where) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it->is_object()) merge_into(slot, *it, where + it.key() + ".");
    else slot = *it;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text, std::vector<std::string>& written) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  written.push_back(path.string());
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> metric_values(const RunRow& r) {
  const Metrics& m = r.metrics;
  return {m.F_r, m.T_d, m.T_r, m.P_j, m.F_v, m.T_o, m.P_r, r.reward, r.error_rate};
}

const char* kMetricHeader = "F_r,T_d,T_r,P_j,F_v,T_o,P_r,reward,E_r";

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

taqmix::TrainConfig train_config(const json& cfg) {
  const json& t = cfg.at("train");
  taqmix::TrainConfig tc;
  tc.epochs = t.at("epochs");
  tc.batch = t.at("batch");
  tc.buffer = t.at("buffer");
  tc.gamma = t.at("gamma");
  tc.optim.lr = t.at("lr");
  tc.optim.alpha = t.at("rms_alpha");
  tc.optim.eps = t.at("rms_eps");
  tc.optim.clip_norm = t.at("clip_norm");
  tc.target_period = t.at("target_period");
  tc.eps_start = t.at("eps_start");
  tc.eps_min = t.at("eps_min");
  tc.eps_decay = t.at("eps_decay");
  tc.eval_every = t.at("eval_every");
  tc.shuffle_missions = t.at("shuffle_missions");
  tc.reward_scale = t.at("reward_scale");
  tc.seed = cfg.at("seed");
  tc.noise = cfg.at("env").at("noise");
  return tc;
}

}  // namespace

json resolve_config(const json& user) {
  json cfg = default_config();
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  merge_into(cfg, user, "");
  if (cfg.at("repeats").get<int>() < 1) throw ConfigError("repeats must be at least 1");
  return cfg;
}

SimParams sim_params(const json& cfg) {
  const json& e = cfg.at("env");
  SimParams p;
  p.dt_min = e.at("dt_min");
  p.v_low = e.at("v_low");
  p.v_medium = e.at("v_medium");
  p.v_high = e.at("v_high");
  p.noise_sigma_km = e.at("sigma_km");
  p.horizon_steps = e.at("horizon_steps");
  p.delay_budget_rate = e.at("K_d");
  p.overbudget_multiplier = e.at("c_b");
  p.phi_solo = e.at("phi_solo");
  p.phi_platoon = e.at("phi_platoon");
  p.segments_per_edge = e.at("alpha");
  p.observed_partners = e.at("q");
  p.max_trucks = e.at("n_max");
  if (!(p.v_low < p.v_medium && p.v_medium < p.v_high) || p.dt_min <= 0.0 || p.delay_budget_rate <= 1.0)
    throw ConfigError("env: need v_low < v_medium < v_high, dt_min > 0 and K_d > 1");
  return p;
}

void normalize_rewards(SimParams& p, const json& cfg, const std::vector<MissionSet>& sets) {
  const json& e = cfg.at("env");
  double t_avg = 0.0;
  if (!e.at("t_avgtotal_min").is_null()) {
    t_avg = e.at("t_avgtotal_min");
  } else {
    if (sets.empty()) throw ConfigError("t_avgtotal_min is unset and no missions are loaded");
    for (const auto& s : sets) t_avg += s.t_total_min;
    t_avg /= static_cast<double>(sets.size());
  }
  if (!(t_avg > 0.0)) throw ConfigError("t_avgtotal_min must be positive");
  p.t_avgtotal_min = t_avg;
  p.w_fuel = e.at("w_fuel_factor").get<double>() * t_avg;
  p.w_delay = e.at("w_delay_factor").get<double>() * t_avg;
}

std::pair<bool, bool> method_flags(const std::string& name) {
  if (name == "qmix") return {false, false};
  if (name == "qmix+tca") return {true, false};
  if (name == "qmix+tsa") return {false, true};
  if (name == "taqmix") return {true, true};
  throw ConfigError("unknown learned method '" + name + "'");
}

MethodSpec method_spec(const json& entry, const json& cfg) {
  MethodSpec m;
  if (entry.is_string()) {
    m.name = entry.get<std::string>();
    m.checkpoint = cfg.at("checkpoint");
  } else if (entry.is_object()) {
    m.name = entry.at("method");
    m.checkpoint = entry.value("checkpoint", cfg.at("checkpoint").get<std::string>());
  } else {
    throw ConfigError("method entries are names or {method, checkpoint} objects");
  }
  if (m.learned()) {
    method_flags(m.name);
    if (m.checkpoint.empty()) throw ConfigError("method '" + m.name + "' needs a checkpoint");
  }
  return m;
}

Inputs load_inputs(const json& cfg) {
  Inputs in;
  in.params = sim_params(cfg);
  std::string network = cfg.at("network");
  std::vector<std::string> files = cfg.at("missions");
  const std::string manifest = cfg.at("manifest");
  if (!manifest.empty()) {
    const json man = json::parse(read_file(manifest));
    const fs::path base = fs::path(manifest).parent_path();
    if (network.empty()) network = (base / man.at("network").get<std::string>()).string();
    for (const auto& m : man.at("missions")) files.push_back((base / m.at("file").get<std::string>()).string());
  }
  if (network.empty()) throw ConfigError("no network file configured");
  if (files.empty()) throw ConfigError("no mission files configured");
  in.graph = load_network_file(network, in.params);
  in.network_file = network;
  for (const auto& f : files) {
    in.sets.push_back(load_missions_file(f, in.graph, in.params));
    in.mission_files.push_back(f);
  }
  normalize_rewards(in.params, cfg, in.sets);
  return in;
}

int workers_from_env() {
  const char* v = std::getenv("PLATOON_WORKERS");
  if (!v || !*v) return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

std::vector<RunRow> run_method(const MethodSpec& spec, const Inputs& in, const json& cfg, int workers) {
  const int repeats = cfg.at("repeats");
  const std::uint64_t seed = cfg.at("seed");
  const bool noise = cfg.at("env").at("noise");
  const bool keep_episodes = cfg.at("save_episodes");

  taqmix::TrainerState policy;
  if (spec.learned()) {
    policy = taqmix::load_policy(spec.checkpoint, in.params, in.graph);
    const auto [tca, tsa] = method_flags(spec.name);
    if (policy.model.cfg.use_tca != tca || policy.model.cfg.use_tsa != tsa)
      throw ConfigError("checkpoint '" + spec.checkpoint + "' was not trained as " + spec.name);
  }

  const int jobs = static_cast<int>(in.sets.size()) * repeats;
  std::vector<RunRow> rows(jobs);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (int j = next++; j < jobs; j = next++) {
      try {
        const int k = j / repeats, r = j % repeats;
        const MissionSet& ms = in.sets[k];
        RunRow row;
        row.method = spec.name;
        row.mission = stem(in.mission_files[k]);
        row.repeat = r;
        row.seed = stream_seed(seed, Stream::Noise, static_cast<std::uint64_t>(k) * 1000 + r);
        bool ep_noise = noise;
        std::vector<std::vector<int>> actions;
        if (spec.name == "nc") {
          auto run = baselines::run_nc(in.graph, ms, in.params, noise, row.seed);
          row.metrics = run.metrics, row.reward = run.total_reward, row.error_rate = run.error_rate;
          row.timing = std::move(run.decision_epochs);
          actions = std::move(run.actions);
        } else if (spec.name == "ne") {
          auto run = baselines::run_ne(in.graph, ms, in.params);
          row.metrics = run.metrics, row.reward = run.total_reward, row.error_rate = run.error_rate;
          row.timing = std::move(run.decision_epochs);
          actions = std::move(run.actions);
          ep_noise = false;
          row.seed = 0;
        } else {
          auto run = taqmix::execute_policy(policy.model, policy.model.params, in.graph, ms, in.params, noise, row.seed);
          row.metrics = run.metrics, row.reward = run.total_reward, row.error_rate = run.error_rate;
          row.timing = std::move(run.decision_epochs);
          row.latency_s = std::move(run.latency_s);
          actions = std::move(run.actions);
        }
        if (keep_episodes) {
          row.episode.mission_ref = in.mission_files[k];
          row.episode.seed = row.seed;
          row.episode.noise = ep_noise;
          row.episode.actions = std::move(actions);
          row.episode.encoding_hash =
              replay_episode(row.episode, in.graph, ms, in.params, &row.episode.team_rewards);
        }
        rows[j] = std::move(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(workers, jobs));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string metrics_csv(const std::vector<RunRow>& rows) {
  std::string out = std::string("method,mission,repeat,seed,") + kMetricHeader + "\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.mission + "," + std::to_string(r.repeat) + "," + std::to_string(r.seed);
    for (double v : metric_values(r)) out += "," + num(v);
    out += "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<RunRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  std::string out = std::string("method,stat,runs,") + kMetricHeader + "\n";
  for (const auto& name : order) {
    std::vector<std::vector<double>> cols(9);
    for (const auto& r : rows) {
      if (r.method != name) continue;
      const auto v = metric_values(r);
      for (std::size_t c = 0; c < v.size(); ++c)
        if (!std::isnan(v[c])) cols[c].push_back(v[c]);
    }
    std::string mean_row = name + ",mean,", std_row = name + ",std,";
    int runs = 0;
    for (const auto& r : rows) runs += r.method == name;
    mean_row += std::to_string(runs);
    std_row += std::to_string(runs);
    for (const auto& c : cols) {
      double mean = std::numeric_limits<double>::quiet_NaN(), sd = mean;
      if (!c.empty()) {
        mean = 0.0;
        for (double x : c) mean += x;
        mean /= static_cast<double>(c.size());
      }
      if (c.size() > 1) {
        double ss = 0.0;
        for (double x : c) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(c.size() - 1));
      }
      mean_row += "," + num(mean);
      std_row += "," + num(sd);
    }
    out += mean_row + "\n" + std_row + "\n";
  }
  return out;
}

std::string timing_csv(const std::vector<RunRow>& rows) {
  std::string out = "method,mission,repeat,epoch,active_trucks,seconds\n";
  for (const auto& r : rows)
    for (std::size_t e = 0; e < r.timing.size(); ++e)
      out += r.method + "," + r.mission + "," + std::to_string(r.repeat) + "," + std::to_string(e) + "," +
             std::to_string(r.timing[e].first) + "," + num(r.timing[e].second) + "\n";
  return out;
}

std::string curve_csv(const std::vector<taqmix::CurveRow>& rows) {
  std::string out = "epoch,loss,eval_reward,eval_F_v,epsilon\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + num(r.loss) + "," + num(r.eval_reward) + "," + num(r.eval_F_v) + "," +
           num(r.epsilon) + "\n";
  return out;
}

std::vector<std::string> cmd_generate(const json& cfg) {
  std::vector<std::string> written;
  const fs::path out = cfg.at("out_dir").get<std::string>();
  SimParams p = sim_params(cfg);
  const std::uint64_t seed = cfg.at("seed");

  NetworkGraph g;
  std::string network_ref;
  std::string network = cfg.at("network");
  if (network.empty()) {
    const json& s = cfg.at("synthetic");
    SyntheticNetworkConfig sc;
    sc.hubs = s.at("hubs");
    sc.blocks = s.at("blocks");
    sc.directed_edges = s.at("directed_edges");
    sc.mean_length_km = s.at("mean_length_km");
    g = synthesize_network(sc, s.at("seed").get<std::uint64_t>(), p);
    write_file(out / "network.json", network_to_json(g) + "\n", written);
    network_ref = "network.json";
  } else {
    g = load_network_file(network, p);
    network_ref = fs::relative(fs::absolute(network), fs::absolute(out)).generic_string();
  }

  const json& gen = cfg.at("generator");
  MissionGenConfig mc;
  mc.trucks = gen.at("trucks");
  mc.depart_first_step = gen.at("depart_first_step");
  mc.depart_last_step = gen.at("depart_last_step");

  struct Job {
    std::string file;
    int block;
    std::uint64_t key;
  };
  std::vector<Job> jobs;
  if (gen.at("whole_network").get<bool>()) {
    const int count = gen.at("count");
    for (int k = 0; k < count; ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "missions/mission_%03d.json", k);
      jobs.push_back({name, -1, static_cast<std::uint64_t>(k)});
    }
  } else {
    std::vector<int> blocks = gen.at("blocks");
    if (blocks.empty()) {
      std::set<int> seen;
      for (const auto& h : g.hubs()) seen.insert(h.block);
      blocks.assign(seen.begin(), seen.end());
    }
    const int per = gen.at("per_block");
    for (int b : blocks)
      for (int k = 0; k < per; ++k) {
        char name[64];
        std::snprintf(name, sizeof name, "missions/block%02d_%d.json", b, k);
        jobs.push_back({name, b, static_cast<std::uint64_t>(b) * 1000 + k});
      }
  }

  json man;
  man["network"] = network_ref;
  man["missions"] = json::array();
  double total = 0.0;
  for (const auto& j : jobs) {
    mc.block = j.block;
    const MissionSet ms = generate_missions(g, mc, stream_seed(seed, Stream::MissionGen, j.key), p);
    write_file(out / j.file, missions_to_json(ms, g) + "\n", written);
    man["missions"].push_back({{"file", j.file}, {"block", j.block}, {"trucks", ms.size()},
                               {"t_total_min", ms.t_total_min}});
    total += ms.t_total_min;
  }
  man["t_avgtotal_min"] = jobs.empty() ? 0.0 : total / static_cast<double>(jobs.size());
  write_file(out / "manifest.json", man.dump(2) + "\n", written);
  write_file(out / "config_snapshot.json", cfg.dump(2) + "\n", written);
  return written;
}

std::vector<std::string> cmd_train(const json& cfg, const std::string& resume) {
  std::vector<std::string> written;
  const fs::path out = cfg.at("out_dir").get<std::string>();
  Inputs in = load_inputs(cfg);
  const std::string method = cfg.at("method");
  const auto [tca, tsa] = method_flags(method);
  const taqmix::TrainConfig tc = train_config(cfg);

  taqmix::TrainerState st;
  std::string prior_curve;
  if (!resume.empty()) {
    st = taqmix::load_policy(resume, in.params, in.graph);
    if (st.model.cfg.use_tca != tca || st.model.cfg.use_tsa != tsa)
      throw ConfigError("checkpoint '" + resume + "' was not trained as " + method);
    if (std::ifstream(out / "curve.csv")) prior_curve = read_file((out / "curve.csv").string());
  } else {
    taqmix::NetConfig nc = taqmix::net_config_for(in.graph, in.params, tca, tsa);
    const json& n = cfg.at("net");
    nc.embed = n.at("embed");
    nc.gru = n.at("gru");
    nc.mix_embed = n.at("mix_embed");
    nc.hyper = n.at("hyper");
    nc.per_truck = n.at("per_truck");
    nc.mask_inactive_tokens = n.at("mask_inactive_tokens");
    st = taqmix::init_trainer(nc, tc);
  }

  std::vector<taqmix::TrainingMission> missions;
  for (const auto& s : in.sets) missions.push_back({&in.graph, &s});
  const auto curve = taqmix::train(st, missions, in.params, tc);

  fs::create_directories(out);
  taqmix::save_policy((out / "policy.ckpt").string(), st, in.params, tc, true);
  written.push_back((out / "policy.ckpt").string());
  taqmix::save_policy((out / "checkpoint.ckpt").string(), st, in.params, tc, false);
  written.push_back((out / "checkpoint.ckpt").string());
  std::string csv = curve_csv(curve);
  if (!prior_curve.empty()) csv = prior_curve + csv.substr(csv.find('\n') + 1);
  write_file(out / "curve.csv", csv, written);
  write_file(out / "config_snapshot.json", cfg.dump(2) + "\n", written);
  return written;
}

namespace {

std::vector<std::string> write_runs(const json& cfg, const Inputs& in, const std::vector<RunRow>& rows,
                                    bool timing) {
  std::vector<std::string> written;
  const fs::path out = cfg.at("out_dir").get<std::string>();
  write_file(out / "metrics.csv", metrics_csv(rows), written);
  write_file(out / "summary.csv", summary_csv(rows), written);
  if (timing) write_file(out / "timing.csv", timing_csv(rows), written);
  if (cfg.at("save_episodes").get<bool>()) {
    for (const auto& r : rows) {
      json doc = json::parse(episode_to_json(r.episode));
      doc["t_avgtotal_min"] = in.params.t_avgtotal_min;
      doc["env"] = cfg.at("env");
      doc["method"] = r.method;
      doc["network"] = in.network_file;
      write_file(out / "episodes" / (r.method + "_" + r.mission + "_r" + std::to_string(r.repeat) + ".json"),
                 doc.dump() + "\n", written);
    }
  }
  write_file(out / "config_snapshot.json", cfg.dump(2) + "\n", written);
  return written;
}

}  // namespace

std::vector<std::string> cmd_evaluate(const json& cfg, int workers) {
  const Inputs in = load_inputs(cfg);
  const MethodSpec m = method_spec(cfg.at("method"), cfg);
  return write_runs(cfg, in, run_method(m, in, cfg, workers), false);
}

std::vector<std::string> cmd_compare(const json& cfg, int workers) {
  const Inputs in = load_inputs(cfg);
  const json& list = cfg.at("methods");
  if (!list.is_array() || list.size() < 2) throw ConfigError("compare needs at least two methods");
  std::vector<RunRow> rows;
  for (const auto& entry : list) {
    auto part = run_method(method_spec(entry, cfg), in, cfg, workers);
    std::move(part.begin(), part.end(), std::back_inserter(rows));
  }
  return write_runs(cfg, in, rows, true);
}

bool cmd_replay(const json& cfg, const std::string& episode_file, std::string* report) {
  const std::string text = read_file(episode_file);
  const json doc = json::parse(text);
  const EpisodeRecord rec = episode_from_json(text);
  json c = cfg;
  if (doc.contains("env")) c["env"] = doc.at("env");
  if (doc.contains("t_avgtotal_min")) c["env"]["t_avgtotal_min"] = doc.at("t_avgtotal_min");
  SimParams p = sim_params(c);
  std::string network = cfg.at("network");
  if (network.empty()) network = doc.value("network", std::string());
  if (network.empty()) throw ConfigError("replay needs the network file");
  const NetworkGraph g = load_network_file(network, p);
  const MissionSet ms = load_missions_file(rec.mission_ref, g, p);
  normalize_rewards(p, c, {ms});
  std::vector<double> rewards;
  const std::uint64_t h = replay_episode(rec, g, ms, p, &rewards);
  int mismatched = 0;
  for (std::size_t k = 0; k < rewards.size(); ++k)
    if (k >= rec.team_rewards.size() || rewards[k] != rec.team_rewards[k]) ++mismatched;
  const bool ok = h == rec.encoding_hash && mismatched == 0 && rewards.size() == rec.team_rewards.size();
  if (report) {
    std::ostringstream os;
    os << "steps " << rewards.size() << ", reward mismatches " << mismatched << ", encoding hash "
       << (h == rec.encoding_hash ? "matches" : "differs") << "\n";
    *report = os.str();
  }
  return ok;
}

}  // namespace platoon::experiment

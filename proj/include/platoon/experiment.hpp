#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "platoon/baselines.hpp"
#include "platoon/taqmix/learner.hpp"

namespace platoon::experiment {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every key a command reads, with its default value.
json default_config();

/// Applies "a.b.c=value" to a config. The value is parsed as JSON when it
/// parses, otherwise it is taken as a string.
void apply_override(json& cfg, const std::string& assignment);

/// Defaults merged under `user`; unknown top-level keys are rejected.
json resolve_config(const json& user);

/// Environment constants from the "env" section. t_avgtotal and the weights
/// stay at their defaults; see normalize_rewards.
SimParams sim_params(const json& cfg);

/// Sets t_avgtotal (configured value, or the mean t_total of `sets`) and the
/// objective weights.
void normalize_rewards(SimParams& p, const json& cfg, const std::vector<MissionSet>& sets);

struct MethodSpec {
  std::string name;  // nc, ne, qmix, qmix+tca, qmix+tsa, taqmix
  std::string checkpoint;  // learned methods only
  bool learned() const { return name != "nc" && name != "ne"; }
};
MethodSpec method_spec(const json& entry, const json& cfg);
/// (use_tca, use_tsa) for a learned method name.
std::pair<bool, bool> method_flags(const std::string& name);

struct Inputs {
  NetworkGraph graph;
  std::string network_file;
  std::vector<std::string> mission_files;
  std::vector<MissionSet> sets;
  SimParams params;
};
/// Loads the network and mission files (list or manifest) of a config.
Inputs load_inputs(const json& cfg);

struct RunRow {
  std::string method;
  std::string mission;
  int repeat = 0;
  std::uint64_t seed = 0;
  Metrics metrics;
  double reward = 0.0;
  double error_rate = 0.0;
  std::vector<std::pair<int, double>> timing;
  std::vector<double> latency_s;
  EpisodeRecord episode;
};

/// Evaluates one method over every mission and repeat. Work fans out over
/// `workers` threads; the rows come back ordered by (mission, repeat).
std::vector<RunRow> run_method(const MethodSpec& m, const Inputs& in, const json& cfg, int workers);

// CSV documents. Metric columns follow F_r, T_d, T_r, P_j, F_v, T_o, P_r.
std::string metrics_csv(const std::vector<RunRow>& rows);
/// mean and sample std rows per method, in first-appearance order.
std::string summary_csv(const std::vector<RunRow>& rows);
std::string timing_csv(const std::vector<RunRow>& rows);
std::string curve_csv(const std::vector<taqmix::CurveRow>& rows);

/// Worker count from PLATOON_WORKERS (default 1).
int workers_from_env();

// Commands. Each writes into cfg["out_dir"] and returns the files it wrote.
std::vector<std::string> cmd_generate(const json& cfg);
std::vector<std::string> cmd_train(const json& cfg, const std::string& resume = "");
std::vector<std::string> cmd_evaluate(const json& cfg, int workers);
std::vector<std::string> cmd_compare(const json& cfg, int workers);
/// Re-runs a saved episode; returns true when rewards and encodings match.
bool cmd_replay(const json& cfg, const std::string& episode_file, std::string* report);

}  // namespace platoon::experiment

// Command-line front end: generate, train, evaluate, compare, replay.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "platoon/experiment.hpp"

using platoon::experiment::json;
namespace ex = platoon::experiment;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  long long seed = -1;
  std::string method;
  int repeats = 0;
  int epochs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--set", c.sets, "Override a config key, e.g. --set env.sigma_km=0");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Command seed");
  cmd->add_option("--method", c.method, "nc, ne, qmix, qmix+tca, qmix+tsa or taqmix");
  cmd->add_option("--repeats", c.repeats, "Evaluation repeats per mission");
  cmd->add_option("--epochs", c.epochs, "Training epochs");
}

json build_config(const Common& c) {
  json user = json::object();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ex::ConfigError("cannot read config '" + c.config + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    user = json::parse(ss.str());
  }
  json cfg = ex::resolve_config(user);
  for (const auto& s : c.sets) ex::apply_override(cfg, s);
  if (!c.out.empty()) cfg["out_dir"] = c.out;
  if (c.seed >= 0) cfg["seed"] = static_cast<std::uint64_t>(c.seed);
  if (!c.method.empty()) cfg["method"] = c.method;
  if (c.repeats > 0) cfg["repeats"] = c.repeats;
  if (c.epochs > 0) cfg["train"]["epochs"] = c.epochs;
  return ex::resolve_config(cfg);
}

void list(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truck platoon coordination: simulation, training and baselines"};
  app.require_subcommand(1);
  Common common;
  std::string resume, episode;

  auto* gen = app.add_subcommand("generate", "Write mission files and a manifest");
  add_common(gen, common);
  auto* train = app.add_subcommand("train", "Train a learned method; writes checkpoint and curve");
  add_common(train, common);
  train->add_option("--resume", resume, "Continue from a checkpoint.ckpt");
  auto* eval = app.add_subcommand("evaluate", "Per-run and summary metrics for one method");
  add_common(eval, common);
  auto* cmp = app.add_subcommand("compare", "Metrics and timing series for several methods");
  add_common(cmp, common);
  auto* rep = app.add_subcommand("replay", "Re-run a saved episode and check it reproduces");
  add_common(rep, common);
  rep->add_option("--episode", episode, "Episode JSON written by evaluate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    const json cfg = build_config(common);
    const int workers = ex::workers_from_env();
    if (gen->parsed()) list(ex::cmd_generate(cfg));
    if (train->parsed()) list(ex::cmd_train(cfg, resume));
    if (eval->parsed()) list(ex::cmd_evaluate(cfg, workers));
    if (cmp->parsed()) list(ex::cmd_compare(cfg, workers));
    if (rep->parsed()) {
      std::string report;
      const bool ok = ex::cmd_replay(cfg, episode, &report);
      std::cout << report;
      if (!ok) {
        std::cerr << json{{"error", "replay diverged from the recorded episode"}}.dump() << "\n";
        return 3;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include "c2fq/agent.hpp"
#include "c2fq/serialize.hpp"

#include <string>

namespace c2fq {

/// Fully resolved description of one training run. Written to
/// <run_dir>/config.resolved.json; feeding that file back reproduces the run.
struct RunConfig {
  std::string env_id = "needle_bandit";
  AgentConfig agent;
  std::string demo_path;  // "none" or empty disables demonstrations
  long total_steps = 20000;
  int eval_interval = 1000;
  int eval_episodes = 20;
  long ckpt_interval = 0;
  std::string run_dir;  // empty: $C2FQ_RUN_DIR or ./run

  bool demos_enabled() const { return !demo_path.empty() && demo_path != "none"; }
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::string& path);
std::string default_run_dir();

struct GenDemosOptions {
  std::string env_id;
  int count = 50;
  std::uint64_t seed = 1;
  std::string out_path = "demos.jsonl";
  double noise_std = 0.005;
};

struct EvalOptions {
  std::string checkpoint_path;
  int episodes = 20;
  std::uint64_t seed = 1;
};

// Exit codes: 0 success, 2 config error, 3 runtime failure.
int cmd_gen_demos(const GenDemosOptions& opts);
int cmd_train(RunConfig config);
int cmd_eval(const EvalOptions& opts);

}  // namespace c2fq

#include "c2fq/runner.hpp"

#include "c2fq/env.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace c2fq {

using nlohmann::json;
namespace fs = std::filesystem;

void to_json(json& j, const RunConfig& c) {
  j = json{{"env", c.env_id},
           {"agent", c.agent},
           {"demos", c.demo_path},
           {"total_steps", c.total_steps},
           {"eval_interval", c.eval_interval},
           {"eval_episodes", c.eval_episodes},
           {"ckpt_interval", c.ckpt_interval},
           {"run_dir", c.run_dir}};
}

void from_json(const json& j, RunConfig& c) {
  c.env_id = j.value("env", c.env_id);
  if (j.contains("agent")) from_json(j.at("agent"), c.agent);
  c.demo_path = j.value("demos", c.demo_path);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.ckpt_interval = j.value("ckpt_interval", c.ckpt_interval);
  c.run_dir = j.value("run_dir", c.run_dir);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j = json::parse(in);
  RunConfig c;
  from_json(j, c);
  return c;
}

std::string default_run_dir() {
  if (const char* dir = std::getenv("C2FQ_RUN_DIR"); dir && *dir) return dir;
  return "run";
}

int cmd_gen_demos(const GenDemosOptions& opts) {
  std::unique_ptr<Env> env;
  try {
    env = make_env(opts.env_id);
    if (opts.count < 1) throw std::invalid_argument("gen-demos: count must be >= 1");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    const ExpertPolicy expert = make_expert(opts.env_id);
    const std::vector<Episode> demos =
        gen_demo_dataset(*env, expert, opts.count, opts.seed, opts.noise_std);
    save_demos(opts.out_path, demos);
    std::size_t transitions = 0;
    for (const auto& ep : demos) transitions += ep.size();
    std::cout << "wrote " << demos.size() << " successful episodes (" << transitions
              << " transitions) to " << opts.out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int cmd_train(RunConfig config) {
  std::unique_ptr<Env> env, eval_env;
  std::vector<Episode> demos;
  fs::path run_dir;
  try {
    env = make_env(config.env_id);
    eval_env = make_env(config.env_id);
    config.agent.dims = env->spec().action_dim;
    config.agent.validate();
    if (config.total_steps < 0) throw std::invalid_argument("train: negative total_steps");
    if (config.eval_episodes < 1) throw std::invalid_argument("train: eval_episodes must be >= 1");
    if (config.demos_enabled()) {
      demos = load_demos(config.demo_path);
      if (demos.empty()) throw std::invalid_argument("train: demo file has no episodes");
    } else if (config.agent.lambda_bc != 0.0) {
      throw std::invalid_argument(
          "train: BC loss is enabled but no demo file was given (use --demos or --bc off)");
    }
    if (config.run_dir.empty()) config.run_dir = default_run_dir();
    run_dir = config.run_dir;
    fs::create_directories(run_dir);
    std::ofstream resolved(run_dir / "config.resolved.json");
    resolved << json(config).dump(2) << "\n";
    if (!resolved) throw std::invalid_argument("train: cannot write to run dir " + config.run_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    std::ofstream metrics(run_dir / "metrics.jsonl", std::ios::app);
    TrainHooks hooks;
    hooks.on_metrics = [&](const MetricsRecord& rec) {
      metrics << json(rec).dump() << "\n";
      metrics.flush();
      std::cout << "step " << rec.step << "  eval_success " << rec.eval_success
                << "  eval_return " << rec.eval_return << "  loss_rl " << rec.loss_rl
                << "  loss_bc " << rec.loss_bc << "\n";
    };
    hooks.on_checkpoint = [&](const CqnAgent& agent, long step) {
      agent.save((run_dir / ("ckpt_" + std::to_string(step))).string(), step, config.env_id);
    };
    TrainRun run;
    run.total_steps = config.total_steps;
    run.eval_interval = config.eval_interval;
    run.eval_episodes = config.eval_episodes;
    run.ckpt_interval = config.ckpt_interval;
    const TrainResult result = run_training(*env, *eval_env, config.agent, demos, run, hooks);
    std::cout << "done: " << result.episodes << " episodes, final eval_success "
              << result.final_eval_success << ", final eval_return "
              << result.final_eval_return << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 3;
  }
}

int cmd_eval(const EvalOptions& opts) {
  try {
    long step = 0;
    std::string env_id;
    const CqnAgent agent = CqnAgent::load(opts.checkpoint_path, &step, &env_id);
    if (opts.episodes < 1) throw std::invalid_argument("eval: episodes must be >= 1");
    std::unique_ptr<Env> env = make_env(env_id);
    const EvalReport report = agent.evaluate(*env, opts.episodes, opts.seed);
    std::cout << "env " << env_id << "  checkpoint step " << step << "  episodes "
              << opts.episodes << "\n";
    std::cout << "success_rate " << report.success_rate << "  mean_return "
              << report.mean_return << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace c2fq

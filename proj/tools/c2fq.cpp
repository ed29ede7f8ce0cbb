// Command-line driver: gen-demos | train | eval.
#include "c2fq/env.hpp"
#include "c2fq/runner.hpp"
#include "c2fq/serialize.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

// CLI flags override config-file values: the config (when given) seeds the
// bound variables before parsing, and CLI11 only writes flags that appear.
std::string prescan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--config") return argv[i + 1];
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine Q-network trainer for toy continuous control"};
  app.require_subcommand(1);

  // --- gen-demos ---
  c2fq::GenDemosOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-demos", "Generate expert demonstrations");
  gen_cmd->add_option("--env", gen.env_id, "Environment id")->required();
  gen_cmd->add_option("--count", gen.count, "Number of successful episodes");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--out", gen.out_path, "Output demo file");
  gen_cmd->add_option("--noise-std", gen.noise_std, "Expert action noise std");

  // --- train ---
  c2fq::RunConfig rc;
  const std::string config_path = prescan_config_path(argc, argv);
  if (!config_path.empty()) {
    try {
      rc = c2fq::load_run_config(config_path);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
  }
  std::string bc_mode, rl_mode = "on", c51_mode = "on", select_net, dummy_config;
  std::vector<int> encoder_widths, trunk_widths;
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  train_cmd->add_option("--config", dummy_config, "JSON config file (flags override it)");
  train_cmd->add_option("--env", rc.env_id, "Environment id");
  train_cmd->add_option("--demos", rc.demo_path, "Demo file path, or 'none'");
  train_cmd->add_option("--steps", rc.total_steps, "Total environment steps");
  train_cmd->add_option("--eval-interval", rc.eval_interval, "Steps between evaluations");
  train_cmd->add_option("--eval-episodes", rc.eval_episodes, "Episodes per evaluation");
  train_cmd->add_option("--ckpt-interval", rc.ckpt_interval, "Steps between checkpoints");
  train_cmd->add_option("--run-dir", rc.run_dir, "Run directory (default $C2FQ_RUN_DIR)");
  train_cmd->add_option("--seed", rc.agent.seed, "Training seed");
  train_cmd->add_option("--levels", rc.agent.levels, "Discretization levels L");
  train_cmd->add_option("--bins", rc.agent.bins, "Bins per level B");
  auto* bc_opt = train_cmd->add_option("--bc", bc_mode, "BC loss: margin|dominance|off");
  auto* rl_opt = train_cmd->add_option("--rl", rl_mode, "RL loss: on|off");
  auto* c51_opt = train_cmd->add_option("--c51", c51_mode,
                                        "Distributional critic: on|off (off: squared TD)");
  auto* net_opt = train_cmd->add_option("--select-net", select_net,
                                        "Action selection network: online|target");
  train_cmd->add_option("--noise-std", rc.agent.exploration_std, "Exploration noise std");
  train_cmd->add_option("--gamma", rc.agent.gamma, "Discount");
  train_cmd->add_option("--tau", rc.agent.tau, "Polyak coefficient");
  train_cmd->add_option("--n-step", rc.agent.n_step, "N-step return horizon");
  train_cmd->add_option("--margin", rc.agent.margin, "BC margin m");
  train_cmd->add_option("--rl-scale", rc.agent.lambda_rl, "RL loss scale");
  train_cmd->add_option("--bc-scale", rc.agent.lambda_bc, "BC loss scale");
  train_cmd->add_option("--batch-size", rc.agent.batch_size_each, "Batch size per buffer");
  train_cmd->add_option("--lr", rc.agent.lr, "Learning rate");
  train_cmd->add_option("--weight-decay", rc.agent.weight_decay, "AdamW weight decay");
  train_cmd->add_option("--atoms", rc.agent.num_atoms, "C51 atom count");
  train_cmd->add_option("--v-min", rc.agent.v_min, "C51 support minimum");
  train_cmd->add_option("--v-max", rc.agent.v_max, "C51 support maximum");
  train_cmd->add_option("--history", rc.agent.history, "Observation history depth");
  auto* enc_opt = train_cmd->add_option("--encoder", encoder_widths,
                                        "Encoder hidden widths (space separated)");
  auto* trunk_opt = train_cmd->add_option("--trunk", trunk_widths, "Trunk hidden widths");
  train_cmd->add_option("--buffer-capacity", rc.agent.buffer_capacity,
                        "Online replay capacity");

  // --- eval ---
  c2fq::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.checkpoint_path, "Checkpoint path")->required();
  eval_cmd->add_option("--episodes", ev.episodes, "Evaluation episodes");
  eval_cmd->add_option("--seed", ev.seed, "Evaluation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (gen_cmd->parsed()) return c2fq::cmd_gen_demos(gen);

  if (train_cmd->parsed()) {
    try {
      if (bc_opt->count()) {
        if (bc_mode == "off") {
          rc.agent.lambda_bc = 0.0;
        } else {
          rc.agent.bc_variant = c2fq::bc_variant_from_name(bc_mode);
          if (rc.agent.lambda_bc == 0.0) rc.agent.lambda_bc = 1.0;
        }
      }
      if (rl_opt->count()) {
        if (rl_mode == "off") rc.agent.lambda_rl = 0.0;
        else if (rl_mode == "on") {
          if (rc.agent.lambda_rl == 0.0) rc.agent.lambda_rl = 0.1;
        } else {
          throw std::invalid_argument("--rl takes on|off");
        }
      }
      if (c51_opt->count()) {
        if (c51_mode == "off") rc.agent.distributional = false;
        else if (c51_mode == "on") rc.agent.distributional = true;
        else throw std::invalid_argument("--c51 takes on|off");
      }
      if (net_opt->count()) rc.agent.action_select_net = c2fq::select_net_from_name(select_net);
      if (enc_opt->count()) rc.agent.encoder_widths = encoder_widths;
      if (trunk_opt->count()) rc.agent.trunk_widths = trunk_widths;
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    return c2fq::cmd_train(std::move(rc));
  }

  return c2fq::cmd_eval(ev);
}

#pragma once

#include "c2fq/action_space.hpp"
#include "c2fq/critic.hpp"
#include "c2fq/env.hpp"
#include "c2fq/metrics.hpp"
#include "c2fq/replay.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace c2fq {

enum class BcVariant { margin, dominance };
enum class SelectNet { online, target };

struct AgentConfig {
  int levels = 3;
  int bins = 5;
  int dims = 1;
  double gamma = 0.99;
  double tau = 0.02;
  int n_step = 3;
  double lambda_rl = 0.1;
  double lambda_bc = 1.0;
  double margin = 0.1;
  double exploration_std = 0.01;
  BcVariant bc_variant = BcVariant::dominance;
  SelectNet action_select_net = SelectNet::target;
  int batch_size_each = 256;  // per buffer; total batch is twice this
  double lr = 5e-5;
  double weight_decay = 0.1;
  std::uint64_t seed = 1;
  int num_atoms = 51;
  double v_min = -1.0;
  double v_max = 1.0;
  bool distributional = true;
  std::vector<int> encoder_widths{64, 512, 512};
  std::vector<int> trunk_widths{512};
  int history = 1;
  std::size_t buffer_capacity = 1000000;

  void validate() const;  // throws std::invalid_argument
};

struct ActionDecision {
  Eigen::VectorXd action;  // in the agent's scaled space [-1,1]^N
  BinPath path;
  LevelActions level_actions;
};

struct ActionQuery {
  BinPath path;
  Eigen::MatrixXd q;                  // levels x dims
  std::vector<Eigen::MatrixXd> dist;  // per level: dims x atoms; empty in scalar mode
};

struct TrainStepMetrics {
  double loss_rl = 0.0;
  double loss_bc = 0.0;
  double mean_q = 0.0;
};

struct EvalReport {
  double success_rate = 0.0;
  double mean_return = 0.0;
};

/// Coarse-to-fine Q-network agent: greedy zoom-in action selection,
/// distributional Q-learning with n-step targets against a Polyak-averaged
/// target critic, and an auxiliary behavior-cloning loss on demo samples.
class CqnAgent {
 public:
  enum class Mode { train, eval };

  CqnAgent(const AgentConfig& config, int raw_obs_dim);

  /// Greedy zoom-in selection (Mode::train adds clamped Gaussian noise to
  /// the final continuous action). Network side per config.
  ActionDecision select_action(const Eigen::VectorXd& stacked_obs, Mode mode);

  /// Q-values along the bin path of a given action (online network).
  ActionQuery q_of_action(const Eigen::VectorXd& stacked_obs,
                          const Eigen::VectorXd& scaled_action) const;

  // Loss values on a batch, without touching any parameters.
  double rl_loss(const std::vector<BatchItem>& batch) const;
  double bc_margin_loss(const std::vector<BatchItem>& batch) const;
  double bc_dominance_loss(const std::vector<BatchItem>& batch) const;
  /// lambda_rl * L_RL + lambda_bc * L_BC exactly as optimized by train steps.
  double total_loss(const std::vector<BatchItem>& batch) const;
  /// Gradient of total_loss with respect to the online parameters.
  Eigen::VectorXd total_loss_gradient(const std::vector<BatchItem>& batch) const;

  /// One AdamW step on the combined loss followed by a Polyak update.
  TrainStepMetrics train_on_batch(const std::vector<BatchItem>& batch);
  TrainStepMetrics train_step(ReplayBuffer& online_buffer, ReplayBuffer* demo_buffer);

  /// Noise-free rollouts with the target network.
  EvalReport evaluate(Env& env, int episodes, std::uint64_t seed) const;

  void save(const std::string& path, long step, const std::string& env_id) const;
  static CqnAgent load(const std::string& path, long* step_out = nullptr,
                       std::string* env_id_out = nullptr);

  void set_scaler(const ActionScaler& scaler) { scaler_ = scaler; }
  const ActionScaler& scaler() const { return scaler_; }
  const AgentConfig& config() const { return cfg_; }
  const ActionSpaceSpec& action_spec() const { return aspec_; }
  const SupportGrid& grid() const { return grid_; }
  const CriticNetwork& network() const { return net_; }
  ParameterStore& online_params() { return online_; }
  const ParameterStore& online_params() const { return online_; }
  ParameterStore& target_params() { return target_; }
  const ParameterStore& target_params() const { return target_; }
  int stacked_obs_dim() const { return net_.spec().obs_dim; }

 private:
  struct BatchEval {
    double loss_rl = 0.0;
    double loss_bc = 0.0;
    double mean_q = 0.0;
  };

  ActionDecision greedy_action(const ParameterStore& params,
                               const Eigen::VectorXd& stacked_obs) const;
  ActionDecision select_with(const ParameterStore& params, const Eigen::VectorXd& stacked_obs,
                             bool add_noise);
  BatchEval eval_batch(const std::vector<BatchItem>& batch, bool with_rl,
                       std::optional<BcVariant> bc, GradientStore* grad) const;

  AgentConfig cfg_;
  ActionSpaceSpec aspec_;
  SupportGrid grid_;
  CriticNetwork net_;
  ParameterStore online_;
  ParameterStore target_;
  AdamW opt_;
  ActionScaler scaler_;
  std::mt19937_64 noise_rng_;
};

struct TrainRun {
  long total_steps = 20000;
  int eval_interval = 1000;
  int eval_episodes = 20;
  long ckpt_interval = 0;  // 0: checkpoint only at the end
};

struct TrainHooks {
  std::function<void(const MetricsRecord&)> on_metrics;
  std::function<void(const CqnAgent&, long step)> on_checkpoint;
};

struct TrainResult {
  double final_eval_success = 0.0;
  double final_eval_return = 0.0;
  long episodes = 0;
};

/// Full training loop: pre-fills the demo buffer (fitting the action scaler
/// from the demos when present), then alternates environment interaction
/// with one train step per environment step, relabeling successful episodes
/// as demonstrations. Deterministic for a fixed config.
TrainResult run_training(Env& env, Env& eval_env, const AgentConfig& config,
                         const std::vector<Episode>& raw_demos, const TrainRun& run,
                         const TrainHooks& hooks = {});

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace c2fq

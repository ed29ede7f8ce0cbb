#pragma once

#include "c2fq/replay.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace c2fq {

struct EnvSpec {
  std::string id;
  int obs_dim = 0;
  int action_dim = 0;
  int max_episode_steps = 1;
  bool sparse = true;
  double tolerance = 0.0;
};

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;
};

/// Deterministic toy environment: (state, action, episode seed) fully
/// determine the next (state, reward, done).
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
};

std::vector<std::string> env_ids();
std::unique_ptr<Env> make_env(const std::string& id);  // throws listing valid ids

using ExpertPolicy = std::function<Eigen::VectorXd(const Eigen::VectorXd& obs)>;
ExpertPolicy make_expert(const std::string& id);

/// Expert rollouts with small Gaussian action noise; failures are resampled
/// so every returned episode is successful. Throws if the expert cannot
/// produce `count` successes within 10x count attempts.
std::vector<Episode> gen_demo_dataset(Env& env, const ExpertPolicy& expert, int count,
                                      std::uint64_t seed, double noise_std = 0.005);

/// Rolls one episode with an arbitrary policy; used by experts and tests.
Episode rollout(Env& env, const ExpertPolicy& policy, std::uint64_t episode_seed);

}  // namespace c2fq

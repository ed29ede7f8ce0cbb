#include "c2fq/env.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace c2fq {

namespace {

Eigen::VectorXd clamp_unit(const Eigen::VectorXd& a) {
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

void check_action(const Eigen::VectorXd& a, const EnvSpec& spec) {
  if (a.size() != spec.action_dim)
    throw std::invalid_argument(spec.id + ": action width " + std::to_string(a.size()) +
                                ", expected " + std::to_string(spec.action_dim));
  if (!a.allFinite()) throw std::invalid_argument(spec.id + ": non-finite action");
}

void check_obs(const Eigen::VectorXd& obs, const EnvSpec& spec) {
  if (!obs.allFinite()) throw std::logic_error(spec.id + ": non-finite observation");
}

// Single-step precision probe: the hidden target is revealed in the
// observation; reward 1 iff the action lands within the sup-norm tolerance.
class NeedleBandit final : public Env {
 public:
  NeedleBandit() {
    spec_.id = "needle_bandit";
    spec_.obs_dim = 2;
    spec_.action_dim = 2;
    spec_.max_episode_steps = 1;
    spec_.sparse = true;
    spec_.tolerance = 0.02;
  }

  static const std::vector<Eigen::Vector2d>& targets() {
    // Coordinates sit away from any centroid a single-level 5-bin lattice
    // can reach, while both dimensions span the same extremes.
    static const std::vector<Eigen::Vector2d> t = {
        {-0.75, 0.55}, {-0.35, 0.80}, {0.10, -0.75}, {0.55, 0.10},
        {0.80, -0.35}, {-0.75, -0.35}, {0.55, 0.80},  {0.10, 0.10}};
    return t;
  }

  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, targets().size() - 1);
    target_ = targets()[pick(rng)];
    Eigen::VectorXd obs = target_;
    check_obs(obs, spec_);
    return obs;
  }

  StepResult step(const Eigen::VectorXd& action) override {
    check_action(action, spec_);
    StepResult r;
    r.obs = target_;
    r.reward = ((clamp_unit(action) - target_).lpNorm<Eigen::Infinity>() <= spec_.tolerance)
                   ? 1.0
                   : 0.0;
    r.done = true;
    check_obs(r.obs, spec_);
    return r;
  }

 private:
  EnvSpec spec_;
  Eigen::Vector2d target_ = Eigen::Vector2d::Zero();
};

// 2-D velocity-command reaching task with a sparse terminal reward.
class PointmassReach final : public Env {
 public:
  PointmassReach() {
    spec_.id = "pointmass_reach";
    spec_.obs_dim = 4;  // position, goal
    spec_.action_dim = 2;
    spec_.max_episode_steps = 60;
    spec_.sparse = true;
    spec_.tolerance = 0.05;
  }

  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.85, 0.85);
    pos_ << u(rng), u(rng);
    goal_ << u(rng), u(rng);
    steps_ = 0;
    return observe();
  }

  StepResult step(const Eigen::VectorXd& action) override {
    check_action(action, spec_);
    pos_ += 0.05 * clamp_unit(action);
    ++steps_;
    StepResult r;
    r.obs = observe();
    const bool reached = (pos_ - goal_).norm() <= spec_.tolerance;
    r.reward = reached ? 1.0 : 0.0;
    r.done = reached || steps_ >= spec_.max_episode_steps;
    return r;
  }

 private:
  Eigen::VectorXd observe() const {
    Eigen::VectorXd obs(4);
    obs << pos_, goal_;
    check_obs(obs, spec_);
    return obs;
  }

  EnvSpec spec_;
  Eigen::Vector2d pos_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d goal_ = Eigen::Vector2d::Zero();
  int steps_ = 0;
};

// Force-controlled unit mass on a line, dense reward around the origin.
class DoubleIntegrator final : public Env {
 public:
  static constexpr double kDt = 0.05;

  DoubleIntegrator() {
    spec_.id = "double_integrator";
    spec_.obs_dim = 2;  // position, velocity
    spec_.action_dim = 1;
    spec_.max_episode_steps = 200;
    spec_.sparse = false;
    spec_.tolerance = 0.0;
  }

  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(1.4, 2.0);
    x_ = mag(rng) * (rng() % 2 == 0 ? 1.0 : -1.0);
    v_ = 0.0;
    steps_ = 0;
    return observe();
  }

  StepResult step(const Eigen::VectorXd& action) override {
    check_action(action, spec_);
    const double a = std::clamp(action[0], -1.0, 1.0);
    x_ += v_ * kDt;
    v_ += a * kDt;
    ++steps_;
    StepResult r;
    r.obs = observe();
    r.reward = std::exp(-x_ * x_ - 0.1 * v_ * v_);
    r.done = steps_ >= spec_.max_episode_steps;
    return r;
  }

 private:
  Eigen::VectorXd observe() const {
    Eigen::VectorXd obs(2);
    obs << x_, v_;
    check_obs(obs, spec_);
    return obs;
  }

  EnvSpec spec_;
  double x_ = 0.0;
  double v_ = 0.0;
  int steps_ = 0;
};

}  // namespace

std::vector<std::string> env_ids() {
  return {"needle_bandit", "pointmass_reach", "double_integrator"};
}

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "needle_bandit") return std::make_unique<NeedleBandit>();
  if (id == "pointmass_reach") return std::make_unique<PointmassReach>();
  if (id == "double_integrator") return std::make_unique<DoubleIntegrator>();
  std::string known;
  for (const auto& k : env_ids()) known += (known.empty() ? "" : ", ") + k;
  throw std::invalid_argument("unknown env \"" + id + "\" (valid: " + known + ")");
}

ExpertPolicy make_expert(const std::string& id) {
  if (id == "needle_bandit") {
    return [](const Eigen::VectorXd& obs) { return obs; };
  }
  if (id == "pointmass_reach") {
    return [](const Eigen::VectorXd& obs) {
      const Eigen::Vector2d pos = obs.head<2>();
      const Eigen::Vector2d goal = obs.tail<2>();
      return clamp_unit((goal - pos) / 0.05);
    };
  }
  if (id == "double_integrator") {
    return [](const Eigen::VectorXd& obs) {
      Eigen::VectorXd a(1);
      a[0] = std::clamp(-4.0 * obs[0] - 4.0 * obs[1], -1.0, 1.0);
      return a;
    };
  }
  throw std::invalid_argument("no expert for env \"" + id + "\"");
}

Episode rollout(Env& env, const ExpertPolicy& policy, std::uint64_t episode_seed) {
  Episode ep;
  Eigen::VectorXd obs = env.reset(episode_seed);
  for (int t = 0; t < env.spec().max_episode_steps; ++t) {
    Transition tr;
    tr.obs = obs;
    tr.action = policy(obs);
    StepResult sr = env.step(tr.action);
    tr.reward = sr.reward;
    tr.next_obs = sr.obs;
    tr.done = sr.done;
    ep.transitions.push_back(std::move(tr));
    obs = sr.obs;
    if (sr.done) break;
  }
  ep.success = !ep.transitions.empty() && ep.transitions.back().reward == 1.0;
  return ep;
}

std::vector<Episode> gen_demo_dataset(Env& env, const ExpertPolicy& expert, int count,
                                      std::uint64_t seed, double noise_std) {
  if (count < 1) throw std::invalid_argument("gen_demo_dataset: count must be >= 1");
  std::mt19937_64 noise_rng(seed ^ 0xd1b54a32d192ed03ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ExpertPolicy noisy = [&](const Eigen::VectorXd& obs) {
    Eigen::VectorXd a = expert(obs);
    if (noise_std > 0.0) {
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += noise_std * gauss(noise_rng);
    }
    return clamp_unit(a);
  };

  std::vector<Episode> demos;
  const long max_attempts = 10L * count;
  long attempts = 0;
  while (static_cast<int>(demos.size()) < count) {
    if (attempts >= max_attempts)
      throw std::runtime_error("gen_demo_dataset: expert failed to produce " +
                               std::to_string(count) + " successes in " +
                               std::to_string(max_attempts) + " attempts on " + env.spec().id);
    Episode ep = rollout(env, noisy, seed + static_cast<std::uint64_t>(attempts));
    ++attempts;
    if (ep.success) demos.push_back(std::move(ep));
  }
  return demos;
}

}  // namespace c2fq

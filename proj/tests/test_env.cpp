#include "c2fq/env.hpp"

#include "c2fq/action_space.hpp"

#include <doctest.h>

#include <cmath>

using namespace c2fq;

TEST_SUITE_BEGIN("env");

TEST_CASE("env registry") {
  for (const auto& id : env_ids()) {
    auto env = make_env(id);
    CHECK(env->spec().id == id);
    CHECK(env->spec().obs_dim >= 1);
    CHECK(env->spec().action_dim >= 1);
  }
  CHECK_THROWS_WITH_AS(make_env("bogus"), doctest::Contains("needle_bandit"),
                       std::invalid_argument);
}

TEST_CASE("needle bandit rewards exact hits within tolerance") {
  auto env = make_env("needle_bandit");
  const Eigen::VectorXd target = env->reset(3);

  StepResult hit = env->step(target);
  CHECK(hit.reward == 1.0);
  CHECK(hit.done);

  env->reset(3);
  Eigen::VectorXd off = target;
  off[0] += 0.03;
  CHECK(env->step(off).reward == 0.0);

  env->reset(3);
  Eigen::VectorXd near = target;
  near[0] += 0.019;
  near[1] -= 0.019;
  CHECK(env->step(near).reward == 1.0);

  Eigen::VectorXd wrong_width(3);
  wrong_width.setZero();
  env->reset(3);
  CHECK_THROWS_AS(env->step(wrong_width), std::invalid_argument);
}

TEST_CASE("needle bandit episodes are single-step with revealed targets") {
  auto env = make_env("needle_bandit");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::VectorXd obs = env->reset(seed);
    CHECK(obs.size() == 2);
    const StepResult r = env->step(obs);
    CHECK(r.done);
    CHECK(r.reward == 1.0);  // the observation is the target
  }
}

TEST_CASE("the L3B5 lattice covers every needle target, the L1B5 one none") {
  // unscaled [-1,1] bounds: half a final bin of width 2/125 is within 0.02
  const auto fine = ActionSpaceSpec::make(2, 3, 5);
  const auto coarse = ActionSpaceSpec::make(2, 1, 5);
  CHECK(final_precision(fine)[0] == doctest::Approx(0.016));
  CHECK(final_precision(fine)[0] < 2.0 * 0.02);

  auto env = make_env("needle_bandit");
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const Eigen::VectorXd target = env->reset(seed);
    const Eigen::VectorXd fine_hit = decode_path(encode_action(target, fine), fine).last();
    CHECK((fine_hit - target).lpNorm<Eigen::Infinity>() <= 0.02);
    const Eigen::VectorXd coarse_hit =
        decode_path(encode_action(target, coarse), coarse).last();
    CHECK((coarse_hit - target).lpNorm<Eigen::Infinity>() > 0.02);
  }
}

TEST_CASE("pointmass reaches the goal under the straight-line expert") {
  auto env = make_env("pointmass_reach");
  const ExpertPolicy expert = make_expert("pointmass_reach");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Eigen::VectorXd obs0 = env->reset(seed);
    const Eigen::Vector2d delta = obs0.tail<2>() - obs0.head<2>();
    const Episode ep = rollout(*env, expert, seed);
    CHECK(ep.success);
    // geometry: per-dimension clamp moves at most 0.05 per step
    const int bound = static_cast<int>(
                          std::ceil(delta.cwiseAbs().maxCoeff() / 0.05)) + 1;
    CHECK(static_cast<int>(ep.size()) <= bound);
    CHECK(ep.transitions.back().reward == 1.0);
  }
}

TEST_CASE("pointmass fails after 60 steps of zero action") {
  auto env = make_env("pointmass_reach");
  Eigen::VectorXd obs = env->reset(12);
  REQUIRE((obs.tail<2>() - obs.head<2>()).norm() > 0.05);  // goal away from the start
  StepResult r;
  int steps = 0;
  do {
    r = env->step(Eigen::VectorXd::Zero(2));
    ++steps;
  } while (!r.done);
  CHECK(steps == 60);
  CHECK(r.reward == 0.0);
}

TEST_CASE("pointmass succeeds immediately when the goal sits at the start") {
  auto env = make_env("pointmass_reach");
  for (std::uint64_t seed = 0; seed < 20000; ++seed) {
    const Eigen::VectorXd obs = env->reset(seed);
    if ((obs.tail<2>() - obs.head<2>()).norm() <= 0.04) {
      const StepResult r = env->step(Eigen::VectorXd::Zero(2));
      CHECK(r.reward == 1.0);
      CHECK(r.done);
      return;
    }
  }
  FAIL("no seed with a goal near the origin");
}

TEST_CASE("double integrator follows Euler arithmetic") {
  auto env = make_env("double_integrator");
  const Eigen::VectorXd obs0 = env->reset(5);
  const double x0 = obs0[0];
  CHECK(obs0[1] == 0.0);
  CHECK(std::abs(x0) >= 1.4);
  CHECK(std::abs(x0) <= 2.0);

  // constant force: x_t = x0 + a dt^2 t(t-1)/2, v_t = a dt t
  const double dt = 0.05, a = 1.0;
  Eigen::VectorXd force(1);
  force << a;
  Eigen::VectorXd obs = obs0;
  for (int t = 1; t <= 30; ++t) {
    const StepResult r = env->step(force);
    obs = r.obs;
    const double x_expected = x0 + a * dt * dt * 0.5 * t * (t - 1);
    const double v_expected = a * dt * t;
    CHECK(obs[0] == doctest::Approx(x_expected).epsilon(1e-12));
    CHECK(obs[1] == doctest::Approx(v_expected).epsilon(1e-12));
    // reward recomputed from the observed state
    CHECK(r.reward ==
          doctest::Approx(std::exp(-obs[0] * obs[0] - 0.1 * obs[1] * obs[1])).epsilon(1e-12));
  }
}

TEST_CASE("double integrator runs 200 steps and caps the return at 200") {
  auto env = make_env("double_integrator");
  env->reset(9);
  double ret = 0.0;
  int steps = 0;
  StepResult r;
  do {
    r = env->step(Eigen::VectorXd::Zero(1));
    ret += r.reward;
    ++steps;
  } while (!r.done);
  CHECK(steps == 200);
  CHECK(ret < 200.0);
  CHECK(ret >= 0.0);
}

TEST_CASE("PD expert stabilizes the double integrator near the goal") {
  auto env = make_env("double_integrator");
  const ExpertPolicy expert = make_expert("double_integrator");
  double worst = 1e9;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Episode ep = rollout(*env, expert, seed);
    CHECK(ep.size() == 200);
    worst = std::min(worst, ep.total_return());
    // settled by the end: per-step reward near 1
    CHECK(ep.transitions.back().reward > 0.99);
  }
  CHECK(worst >= 150.0);
}

TEST_CASE("needle expert is perfect over 1000 episodes") {
  auto env = make_env("needle_bandit");
  const ExpertPolicy expert = make_expert("needle_bandit");
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    successes += rollout(*env, expert, seed).success ? 1 : 0;
  CHECK(successes == 1000);
}

TEST_CASE("demo generation returns exactly count successful episodes") {
  auto env = make_env("needle_bandit");
  const ExpertPolicy expert = make_expert("needle_bandit");
  const auto demos = gen_demo_dataset(*env, expert, 50, 7);
  REQUIRE(demos.size() == 50);
  for (const auto& ep : demos) {
    CHECK(ep.success);
    CHECK(ep.size() == 1);
    CHECK(ep.transitions.back().reward == 1.0);
  }

  // deterministic per seed
  const auto again = gen_demo_dataset(*env, expert, 50, 7);
  for (int e = 0; e < 50; ++e) {
    CHECK(demos[e].transitions[0].action == again[e].transitions[0].action);
    CHECK(demos[e].transitions[0].obs == again[e].transitions[0].obs);
  }
  const auto other = gen_demo_dataset(*env, expert, 50, 8);
  bool any_diff = false;
  for (int e = 0; e < 50; ++e)
    any_diff |= demos[e].transitions[0].action != other[e].transitions[0].action;
  CHECK(any_diff);
}

TEST_CASE("demo generation reports impossible experts") {
  auto env = make_env("pointmass_reach");
  // a policy that never reaches anything
  const ExpertPolicy hopeless = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(2);
  };
  CHECK_THROWS_WITH_AS(gen_demo_dataset(*env, hopeless, 3, 1),
                       doctest::Contains("failed to produce"), std::runtime_error);
}

TEST_CASE("sparse envs pay only at the terminal step") {
  auto env = make_env("pointmass_reach");
  const ExpertPolicy expert = make_expert("pointmass_reach");
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const Episode ep = rollout(*env, expert, seed);
    for (std::size_t t = 0; t + 1 < ep.size(); ++t) CHECK(ep.transitions[t].reward == 0.0);
  }
}

TEST_SUITE_END();

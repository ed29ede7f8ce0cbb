#include "c2fq/agent.hpp"

#include "c2fq/serialize.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace c2fq;

namespace {

AgentConfig tiny_config() {
  AgentConfig cfg;
  cfg.levels = 3;
  cfg.bins = 5;
  cfg.dims = 3;
  cfg.num_atoms = 7;
  cfg.encoder_widths = {8, 8};
  cfg.trunk_widths = {8};
  cfg.batch_size_each = 4;
  cfg.seed = 1;
  return cfg;
}

void randomize_params(ParameterStore& p, std::uint64_t seed, double scale = 0.4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.flat()[i] = gauss(rng);
}

// Level-wise enumeration oracle: materialize each level's candidate bins via
// partition_interval, score each bin with its own softmax-mean, pick the
// argmax (lowest index on ties), and recurse into that interval.
BinPath greedy_oracle(const CqnAgent& agent, const ParameterStore& params,
                      const Eigen::VectorXd& obs) {
  const AgentConfig& cfg = agent.config();
  const CriticNetwork& net = agent.network();
  const int K = net.spec().atoms();

  const Eigen::MatrixXd h = net.encode(params, obs.transpose());
  std::vector<Interval> iv(cfg.dims);
  for (int n = 0; n < cfg.dims; ++n) iv[n] = agent.action_spec().bounds(n);
  Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(1, cfg.dims);
  BinPath path(cfg.levels, cfg.dims);

  for (int l = 1; l <= cfg.levels; ++l) {
    const Eigen::MatrixXd logits = net.level_forward(params, h, l, prev);
    for (int n = 0; n < cfg.dims; ++n) {
      const auto candidates = partition_interval(iv[n], cfg.bins);
      int best = -1;
      double best_q = 0.0;
      for (int b = 0; b < cfg.bins; ++b) {
        const Eigen::VectorXd z = logits.row(0).segment(net.logit_offset(n, b), K);
        const Eigen::VectorXd p = softmax(z);
        const double q = p.dot(agent.grid().atoms);
        if (best < 0 || q > best_q) {
          best = b;
          best_q = q;
        }
      }
      path(l - 1, n) = best;
      iv[n] = candidates[best];
      prev(0, n) = 0.5 * (iv[n].low + iv[n].high);
    }
  }
  return path;
}

BatchItem item_from(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double ret,
                    double discount, const Eigen::VectorXd& boot, bool is_demo) {
  BatchItem item;
  item.obs = obs;
  item.action = action;
  item.reward = ret;
  item.nstep_return = ret;
  item.nstep_discount = discount;
  item.bootstrap_obs = boot;
  item.is_demo = is_demo;
  item.done = discount == 0.0;
  return item;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempPath() { std::remove(path.c_str()); }
};

std::string read_file(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("agent");

TEST_CASE("an all-ties critic breaks to the all-zero path") {
  AgentConfig cfg = tiny_config();
  CqnAgent agent(cfg, 4);
  agent.target_params().flat().setZero();  // synthetic scorer: every bin equal
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(4);
  const ActionDecision dec = agent.select_action(obs, CqnAgent::Mode::eval);
  CHECK(dec.path.isZero());
  const LevelActions expected = decode_path(dec.path, agent.action_spec());
  CHECK(dec.action == expected.last());
  CHECK(dec.level_actions.actions == expected.actions);
}

TEST_CASE("greedy selection matches the enumeration oracle on random critics") {
  AgentConfig cfg = tiny_config();
  CqnAgent agent(cfg, 4);
  std::mt19937_64 rng(123);
  for (int draw = 0; draw < 100; ++draw) {
    randomize_params(agent.target_params(), 1000 + draw);
    const Eigen::VectorXd obs = Eigen::VectorXd::Random(4);
    const ActionDecision dec = agent.select_action(obs, CqnAgent::Mode::eval);
    const BinPath oracle = greedy_oracle(agent, agent.target_params(), obs);
    CHECK(dec.path == oracle);
  }
}

TEST_CASE("eval-mode selection is deterministic; train mode adds clamped noise") {
  AgentConfig cfg = tiny_config();
  CqnAgent agent(cfg, 4);
  randomize_params(agent.target_params(), 5);
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(4);
  const ActionDecision a = agent.select_action(obs, CqnAgent::Mode::eval);
  const ActionDecision b = agent.select_action(obs, CqnAgent::Mode::eval);
  CHECK(a.action == b.action);
  CHECK(a.path == b.path);

  const ActionDecision noisy = agent.select_action(obs, CqnAgent::Mode::train);
  CHECK(noisy.path == a.path);  // noise perturbs only the continuous action
  CHECK((noisy.action - a.action).cwiseAbs().maxCoeff() > 0.0);
  CHECK((noisy.action - a.action).cwiseAbs().maxCoeff() < 0.1);  // 0.01 std
  CHECK(noisy.action.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("argmax is invariant to constant logit shifts") {
  AgentConfig cfg = tiny_config();
  CqnAgent agent(cfg, 4);
  randomize_params(agent.target_params(), 17);
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(4);
  const BinPath before = agent.select_action(obs, CqnAgent::Mode::eval).path;

  // shift every atom's value-stream bias: all logits move by the same amount
  const auto& layout = agent.target_params().layout();
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    if (layout.segments[i].name.find("head") == 0 &&
        layout.segments[i].name.find(".b") != std::string::npos) {
      auto seg = agent.target_params().vector(static_cast<int>(i));
      seg.head(agent.network().spec().atoms()).array() += 11.0;
    }
  }
  CHECK(agent.select_action(obs, CqnAgent::Mode::eval).path == before);
}

TEST_CASE("q_of_action is self-consistent with selection") {
  AgentConfig cfg = tiny_config();
  cfg.action_select_net = SelectNet::online;
  CqnAgent agent(cfg, 4);
  randomize_params(agent.online_params(), 29);
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(4);
  const ActionDecision dec = agent.select_action(obs, CqnAgent::Mode::eval);
  const ActionQuery q = agent.q_of_action(obs, dec.action);
  CHECK(q.path == dec.path);
  CHECK(q.path == encode_action(dec.action, agent.action_spec()));

  // two actions in the same final bin share every Q value
  const Eigen::VectorXd prec = final_precision(agent.action_spec());
  Eigen::VectorXd nudged = dec.action;
  nudged[0] += 0.2 * prec[0];
  const ActionQuery q2 = agent.q_of_action(obs, nudged);
  CHECK(q2.path == q.path);
  CHECK(q2.q == q.q);

  Eigen::VectorXd bad = dec.action;
  bad[1] = std::nan("");
  CHECK_THROWS_AS(agent.q_of_action(obs, bad), std::invalid_argument);
}

TEST_CASE("terminal RL targets are one-hot at the clamped return") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 1;
  CqnAgent agent(cfg, 2);
  randomize_params(agent.online_params(), 31);

  const Eigen::VectorXd obs = Eigen::VectorXd::Random(2);
  const Eigen::VectorXd action = Eigen::VectorXd::Constant(1, 0.3);
  const std::vector<BatchItem> batch{
      item_from(obs, action, 1.0, 0.0, Eigen::VectorXd::Zero(2), false)};

  // independent oracle: cross entropy of each taken bin's distribution
  // against one-hot at v_max, averaged over levels
  const ActionQuery q = agent.q_of_action(obs, action);
  double expected = 0.0;
  for (int l = 0; l < cfg.levels; ++l)
    expected += -std::log(q.dist[l](0, cfg.num_atoms - 1));
  expected /= cfg.levels;
  CHECK(agent.rl_loss(batch) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("gamma=0 reduces the RL loss to reward regression") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 2;
  cfg.gamma = 0.0;
  CqnAgent agent(cfg, 3);
  randomize_params(agent.online_params(), 37);
  randomize_params(agent.target_params(), 38);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd obs = Eigen::VectorXd::Random(3);
    Eigen::VectorXd act(2);
    act << u(rng), u(rng);
    const double r = 0.5 * u(rng);
    batch.push_back(item_from(obs, act, r, 0.0, Eigen::VectorXd::Zero(3), false));
  }

  double expected = 0.0;
  const SupportGrid& g = agent.grid();
  for (const auto& item : batch) {
    const ActionQuery q = agent.q_of_action(item.obs, item.action);
    for (int l = 0; l < cfg.levels; ++l) {
      for (int n = 0; n < cfg.dims; ++n) {
        const Eigen::VectorXd target =
            project_bellman(Eigen::VectorXd::Constant(g.num_atoms, 1.0 / g.num_atoms), g,
                            item.reward, 0.0);
        Eigen::VectorXd logp = q.dist[l].row(n).transpose().array().log();
        expected += -target.dot(logp);
      }
    }
  }
  expected /= cfg.levels * cfg.dims * batch.size();
  CHECK(agent.rl_loss(batch) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("margin BC loss matches the direct evaluation oracle") {
  // scalar critic with handcrafted head biases: Q = (0.2, 0.9, 0.1)
  AgentConfig cfg;
  cfg.levels = 1;
  cfg.bins = 3;
  cfg.dims = 1;
  cfg.distributional = false;
  cfg.bc_variant = BcVariant::margin;
  cfg.margin = 0.1;
  cfg.encoder_widths = {4};
  cfg.trunk_widths = {4};
  CqnAgent agent(cfg, 2);

  const Eigen::Vector3d q_want(0.2, 0.9, 0.1);
  auto set_q = [&](const Eigen::Vector3d& q) {
    const auto& layout = agent.online_params().layout();
    for (std::size_t i = 0; i < layout.segments.size(); ++i) {
      if (layout.segments[i].name == "head0.w")
        agent.online_params().matrix(static_cast<int>(i)).setZero();
      if (layout.segments[i].name == "head0.b") {
        auto bias = agent.online_params().vector(static_cast<int>(i));
        bias[0] = q.mean();                       // value stream
        for (int b = 0; b < 3; ++b) bias[1 + b] = q[b] - q.mean();  // advantages
      }
    }
  };
  set_q(q_want);

  const Eigen::VectorXd obs = Eigen::VectorXd::Zero(2);
  const auto centroid = [&](int bin) {
    BinPath p(1, 1);
    p << bin;
    return decode_path(p, agent.action_spec()).last();
  };

  // expert bin 1 already dominates by the margin
  auto demo1 = item_from(obs, centroid(1), 0.0, 0.0, obs, true);
  CHECK(agent.bc_margin_loss({demo1}) == doctest::Approx(0.0).epsilon(1e-12));

  // expert bin 2: max(0.3, 1.0, 0.1) - 0.1 = 0.9
  auto demo2 = item_from(obs, centroid(2), 0.0, 0.0, obs, true);
  CHECK(agent.bc_margin_loss({demo2}) == doctest::Approx(0.9).epsilon(1e-9));

  // equal Q: the loss is exactly the margin
  set_q(Eigen::Vector3d(0.4, 0.4, 0.4));
  CHECK(agent.bc_margin_loss({demo1}) == doctest::Approx(cfg.margin).epsilon(1e-9));

  // non-demo items contribute nothing
  auto plain = item_from(obs, centroid(2), 0.0, 0.0, obs, false);
  set_q(q_want);
  CHECK(agent.bc_margin_loss({plain}) == 0.0);
  CHECK(agent.bc_margin_loss({plain, demo2}) == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("margin BC loss is zero iff the expert bin dominates by the margin") {
  AgentConfig cfg;
  cfg.levels = 1;
  cfg.bins = 4;
  cfg.dims = 1;
  cfg.distributional = false;
  cfg.bc_variant = BcVariant::margin;
  cfg.margin = 0.1;
  cfg.encoder_widths = {4};
  cfg.trunk_widths = {4};
  CqnAgent agent(cfg, 2);
  const Eigen::VectorXd obs = Eigen::VectorXd::Zero(2);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd q(4);
    for (int b = 0; b < 4; ++b) q[b] = u(rng);
    const int expert = trial % 4;
    const auto& layout = agent.online_params().layout();
    for (std::size_t i = 0; i < layout.segments.size(); ++i) {
      if (layout.segments[i].name == "head0.w")
        agent.online_params().matrix(static_cast<int>(i)).setZero();
      if (layout.segments[i].name == "head0.b") {
        auto bias = agent.online_params().vector(static_cast<int>(i));
        bias[0] = q.mean();
        for (int b = 0; b < 4; ++b) bias[1 + b] = q[b] - q.mean();
      }
    }
    BinPath p(1, 1);
    p << expert;
    const auto demo = item_from(
        obs, decode_path(p, agent.action_spec()).last(), 0.0, 0.0, obs, true);
    const double loss = agent.bc_margin_loss({demo});
    bool dominant = true;
    for (int b = 0; b < 4; ++b)
      if (b != expert && q[expert] < q[b] + cfg.margin - 1e-12) dominant = false;
    if (dominant) CHECK(loss <= 1e-9);
    else CHECK(loss > 1e-9);
    CHECK(loss >= -1e-12);
  }
}

TEST_CASE("dominance BC loss on handcrafted distributions") {
  AgentConfig cfg;
  cfg.levels = 1;
  cfg.bins = 2;
  cfg.dims = 1;
  cfg.num_atoms = 51;
  cfg.encoder_widths = {4};
  cfg.trunk_widths = {4};
  CqnAgent agent(cfg, 2);
  const Eigen::VectorXd obs = Eigen::VectorXd::Zero(2);
  const int K = cfg.num_atoms;

  // bin 0 one-hot at the bottom atom, bin 1 one-hot at the top
  const auto& layout = agent.online_params().layout();
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    if (layout.segments[i].name == "head0.w")
      agent.online_params().matrix(static_cast<int>(i)).setZero();
    if (layout.segments[i].name == "head0.b") {
      auto bias = agent.online_params().vector(static_cast<int>(i));
      bias[K + 0] = 60.0;                // bin 0 advantage: atom 0
      bias[K + K + (K - 1)] = 60.0;      // bin 1 advantage: atom K-1
    }
  }

  BinPath p0(1, 1), p1(1, 1);
  p0 << 0;
  p1 << 1;
  const auto expert_bottom = item_from(
      obs, decode_path(p0, agent.action_spec()).last(), 0.0, 0.0, obs, true);
  const auto expert_top = item_from(
      obs, decode_path(p1, agent.action_spec()).last(), 0.0, 0.0, obs, true);

  // expert one-hot at the bottom vs rival at the top: 50 CDF violations of 1
  CHECK(agent.bc_dominance_loss({expert_bottom}) == doctest::Approx(50.0).epsilon(1e-6));
  // expert already the maximizer: rival == expert, loss 0
  CHECK(agent.bc_dominance_loss({expert_top}) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("total loss gradient matches finite differences (miniature config)") {
  AgentConfig cfg;
  cfg.levels = 2;
  cfg.bins = 3;
  cfg.dims = 2;
  cfg.num_atoms = 5;
  cfg.encoder_widths = {8};
  cfg.trunk_widths = {8};
  cfg.lambda_rl = 0.1;
  cfg.lambda_bc = 1.0;
  cfg.bc_variant = BcVariant::dominance;
  CqnAgent agent(cfg, 3);
  randomize_params(agent.online_params(), 51, 0.3);
  randomize_params(agent.target_params(), 52, 0.3);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd obs = Eigen::VectorXd::Random(3);
    Eigen::VectorXd boot = Eigen::VectorXd::Random(3);
    Eigen::VectorXd act(2);
    act << u(rng), u(rng);
    batch.push_back(
        item_from(obs, act, 0.3 * u(rng), i % 2 ? 0.97 : 0.0, boot, i % 2 == 0));
  }

  const Eigen::VectorXd analytic = agent.total_loss_gradient(batch);
  const double h = 1e-5;
  int checked = 0;
  for (Eigen::Index i = 0; i < agent.online_params().size(); ++i) {
    const double saved = agent.online_params().flat()[i];
    agent.online_params().flat()[i] = saved + h;
    const double up = agent.total_loss(batch);
    agent.online_params().flat()[i] = saved - h;
    const double down = agent.total_loss(batch);
    agent.online_params().flat()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-4});
    CHECK(std::abs(fd - analytic[i]) / denom <= 1e-4);
    ++checked;
  }
  CHECK(checked == agent.online_params().size());
}

TEST_CASE("train steps move theta, and theta_bar only via Polyak") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 2;
  cfg.lr = 1e-3;
  CqnAgent agent(cfg, 3);
  randomize_params(agent.online_params(), 61, 0.2);
  agent.target_params() = agent.online_params();

  std::vector<BatchItem> batch;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(item_from(Eigen::VectorXd::Random(3),
                              Eigen::VectorXd::Random(2) * 0.9, i % 2 ? 1.0 : 0.0, 0.0,
                              Eigen::VectorXd::Random(3), i % 2 == 0));
  }

  const Eigen::VectorXd theta0 = agent.online_params().flat();
  const Eigen::VectorXd tbar0 = agent.target_params().flat();
  agent.train_on_batch(batch);
  const Eigen::VectorXd theta1 = agent.online_params().flat();
  const Eigen::VectorXd tbar1 = agent.target_params().flat();
  CHECK((theta1 - theta0).norm() > 0.0);
  CHECK(tbar1.isApprox((1.0 - cfg.tau) * tbar0 + cfg.tau * theta1, 1e-12));
}

TEST_CASE("BC terms vanish without demo items") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 2;
  CqnAgent agent(cfg, 3);
  randomize_params(agent.online_params(), 71, 0.2);
  randomize_params(agent.target_params(), 72, 0.2);

  std::vector<BatchItem> plain;
  for (int i = 0; i < 4; ++i)
    plain.push_back(item_from(Eigen::VectorXd::Random(3), Eigen::VectorXd::Random(2) * 0.9,
                              0.2, 0.9703, Eigen::VectorXd::Random(3), false));

  AgentConfig rl_only = cfg;
  rl_only.lambda_bc = 0.0;
  CqnAgent twin(rl_only, 3);
  twin.online_params() = agent.online_params();
  twin.target_params() = agent.target_params();

  CHECK(agent.total_loss_gradient(plain) == twin.total_loss_gradient(plain));
  CHECK(agent.bc_dominance_loss(plain) == 0.0);
}

TEST_CASE("loss decreases over 100 steps on a fixed batch") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 1;
  cfg.lr = 3e-3;
  cfg.weight_decay = 0.0;
  CqnAgent agent(cfg, 2);
  randomize_params(agent.online_params(), 81, 0.2);
  agent.target_params() = agent.online_params();

  const std::vector<BatchItem> batch{item_from(Eigen::VectorXd::Random(2),
                                               Eigen::VectorXd::Constant(1, 0.37), 1.0, 0.0,
                                               Eigen::VectorXd::Random(2), true)};
  const double before = agent.total_loss(batch);
  for (int i = 0; i < 100; ++i) agent.train_on_batch(batch);
  CHECK(agent.total_loss(batch) < before);
}

TEST_CASE("training metrics stay finite under fuzzing") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 2;
  cfg.batch_size_each = 8;
  CqnAgent agent(cfg, 3);
  ReplayBuffer online_buffer(4096, cfg.n_step, cfg.gamma, 5);
  ReplayBuffer demo_buffer(0, cfg.n_step, cfg.gamma, 6, true);

  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_episode = [&](int len) {
    Episode ep;
    for (int t = 0; t < len; ++t) {
      Transition tr;
      tr.obs = Eigen::VectorXd::Random(3);
      tr.action = Eigen::VectorXd::Random(2);
      tr.reward = u(rng) > 0.8 ? 1.0 : 0.0;
      tr.next_obs = Eigen::VectorXd::Random(3);
      tr.done = t + 1 == len;
      ep.transitions.push_back(tr);
    }
    return ep;
  };
  for (int e = 0; e < 6; ++e) online_buffer.push_episode(random_episode(4));
  for (int e = 0; e < 3; ++e) demo_buffer.push_episode(random_episode(3));

  for (int step = 0; step < 1000; ++step) {
    const TrainStepMetrics m = agent.train_step(online_buffer, &demo_buffer);
    CHECK(std::isfinite(m.loss_rl));
    CHECK(std::isfinite(m.loss_bc));
    CHECK(std::isfinite(m.mean_q));
  }
  CHECK(agent.online_params().flat().allFinite());
}

TEST_CASE("checkpoint round trip is byte-identical and restores behavior") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 2;
  CqnAgent agent(cfg, 3);
  randomize_params(agent.online_params(), 101, 0.3);
  randomize_params(agent.target_params(), 102, 0.3);
  ActionScaler scaler = ActionScaler::identity(2);
  scaler.low << -0.4, -0.7;
  scaler.high << 0.9, 0.8;
  agent.set_scaler(scaler);

  TempPath ckpt("c2fq_ckpt_test");
  agent.save(ckpt.path, 1234, "needle_bandit");

  long step = 0;
  std::string env_id;
  CqnAgent loaded = CqnAgent::load(ckpt.path, &step, &env_id);
  CHECK(step == 1234);
  CHECK(env_id == "needle_bandit");
  CHECK(loaded.online_params().flat() == agent.online_params().flat());
  CHECK(loaded.target_params().flat() == agent.target_params().flat());
  CHECK(loaded.scaler().low == scaler.low);

  TempPath ckpt2("c2fq_ckpt_test2");
  loaded.save(ckpt2.path, 1234, "needle_bandit");
  CHECK(read_file(ckpt.path) == read_file(ckpt2.path));

  const Eigen::VectorXd obs = Eigen::VectorXd::Random(3);
  CHECK(loaded.select_action(obs, CqnAgent::Mode::eval).action ==
        agent.select_action(obs, CqnAgent::Mode::eval).action);

  // version mismatch reports both versions
  {
    std::ofstream out(ckpt.path, std::ios::binary);
    out << "c2fq-ckpt v99\njunk\n";
  }
  CHECK_THROWS_WITH_AS(CqnAgent::load(ckpt.path), doctest::Contains("v99"),
                       std::runtime_error);
}

TEST_CASE("evaluate requires at least one episode") {
  AgentConfig cfg = tiny_config();
  cfg.dims = 2;
  CqnAgent agent(cfg, 2);
  auto env = make_env("needle_bandit");
  CHECK_THROWS_WITH_AS(agent.evaluate(*env, 0, 1), doctest::Contains("no episodes"),
                       std::invalid_argument);
  const EvalReport r = agent.evaluate(*env, 8, 3);
  CHECK(r.success_rate >= 0.0);
  CHECK(r.success_rate <= 1.0);
}

TEST_CASE("config validation") {
  AgentConfig cfg = tiny_config();
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.distributional = false;
  cfg.bc_variant = BcVariant::dominance;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.lambda_bc = 0.0;  // dominance unused: fine
  CHECK_NOTHROW(cfg.validate());
  cfg = tiny_config();
  cfg.v_min = 1.0;
  cfg.v_max = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("seeded training is deterministic") {
  auto run_once = [](const std::string& tag) {
    auto env = make_env("needle_bandit");
    auto eval_env = make_env("needle_bandit");
    auto demo_env = make_env("needle_bandit");
    const auto demos =
        gen_demo_dataset(*demo_env, make_expert("needle_bandit"), 8, 5);
    AgentConfig cfg;
    cfg.dims = 2;
    cfg.encoder_widths = {8, 8};
    cfg.trunk_widths = {8};
    cfg.num_atoms = 11;
    cfg.batch_size_each = 4;
    cfg.seed = 33;
    TrainRun run;
    run.total_steps = 120;
    run.eval_interval = 60;
    run.eval_episodes = 4;
    const std::string path =
        (std::filesystem::temp_directory_path() / ("c2fq_det_" + tag)).string();
    TrainHooks hooks;
    std::vector<MetricsRecord> records;
    hooks.on_metrics = [&](const MetricsRecord& r) { records.push_back(r); };
    hooks.on_checkpoint = [&](const CqnAgent& agent, long step) {
      if (step == run.total_steps) agent.save(path, step, "needle_bandit");
    };
    run_training(*env, *eval_env, cfg, demos, run, hooks);
    return std::pair{path, records};
  };

  const auto [path_a, rec_a] = run_once("a");
  const auto [path_b, rec_b] = run_once("b");
  CHECK(read_file(path_a) == read_file(path_b));
  REQUIRE(rec_a.size() == rec_b.size());
  for (std::size_t i = 0; i < rec_a.size(); ++i) {
    // identical metrics streams apart from wall-clock time
    CHECK(rec_a[i].step == rec_b[i].step);
    CHECK(rec_a[i].episode == rec_b[i].episode);
    CHECK(rec_a[i].train_success_mean == rec_b[i].train_success_mean);
    CHECK(rec_a[i].eval_success == rec_b[i].eval_success);
    CHECK(rec_a[i].eval_return == rec_b[i].eval_return);
    CHECK(rec_a[i].loss_rl == rec_b[i].loss_rl);
    CHECK(rec_a[i].loss_bc == rec_b[i].loss_bc);
    CHECK(rec_a[i].mean_q == rec_b[i].mean_q);
  }
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST_CASE("zero training steps leave the untrained baseline") {
  auto env = make_env("needle_bandit");
  auto eval_env = make_env("needle_bandit");
  AgentConfig cfg;
  cfg.dims = 2;
  cfg.encoder_widths = {8};
  cfg.trunk_widths = {8};
  cfg.num_atoms = 11;
  cfg.seed = 9;
  TrainRun run;
  run.total_steps = 0;
  run.eval_episodes = 10;
  const TrainResult result = run_training(*env, *eval_env, cfg, {}, run, {});

  CqnAgent fresh(cfg, env->spec().obs_dim);
  auto env2 = make_env("needle_bandit");
  const EvalReport baseline =
      fresh.evaluate(*env2, 10, mix_seed(mix_seed(cfg.seed, 0xea1c), 0));
  CHECK(result.final_eval_success == baseline.success_rate);
  CHECK(result.final_eval_return == baseline.mean_return);
}

TEST_SUITE_END();

#include "c2fq/agent.hpp"

#include "c2fq/serialize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace c2fq {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

void AgentConfig::validate() const {
  if (levels < 1 || bins < 2 || dims < 1)
    throw std::invalid_argument("agent config: bad lattice (levels/bins/dims)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("agent config: bad gamma");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("agent config: bad tau");
  if (n_step < 1) throw std::invalid_argument("agent config: n_step must be >= 1");
  if (lambda_rl < 0.0 || lambda_bc < 0.0)
    throw std::invalid_argument("agent config: loss scales must be >= 0");
  if (margin < 0.0) throw std::invalid_argument("agent config: margin must be >= 0");
  if (exploration_std < 0.0)
    throw std::invalid_argument("agent config: exploration_std must be >= 0");
  if (batch_size_each < 0) throw std::invalid_argument("agent config: bad batch size");
  if (!(lr > 0.0)) throw std::invalid_argument("agent config: lr must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("agent config: bad weight decay");
  if (distributional && num_atoms < 2)
    throw std::invalid_argument("agent config: need at least 2 atoms");
  if (!(v_min < v_max)) throw std::invalid_argument("agent config: v_min must be < v_max");
  if (history < 1) throw std::invalid_argument("agent config: history must be >= 1");
  if (encoder_widths.empty() || trunk_widths.empty())
    throw std::invalid_argument("agent config: empty hidden widths");
  for (int w : encoder_widths)
    if (w < 1) throw std::invalid_argument("agent config: bad encoder width");
  for (int w : trunk_widths)
    if (w < 1) throw std::invalid_argument("agent config: bad trunk width");
  if (!distributional && lambda_bc > 0.0 && bc_variant == BcVariant::dominance)
    throw std::invalid_argument(
        "agent config: dominance BC requires the distributional critic (use margin)");
}

namespace {

CriticSpec make_critic_spec(const AgentConfig& cfg, int raw_obs_dim) {
  CriticSpec spec;
  spec.obs_dim = raw_obs_dim * cfg.history;
  spec.encoder_widths = cfg.encoder_widths;
  spec.trunk_widths = cfg.trunk_widths;
  spec.levels = cfg.levels;
  spec.dims = cfg.dims;
  spec.bins = cfg.bins;
  spec.num_atoms = cfg.num_atoms;
  spec.distributional = cfg.distributional;
  return spec;
}

}  // namespace

CqnAgent::CqnAgent(const AgentConfig& config, int raw_obs_dim)
    : cfg_(config),
      aspec_(ActionSpaceSpec::make(config.dims, config.levels, config.bins)),
      grid_(SupportGrid::make(config.v_min, config.v_max,
                              config.distributional ? config.num_atoms : 2)),
      net_(make_critic_spec(config, raw_obs_dim)),
      online_(net_.init_params(config.seed)),
      target_(online_),
      opt_(online_, config.lr, config.weight_decay),
      scaler_(ActionScaler::identity(config.dims)),
      noise_rng_(mix_seed(config.seed, 0x6e015e)) {
  cfg_.validate();
}

ActionDecision CqnAgent::greedy_action(const ParameterStore& params,
                                       const Eigen::VectorXd& stacked_obs) const {
  if (stacked_obs.size() != stacked_obs_dim())
    throw std::invalid_argument("select_action: observation width mismatch");
  const int N = cfg_.dims, L = cfg_.levels, B = cfg_.bins;
  const int K = net_.spec().atoms();

  Eigen::MatrixXd h = net_.encode(params, stacked_obs.transpose());
  Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(1, N);
  ActionDecision dec;
  dec.path.resize(L, N);
  dec.level_actions.actions.resize(L, N);
  std::vector<Interval> iv(N);
  for (int n = 0; n < N; ++n) iv[n] = aspec_.bounds(n);

  for (int l = 1; l <= L; ++l) {
    Eigen::MatrixXd logits = net_.level_forward(params, h, l, prev);
    for (int n = 0; n < N; ++n) {
      int best = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int b = 0; b < B; ++b) {
        const auto seg = logits.row(0).segment(net_.logit_offset(n, b), K).transpose();
        const double q =
            cfg_.distributional ? dist_mean(softmax(seg), grid_) : double(seg(0));
        if (q > best_q) {  // ties break to the lowest bin index
          best_q = q;
          best = b;
        }
      }
      dec.path(l - 1, n) = best;
      iv[n] = zoom_interval(iv[n], best, B);
      dec.level_actions.actions(l - 1, n) = iv[n].centroid();
      prev(0, n) = iv[n].centroid();
    }
  }
  dec.action = dec.level_actions.last();
  return dec;
}

ActionDecision CqnAgent::select_with(const ParameterStore& params,
                                     const Eigen::VectorXd& stacked_obs, bool add_noise) {
  ActionDecision dec = greedy_action(params, stacked_obs);
  if (add_noise && cfg_.exploration_std > 0.0) {
    std::normal_distribution<double> gauss(0.0, cfg_.exploration_std);
    for (int n = 0; n < cfg_.dims; ++n) {
      dec.action[n] = std::clamp(dec.action[n] + gauss(noise_rng_), aspec_.low[n],
                                 aspec_.high[n]);
    }
  }
  return dec;
}

ActionDecision CqnAgent::select_action(const Eigen::VectorXd& stacked_obs, Mode mode) {
  const ParameterStore& params =
      cfg_.action_select_net == SelectNet::online ? online_ : target_;
  return select_with(params, stacked_obs, mode == Mode::train);
}

ActionQuery CqnAgent::q_of_action(const Eigen::VectorXd& stacked_obs,
                                  const Eigen::VectorXd& scaled_action) const {
  if (!scaled_action.allFinite())
    throw std::invalid_argument("q_of_action: non-finite action");
  const int N = cfg_.dims, L = cfg_.levels;
  const int K = net_.spec().atoms();

  ActionQuery out;
  out.path = encode_action(scaled_action, aspec_);
  const LevelActions lacts = decode_path(out.path, aspec_);
  out.q.resize(L, N);
  if (cfg_.distributional) out.dist.assign(L, Eigen::MatrixXd(N, K));

  Eigen::MatrixXd h = net_.encode(online_, stacked_obs.transpose());
  for (int l = 1; l <= L; ++l) {
    Eigen::MatrixXd prev(1, N);
    prev.row(0) = lacts.prev(l);
    Eigen::MatrixXd logits = net_.level_forward(online_, h, l, prev);
    for (int n = 0; n < N; ++n) {
      const auto seg =
          logits.row(0).segment(net_.logit_offset(n, out.path(l - 1, n)), K).transpose();
      if (cfg_.distributional) {
        Eigen::VectorXd p = softmax(seg);
        out.q(l - 1, n) = dist_mean(p, grid_);
        out.dist[l - 1].row(n) = p.transpose();
      } else {
        out.q(l - 1, n) = seg(0);
      }
    }
  }
  return out;
}

CqnAgent::BatchEval CqnAgent::eval_batch(const std::vector<BatchItem>& batch, bool with_rl,
                                         std::optional<BcVariant> bc,
                                         GradientStore* grad) const {
  BatchEval out;
  const int count = static_cast<int>(batch.size());
  if (count == 0) return out;

  const int N = cfg_.dims, L = cfg_.levels, B = cfg_.bins;
  const int K = net_.spec().atoms();
  const int obs_dim = stacked_obs_dim();
  const bool dist_mode = cfg_.distributional;

  Eigen::MatrixXd obs(count, obs_dim), boot(count, obs_dim);
  Eigen::VectorXd returns(count), discounts(count);
  std::vector<BinPath> paths(count);
  std::vector<LevelActions> lacts(count);
  std::vector<char> demo(count, 0);
  int demo_count = 0;
  for (int i = 0; i < count; ++i) {
    const BatchItem& item = batch[i];
    if (item.obs.size() != obs_dim || item.bootstrap_obs.size() != obs_dim)
      throw std::invalid_argument("eval_batch: observation width mismatch");
    obs.row(i) = item.obs;
    boot.row(i) = item.bootstrap_obs;
    paths[i] = encode_action(scaler_.apply(item.action), aspec_);
    lacts[i] = decode_path(paths[i], aspec_);
    returns[i] = item.nstep_return;
    discounts[i] = item.nstep_discount;
    demo[i] = item.is_demo ? 1 : 0;
    demo_count += demo[i];
  }
  const bool bc_active = bc.has_value() && demo_count > 0;

  // Greedy target-network pass at the bootstrap observations: per level the
  // argmax bin's distribution (or scalar Q), conditioned on the target
  // network's own previous-level actions.
  std::vector<Eigen::MatrixXd> tgt_probs;  // per level: count x (N*K)
  std::vector<Eigen::MatrixXd> tgt_q;      // per level: count x N
  if (with_rl) {
    Eigen::MatrixXd h_t = net_.encode(target_, boot);
    Eigen::MatrixXd prev_t = Eigen::MatrixXd::Zero(count, N);
    Eigen::MatrixXd lo(count, N), hi(count, N);
    for (int n = 0; n < N; ++n) {
      lo.col(n).setConstant(aspec_.low[n]);
      hi.col(n).setConstant(aspec_.high[n]);
    }
    for (int l = 1; l <= L; ++l) {
      Eigen::MatrixXd logits = net_.level_forward(target_, h_t, l, prev_t);
      Eigen::MatrixXd probs_l, q_l;
      if (dist_mode) probs_l.resize(count, static_cast<Eigen::Index>(N) * K);
      else q_l.resize(count, N);
      for (int i = 0; i < count; ++i) {
        for (int n = 0; n < N; ++n) {
          int best = 0;
          double best_q = -std::numeric_limits<double>::infinity();
          Eigen::VectorXd best_p;
          for (int b = 0; b < B; ++b) {
            const auto seg = logits.row(i).segment(net_.logit_offset(n, b), K).transpose();
            double q;
            Eigen::VectorXd p;
            if (dist_mode) {
              p = softmax(seg);
              q = dist_mean(p, grid_);
            } else {
              q = seg(0);
            }
            if (q > best_q) {
              best_q = q;
              best = b;
              if (dist_mode) best_p = std::move(p);
            }
          }
          if (dist_mode) probs_l.row(i).segment(static_cast<Eigen::Index>(n) * K, K) = best_p;
          else q_l(i, n) = best_q;
          Interval iv = zoom_interval({lo(i, n), hi(i, n)}, best, B);
          lo(i, n) = iv.low;
          hi(i, n) = iv.high;
          prev_t(i, n) = iv.centroid();
        }
      }
      if (dist_mode) tgt_probs.push_back(std::move(probs_l));
      else tgt_q.push_back(std::move(q_l));
    }
  }

  // Online pass, level by level; levels are independent given the encoder
  // features, so each level backpropagates immediately into the parameter
  // gradients and the shared feature gradient.
  CriticNetwork::EncoderCache enc_cache;
  Eigen::MatrixXd h = net_.encode(online_, obs, grad ? &enc_cache : nullptr);
  Eigen::MatrixXd dfeat;
  if (grad) dfeat = Eigen::MatrixXd::Zero(count, net_.spec().feature_dim());

  const double w_rl = cfg_.lambda_rl / (static_cast<double>(L) * N * count);
  const double w_bc =
      bc_active ? cfg_.lambda_bc / (static_cast<double>(L) * N * demo_count) : 0.0;
  double rl_sum = 0.0, bc_sum = 0.0, q_sum = 0.0;

  for (int l = 1; l <= L; ++l) {
    Eigen::MatrixXd prev(count, N);
    for (int i = 0; i < count; ++i) prev.row(i) = lacts[i].prev(l);
    CriticNetwork::LevelCache cache;
    Eigen::MatrixXd logits =
        net_.level_forward(online_, h, l, prev, grad ? &cache : nullptr);
    Eigen::MatrixXd dlogits;
    if (grad) dlogits = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());

    for (int i = 0; i < count; ++i) {
      for (int n = 0; n < N; ++n) {
        const int taken = paths[i](l - 1, n);
        const Eigen::Index off = net_.logit_offset(n, taken);
        const auto seg = logits.row(i).segment(off, K).transpose();
        Eigen::VectorXd p_taken;
        double q_taken;
        if (dist_mode) {
          p_taken = softmax(seg);
          q_taken = dist_mean(p_taken, grid_);
        } else {
          q_taken = seg(0);
        }
        q_sum += q_taken;

        if (with_rl) {
          if (dist_mode) {
            const Eigen::VectorXd tp =
                tgt_probs[l - 1].row(i).segment(static_cast<Eigen::Index>(n) * K, K);
            const Eigen::VectorXd target_dist =
                project_bellman(tp, grid_, returns[i], discounts[i]);
            rl_sum += cross_entropy_loss(target_dist, seg);
            if (grad) dlogits.row(i).segment(off, K) += w_rl * (p_taken - target_dist);
          } else {
            const double y = returns[i] + discounts[i] * tgt_q[l - 1](i, n);
            const double diff = q_taken - y;
            rl_sum += diff * diff;
            if (grad) dlogits(i, off) += w_rl * 2.0 * diff;
          }
        }

        if (bc_active && demo[i]) {
          // Margin-shifted maximizer over bins (Q + m outside the expert bin).
          int rival = 0;
          double best_shifted = -std::numeric_limits<double>::infinity();
          double q_rival = 0.0;
          for (int b = 0; b < B; ++b) {
            const auto bseg = logits.row(i).segment(net_.logit_offset(n, b), K).transpose();
            const double qb =
                (b == taken) ? q_taken
                             : (dist_mode ? dist_mean(softmax(bseg), grid_) : double(bseg(0)));
            const double shifted = qb + (b == taken ? 0.0 : cfg_.margin);
            if (shifted > best_shifted) {
              best_shifted = shifted;
              rival = b;
              q_rival = qb;
            }
          }
          if (*bc == BcVariant::margin) {
            bc_sum += best_shifted - q_taken;
            if (grad && rival != taken) {
              const Eigen::Index roff = net_.logit_offset(n, rival);
              if (dist_mode) {
                const Eigen::VectorXd p_riv =
                    softmax(logits.row(i).segment(roff, K).transpose());
                dlogits.row(i).segment(roff, K) +=
                    w_bc * (p_riv.array() * (grid_.atoms.array() - q_rival)).matrix();
                dlogits.row(i).segment(off, K) -=
                    w_bc * (p_taken.array() * (grid_.atoms.array() - q_taken)).matrix();
              } else {
                dlogits(i, roff) += w_bc;
                dlogits(i, off) -= w_bc;
              }
            }
          } else if (rival != taken) {  // dominance; zero when the expert bin wins
            const Eigen::Index roff = net_.logit_offset(n, rival);
            const Eigen::VectorXd p_riv =
                softmax(logits.row(i).segment(roff, K).transpose());
            double ce = 0.0, cr = 0.0;
            Eigen::VectorXd viol(K);
            for (int k = 0; k < K; ++k) {
              ce += p_taken[k];
              cr += p_riv[k];
              const double d = ce - cr;
              viol[k] = d > 0.0 ? 1.0 : 0.0;
              if (d > 0.0) bc_sum += d;
            }
            if (grad) {
              // dL/dp_expert[j] = #violated indices >= j (CDF is a prefix sum).
              Eigen::VectorXd suffix(K);
              double acc = 0.0;
              for (int k = K - 1; k >= 0; --k) {
                acc += viol[k];
                suffix[k] = acc;
              }
              const double se = p_taken.dot(suffix);
              const double sr = p_riv.dot(suffix);
              dlogits.row(i).segment(off, K) +=
                  w_bc * (p_taken.array() * (suffix.array() - se)).matrix();
              dlogits.row(i).segment(roff, K) -=
                  w_bc * (p_riv.array() * (suffix.array() - sr)).matrix();
            }
          }
        }
      }
    }
    if (grad) dfeat += net_.level_backward(online_, cache, dlogits, *grad);
  }
  if (grad) net_.encode_backward(online_, enc_cache, dfeat, *grad);

  out.loss_rl = with_rl ? rl_sum / (static_cast<double>(L) * N * count) : 0.0;
  out.loss_bc = bc_active ? bc_sum / (static_cast<double>(L) * N * demo_count) : 0.0;
  out.mean_q = q_sum / (static_cast<double>(L) * N * count);
  return out;
}

double CqnAgent::rl_loss(const std::vector<BatchItem>& batch) const {
  return eval_batch(batch, true, std::nullopt, nullptr).loss_rl;
}

double CqnAgent::bc_margin_loss(const std::vector<BatchItem>& batch) const {
  return eval_batch(batch, false, BcVariant::margin, nullptr).loss_bc;
}

double CqnAgent::bc_dominance_loss(const std::vector<BatchItem>& batch) const {
  return eval_batch(batch, false, BcVariant::dominance, nullptr).loss_bc;
}

double CqnAgent::total_loss(const std::vector<BatchItem>& batch) const {
  const bool with_rl = cfg_.lambda_rl != 0.0;
  const auto bc =
      cfg_.lambda_bc != 0.0 ? std::optional<BcVariant>(cfg_.bc_variant) : std::nullopt;
  const BatchEval ev = eval_batch(batch, with_rl, bc, nullptr);
  return cfg_.lambda_rl * ev.loss_rl + cfg_.lambda_bc * ev.loss_bc;
}

Eigen::VectorXd CqnAgent::total_loss_gradient(const std::vector<BatchItem>& batch) const {
  GradientStore grad(online_);
  const bool with_rl = cfg_.lambda_rl != 0.0;
  const auto bc =
      cfg_.lambda_bc != 0.0 ? std::optional<BcVariant>(cfg_.bc_variant) : std::nullopt;
  eval_batch(batch, with_rl, bc, &grad);
  return grad.flat();
}

TrainStepMetrics CqnAgent::train_on_batch(const std::vector<BatchItem>& batch) {
  if (batch.empty()) return {};
  GradientStore grad(online_);
  const bool with_rl = cfg_.lambda_rl != 0.0;
  const auto bc =
      cfg_.lambda_bc != 0.0 ? std::optional<BcVariant>(cfg_.bc_variant) : std::nullopt;
  const BatchEval ev = eval_batch(batch, with_rl, bc, &grad);
  opt_.update(online_, grad);
  polyak_update(target_, online_, cfg_.tau);
  return {ev.loss_rl, ev.loss_bc, ev.mean_q};
}

TrainStepMetrics CqnAgent::train_step(ReplayBuffer& online_buffer, ReplayBuffer* demo_buffer) {
  std::vector<BatchItem> batch;
  if (demo_buffer && demo_buffer->size() > 0) {
    batch = sample_batch(online_buffer, *demo_buffer, cfg_.batch_size_each);
  } else {
    batch = online_buffer.sample(2 * cfg_.batch_size_each);
  }
  return train_on_batch(batch);
}

EvalReport CqnAgent::evaluate(Env& env, int episodes, std::uint64_t seed) const {
  if (episodes <= 0) throw std::invalid_argument("evaluate: no episodes");
  double successes = 0.0, total_return = 0.0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<Eigen::VectorXd> hist{env.reset(mix_seed(seed, e))};
    double ep_return = 0.0, last_reward = 0.0;
    for (int t = 0; t < env.spec().max_episode_steps; ++t) {
      const ActionDecision dec = greedy_action(target_, stack_history(hist, cfg_.history));
      const StepResult sr = env.step(scaler_.invert(dec.action));
      ep_return += sr.reward;
      last_reward = sr.reward;
      hist.push_back(sr.obs);
      if (sr.done) break;
    }
    total_return += ep_return;
    if (last_reward == 1.0) successes += 1.0;
  }
  return {successes / episodes, total_return / episodes};
}

namespace {
constexpr const char* kCkptHeader = "c2fq-ckpt v1";

void write_blob(std::ofstream& out, const Eigen::VectorXd& v) {
  const std::uint64_t n = static_cast<std::uint64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

Eigen::VectorXd read_blob(std::ifstream& in, const std::string& path) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated: " + path);
  return v;
}
}  // namespace

void CqnAgent::save(const std::string& path, long step, const std::string& env_id) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << kCkptHeader << "\n";
  json meta;
  meta["env_id"] = env_id;
  meta["step"] = step;
  meta["raw_obs_dim"] = net_.spec().obs_dim / cfg_.history;
  meta["config"] = cfg_;
  meta["scaler"]["low"] = eigen_to_json(scaler_.low);
  meta["scaler"]["high"] = eigen_to_json(scaler_.high);
  meta["adam_step"] = opt_.step;
  std::ostringstream rng_state;
  rng_state << noise_rng_;
  meta["noise_rng"] = rng_state.str();
  out << meta.dump() << "\n";
  write_blob(out, online_.flat());
  write_blob(out, target_.flat());
  write_blob(out, opt_.m);
  write_blob(out, opt_.v);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

CqnAgent CqnAgent::load(const std::string& path, long* step_out, std::string* env_id_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string version;
  std::getline(in, version);
  if (version != kCkptHeader)
    throw std::runtime_error("checkpoint version mismatch: file has \"" + version +
                             "\", this build reads \"" + kCkptHeader + "\"");
  std::string meta_line;
  std::getline(in, meta_line);
  json meta = json::parse(meta_line);

  const AgentConfig cfg = meta.at("config").get<AgentConfig>();
  CqnAgent agent(cfg, meta.at("raw_obs_dim").get<int>());
  ActionScaler scaler;
  scaler.low = eigen_from_json(meta.at("scaler").at("low"));
  scaler.high = eigen_from_json(meta.at("scaler").at("high"));
  agent.set_scaler(scaler);

  Eigen::VectorXd theta = read_blob(in, path);
  Eigen::VectorXd theta_bar = read_blob(in, path);
  Eigen::VectorXd m = read_blob(in, path);
  Eigen::VectorXd v = read_blob(in, path);
  if (theta.size() != agent.online_.size() || theta_bar.size() != agent.target_.size() ||
      m.size() != agent.opt_.m.size() || v.size() != agent.opt_.v.size())
    throw std::runtime_error("checkpoint parameter shapes do not match its config: " + path);
  agent.online_.flat() = std::move(theta);
  agent.target_.flat() = std::move(theta_bar);
  agent.opt_.m = std::move(m);
  agent.opt_.v = std::move(v);
  agent.opt_.step = meta.at("adam_step").get<long>();
  std::istringstream rng_state(meta.at("noise_rng").get<std::string>());
  rng_state >> agent.noise_rng_;

  if (step_out) *step_out = meta.at("step").get<long>();
  if (env_id_out) *env_id_out = meta.at("env_id").get<std::string>();
  return agent;
}

TrainResult run_training(Env& env, Env& eval_env, const AgentConfig& config,
                         const std::vector<Episode>& raw_demos, const TrainRun& run,
                         const TrainHooks& hooks) {
  config.validate();
  if (env.spec().action_dim != config.dims)
    throw std::invalid_argument("run_training: config dims do not match the environment");

  CqnAgent agent(config, env.spec().obs_dim);
  ReplayBuffer online_buffer(config.buffer_capacity, config.n_step, config.gamma,
                             mix_seed(config.seed, 0xb0ff), false);
  ReplayBuffer demo_buffer(0, config.n_step, config.gamma, mix_seed(config.seed, 0xde30),
                           true);
  if (!raw_demos.empty()) {
    agent.set_scaler(fit_scaler(raw_demos));
    for (const Episode& ep : raw_demos) demo_buffer.push_episode(stack_episode(ep, config.history));
  }

  const auto t_start = std::chrono::steady_clock::now();
  auto wall_seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  long episode_index = 0;
  std::deque<double> success_window;
  Episode current;
  std::vector<Eigen::VectorXd> hist{env.reset(mix_seed(config.seed, 0xe9000 + episode_index))};

  double acc_rl = 0.0, acc_bc = 0.0, acc_q = 0.0;
  long acc_n = 0;
  EvalReport last_eval{};
  long last_emit_step = -1;

  auto emit = [&](long step) {
    last_eval = agent.evaluate(eval_env, run.eval_episodes,
                               mix_seed(mix_seed(config.seed, 0xea1c), step));
    MetricsRecord rec;
    rec.step = step;
    rec.episode = episode_index;
    double mean_success = 0.0;
    for (double s : success_window) mean_success += s;
    rec.train_success_mean =
        success_window.empty() ? 0.0 : mean_success / success_window.size();
    rec.eval_success = last_eval.success_rate;
    rec.eval_return = last_eval.mean_return;
    rec.loss_rl = acc_n ? acc_rl / acc_n : 0.0;
    rec.loss_bc = acc_n ? acc_bc / acc_n : 0.0;
    rec.mean_q = acc_n ? acc_q / acc_n : 0.0;
    rec.wall_seconds = wall_seconds();
    rec.seed = config.seed;
    if (hooks.on_metrics) hooks.on_metrics(rec);
    acc_rl = acc_bc = acc_q = 0.0;
    acc_n = 0;
    last_emit_step = step;
  };

  long step = 0;
  try {
    for (step = 1; step <= run.total_steps; ++step) {
      const Eigen::VectorXd stacked = stack_history(hist, config.history);
      const ActionDecision dec = agent.select_action(stacked, CqnAgent::Mode::train);
      const Eigen::VectorXd env_action = agent.scaler().invert(dec.action);
      const StepResult sr = env.step(env_action);

      Transition tr;
      tr.obs = stacked;
      tr.action = env_action;
      tr.reward = sr.reward;
      tr.done = sr.done;
      hist.push_back(sr.obs);
      tr.next_obs = stack_history(hist, config.history);
      current.transitions.push_back(std::move(tr));

      if (sr.done) {
        current.success = sr.reward == 1.0;
        online_buffer.push_episode(current);
        relabel_success(current, demo_buffer);
        success_window.push_back(current.success ? 1.0 : 0.0);
        if (success_window.size() > 20) success_window.pop_front();
        ++episode_index;
        current = Episode{};
        hist = {env.reset(mix_seed(config.seed, 0xe9000 + episode_index))};
      }

      if (online_buffer.size() > 0) {
        const TrainStepMetrics m =
            agent.train_step(online_buffer, demo_buffer.size() ? &demo_buffer : nullptr);
        acc_rl += m.loss_rl;
        acc_bc += m.loss_bc;
        acc_q += m.mean_q;
        ++acc_n;
      }

      if (run.eval_interval > 0 && step % run.eval_interval == 0) emit(step);
      if (run.ckpt_interval > 0 && step % run.ckpt_interval == 0 && hooks.on_checkpoint)
        hooks.on_checkpoint(agent, step);
    }
  } catch (...) {
    // Environment or training failure: leave a checkpoint behind.
    if (hooks.on_checkpoint) hooks.on_checkpoint(agent, step);
    throw;
  }

  if (last_emit_step != run.total_steps) emit(run.total_steps);
  if (hooks.on_checkpoint) hooks.on_checkpoint(agent, run.total_steps);

  return {last_eval.success_rate, last_eval.mean_return, episode_index};
}

}  // namespace c2fq

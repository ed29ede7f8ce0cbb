#include "c2fq/critic.hpp"

#include <stdexcept>

namespace c2fq {

void CriticSpec::validate() const {
  if (obs_dim < 1) throw std::invalid_argument("critic: obs_dim must be >= 1");
  if (levels < 1 || dims < 1 || bins < 2) throw std::invalid_argument("critic: bad lattice");
  if (encoder_widths.empty() || trunk_widths.empty())
    throw std::invalid_argument("critic: need at least one hidden layer");
  if (distributional && num_atoms < 2) throw std::invalid_argument("critic: bad atom count");
}

CriticNetwork::CriticNetwork(CriticSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  auto layout = std::make_shared<ParamLayout>();

  auto add_block = [&](const std::string& name, int in, int out) {
    DenseBlock b;
    b.in = in;
    b.out = out;
    b.w = layout->add(name + ".w", out, in, /*weight_decay=*/true);
    b.gain = layout->add(name + ".ln_gain", out, 1, false);
    b.bias = layout->add(name + ".ln_bias", out, 1, false);
    return b;
  };

  int in = spec_.obs_dim;
  for (size_t i = 0; i < spec_.encoder_widths.size(); ++i) {
    encoder_.blocks.push_back(add_block("enc" + std::to_string(i), in, spec_.encoder_widths[i]));
    in = spec_.encoder_widths[i];
  }
  in = spec_.trunk_input_dim();
  for (size_t i = 0; i < spec_.trunk_widths.size(); ++i) {
    trunk_.blocks.push_back(add_block("trunk" + std::to_string(i), in, spec_.trunk_widths[i]));
    in = spec_.trunk_widths[i];
  }
  for (int n = 0; n < spec_.dims; ++n) {
    LinearHead h;
    h.in = in;
    h.out = spec_.head_out_dim();
    h.w = layout->add("head" + std::to_string(n) + ".w", h.out, h.in, true);
    h.b = layout->add("head" + std::to_string(n) + ".b", h.out, 1, false);
    heads_.push_back(h);
  }
  layout_ = std::move(layout);
}

ParameterStore CriticNetwork::init_params(std::uint64_t seed) const {
  ParameterStore p(layout_);
  std::uint64_t salt = 0;
  for (const auto& b : encoder_.blocks) {
    init_uniform(p, b.w, seed ^ (0x9e3779b97f4a7c15ULL * ++salt));
    p.vector(b.gain).setOnes();
  }
  for (const auto& b : trunk_.blocks) {
    init_uniform(p, b.w, seed ^ (0x9e3779b97f4a7c15ULL * ++salt));
    p.vector(b.gain).setOnes();
  }
  // Small head weights keep the initial value distributions near uniform
  // while still breaking exact Q ties between bins.
  for (const auto& h : heads_) {
    init_uniform(p, h.w, seed ^ (0x9e3779b97f4a7c15ULL * ++salt));
    p.matrix(h.w) *= 0.01;
  }
  return p;
}

Eigen::MatrixXd CriticNetwork::encode(const ParameterStore& p, const Eigen::MatrixXd& obs,
                                      EncoderCache* cache) const {
  if (obs.cols() != spec_.obs_dim)
    throw std::invalid_argument("critic encode: observation width mismatch");
  return encoder_.forward(p, obs, cache ? &cache->mlp : nullptr);
}

void CriticNetwork::encode_backward(const ParameterStore& p, const EncoderCache& cache,
                                    const Eigen::MatrixXd& dfeatures,
                                    GradientStore& grad) const {
  encoder_.backward(p, cache.mlp, dfeatures, grad);
}

Eigen::MatrixXd CriticNetwork::level_forward(const ParameterStore& p,
                                             const Eigen::MatrixXd& features, int level,
                                             const Eigen::MatrixXd& prev_actions,
                                             LevelCache* cache) const {
  const Eigen::Index batch = features.rows();
  if (level < 1 || level > spec_.levels)
    throw std::invalid_argument("critic: level out of range");
  if (features.cols() != spec_.feature_dim() || prev_actions.cols() != spec_.dims ||
      prev_actions.rows() != batch)
    throw std::invalid_argument("critic: level input shape mismatch");

  Eigen::MatrixXd x(batch, spec_.trunk_input_dim());
  x.leftCols(spec_.feature_dim()) = features;
  x.middleCols(spec_.feature_dim(), spec_.levels).setZero();
  x.col(spec_.feature_dim() + level - 1).setOnes();
  x.rightCols(spec_.dims) = prev_actions;

  MlpStack::Cache* trunk_cache = nullptr;
  if (cache) {
    cache->trunk_in = x;
    trunk_cache = &cache->trunk;
  }
  Eigen::MatrixXd t = trunk_.forward(p, x, trunk_cache);
  if (cache) cache->trunk_out = t;

  const int K = spec_.atoms();
  const int B = spec_.bins;
  Eigen::MatrixXd logits(batch, static_cast<Eigen::Index>(spec_.dims) * B * K);
  for (int n = 0; n < spec_.dims; ++n) {
    Eigen::MatrixXd o = linear_head_forward(p, heads_[n], t);
    auto value = o.leftCols(K);
    auto adv = o.rightCols(static_cast<Eigen::Index>(B) * K);
    Eigen::MatrixXd adv_mean = Eigen::MatrixXd::Zero(batch, K);
    for (int b = 0; b < B; ++b) adv_mean += adv.middleCols(static_cast<Eigen::Index>(b) * K, K);
    adv_mean /= B;
    for (int b = 0; b < B; ++b) {
      logits.middleCols(logit_offset(n, b), K) =
          value + adv.middleCols(static_cast<Eigen::Index>(b) * K, K) - adv_mean;
    }
  }
  return logits;
}

Eigen::MatrixXd CriticNetwork::level_backward(const ParameterStore& p, const LevelCache& cache,
                                              const Eigen::MatrixXd& dlogits,
                                              GradientStore& grad) const {
  const Eigen::Index batch = dlogits.rows();
  const int K = spec_.atoms();
  const int B = spec_.bins;

  Eigen::MatrixXd dtrunk_out = Eigen::MatrixXd::Zero(batch, cache.trunk_out.cols());
  for (int n = 0; n < spec_.dims; ++n) {
    Eigen::MatrixXd dhead(batch, spec_.head_out_dim());
    auto dvalue = dhead.leftCols(K);
    auto dadv = dhead.rightCols(static_cast<Eigen::Index>(B) * K);

    Eigen::MatrixXd g_mean = Eigen::MatrixXd::Zero(batch, K);  // mean_b dlogits(b, :)
    dvalue.setZero();
    for (int b = 0; b < B; ++b) {
      auto g = dlogits.middleCols(logit_offset(n, b), K);
      dvalue += g;
      g_mean += g;
    }
    g_mean /= B;
    for (int b = 0; b < B; ++b) {
      dadv.middleCols(static_cast<Eigen::Index>(b) * K, K) =
          dlogits.middleCols(logit_offset(n, b), K) - g_mean;
    }
    dtrunk_out += linear_head_backward(p, heads_[n], cache.trunk_out, dhead, grad);
  }

  Eigen::MatrixXd dx = trunk_.backward(p, cache.trunk, dtrunk_out, grad);
  return dx.leftCols(spec_.feature_dim());
}

void polyak_update(ParameterStore& target, const ParameterStore& online, double tau) {
  if (target.size() != online.size())
    throw std::invalid_argument("polyak_update: shape mismatch");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak_update: bad tau");
  target.flat() = (1.0 - tau) * target.flat() + tau * online.flat();
}

Eigen::VectorXd q_values(const Eigen::MatrixXd& logits_bins_by_atoms, const SupportGrid& g) {
  if (logits_bins_by_atoms.cols() != g.num_atoms)
    throw std::invalid_argument("q_values: atom count mismatch");
  Eigen::VectorXd q(logits_bins_by_atoms.rows());
  for (Eigen::Index b = 0; b < logits_bins_by_atoms.rows(); ++b) {
    q[b] = dist_mean(softmax(logits_bins_by_atoms.row(b).transpose()), g);
  }
  return q;
}

}  // namespace c2fq

#include "c2fq/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace c2fq {

namespace {
constexpr double kLayerNormEps = 1e-5;

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}
}  // namespace

int ParamLayout::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                     bool weight_decay) {
  Segment s;
  s.name = name;
  s.offset = total;
  s.rows = rows;
  s.cols = cols;
  s.weight_decay = weight_decay;
  segments.push_back(s);
  total += rows * cols;
  return static_cast<int>(segments.size()) - 1;
}

Eigen::VectorXd ParamLayout::decay_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(total);
  for (const auto& s : segments) {
    if (s.weight_decay) mask.segment(s.offset, s.rows * s.cols).setOnes();
  }
  return mask;
}

Eigen::MatrixXd dense_block_forward(const ParameterStore& p, const DenseBlock& b,
                                    const Eigen::MatrixXd& x, DenseBlockCache* cache) {
  if (x.cols() != b.in) throw std::invalid_argument("dense block: input width mismatch");
  const auto W = p.matrix(b.w);
  const auto gain = p.vector(b.gain);
  const auto bias = p.vector(b.bias);

  Eigen::MatrixXd z = x * W.transpose();

  // Per-row layer normalization.
  const Eigen::VectorXd mu = z.rowwise().mean();
  z.colwise() -= mu;
  Eigen::VectorXd inv_std =
      ((z.array().square().rowwise().mean() + kLayerNormEps).sqrt()).inverse();
  Eigen::MatrixXd xhat = z.array().colwise() * inv_std.array();

  Eigen::MatrixXd preact =
      (xhat.array().rowwise() * gain.transpose().array()).rowwise() +
      bias.transpose().array();
  Eigen::MatrixXd y = preact.unaryExpr([](double v) { return silu(v); });

  if (cache) {
    cache->x = x;
    cache->xhat = std::move(xhat);
    cache->preact = std::move(preact);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Eigen::MatrixXd dense_block_backward(const ParameterStore& p, const DenseBlock& b,
                                     const DenseBlockCache& cache, const Eigen::MatrixXd& dy,
                                     GradientStore& grad) {
  const auto W = p.matrix(b.w);
  const auto gain = p.vector(b.gain);

  // SiLU
  Eigen::MatrixXd dpre =
      dy.array() * cache.preact.unaryExpr([](double v) { return silu_grad(v); }).array();

  // Affine
  grad.vector(b.gain) += (dpre.array() * cache.xhat.array()).colwise().sum().matrix();
  grad.vector(b.bias) += dpre.colwise().sum();
  Eigen::MatrixXd dxhat = dpre.array().rowwise() * gain.transpose().array();

  // LayerNorm: dz = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
  const Eigen::VectorXd m1 = dxhat.rowwise().mean();
  const Eigen::VectorXd m2 = (dxhat.array() * cache.xhat.array()).rowwise().mean();
  Eigen::MatrixXd dz =
      ((dxhat.colwise() - m1).array() - (cache.xhat.array().colwise() * m2.array()))
          .colwise() *
      cache.inv_std.array();

  grad.matrix(b.w) += dz.transpose() * cache.x;
  return dz * W;
}

Eigen::MatrixXd MlpStack::forward(const ParameterStore& p, const Eigen::MatrixXd& x,
                                  Cache* cache) const {
  if (cache) cache->blocks.resize(blocks.size());
  Eigen::MatrixXd h = x;
  for (size_t i = 0; i < blocks.size(); ++i) {
    h = dense_block_forward(p, blocks[i], h, cache ? &cache->blocks[i] : nullptr);
  }
  return h;
}

Eigen::MatrixXd MlpStack::backward(const ParameterStore& p, const Cache& cache,
                                   const Eigen::MatrixXd& dy, GradientStore& grad) const {
  Eigen::MatrixXd d = dy;
  for (size_t i = blocks.size(); i-- > 0;) {
    d = dense_block_backward(p, blocks[i], cache.blocks[i], d, grad);
  }
  return d;
}

Eigen::MatrixXd linear_head_forward(const ParameterStore& p, const LinearHead& h,
                                    const Eigen::MatrixXd& x) {
  return (x * p.matrix(h.w).transpose()).rowwise() + p.vector(h.b).transpose();
}

Eigen::MatrixXd linear_head_backward(const ParameterStore& p, const LinearHead& h,
                                     const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy,
                                     GradientStore& grad) {
  grad.matrix(h.w) += dy.transpose() * x;
  grad.vector(h.b) += dy.colwise().sum();
  return dy * p.matrix(h.w);
}

AdamW::AdamW(const ParameterStore& params, double lr_, double weight_decay_)
    : lr(lr_),
      weight_decay(weight_decay_),
      m(Eigen::VectorXd::Zero(params.size())),
      v(Eigen::VectorXd::Zero(params.size())),
      decay_mask(params.layout().decay_mask()) {}

void AdamW::update(ParameterStore& params, const GradientStore& grad) {
  ++step;
  const Eigen::VectorXd& g = grad.flat();
  m = beta1 * m + (1.0 - beta1) * g;
  v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(beta1, step);
  const double bc2 = 1.0 - std::pow(beta2, step);
  Eigen::VectorXd mhat = m / bc1;
  Eigen::VectorXd vhat = v / bc2;
  params.flat().array() -=
      lr * (mhat.array() / (vhat.array().sqrt() + eps) +
            weight_decay * decay_mask.array() * params.flat().array());
}

void init_uniform(ParameterStore& params, int segment, std::uint64_t seed) {
  auto seg = params.matrix(segment);
  const double bound = 1.0 / std::sqrt(static_cast<double>(seg.cols()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < seg.cols(); ++j)
    for (Eigen::Index i = 0; i < seg.rows(); ++i) seg(i, j) = dist(rng);
}

}  // namespace c2fq

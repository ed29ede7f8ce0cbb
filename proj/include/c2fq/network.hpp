#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace c2fq {

/// All trainable parameters of a network live in one flat vector; named
/// segments are viewed as matrices. Polyak averaging, AdamW, checkpointing
/// and finite-difference checks then reduce to plain vector arithmetic.
struct ParamLayout {
  struct Segment {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool weight_decay = false;
  };
  std::vector<Segment> segments;
  Eigen::Index total = 0;

  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool weight_decay);
  Eigen::VectorXd decay_mask() const;
};

class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(std::shared_ptr<const ParamLayout> layout)
      : layout_(std::move(layout)), flat_(Eigen::VectorXd::Zero(layout_->total)) {}

  Eigen::Map<Eigen::MatrixXd> matrix(int id) {
    const auto& s = layout_->segments[id];
    return {flat_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Eigen::MatrixXd> matrix(int id) const {
    const auto& s = layout_->segments[id];
    return {flat_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<Eigen::VectorXd> vector(int id) {
    const auto& s = layout_->segments[id];
    return {flat_.data() + s.offset, s.rows * s.cols};
  }
  Eigen::Map<const Eigen::VectorXd> vector(int id) const {
    const auto& s = layout_->segments[id];
    return {flat_.data() + s.offset, s.rows * s.cols};
  }

  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }
  Eigen::Index size() const { return flat_.size(); }
  const ParamLayout& layout() const { return *layout_; }
  std::shared_ptr<const ParamLayout> layout_ptr() const { return layout_; }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  Eigen::VectorXd flat_;
};

/// Gradient accumulator with the same layout as a ParameterStore.
class GradientStore {
 public:
  explicit GradientStore(const ParameterStore& params)
      : layout_(params.layout_ptr()), flat_(Eigen::VectorXd::Zero(params.size())) {}

  Eigen::Map<Eigen::MatrixXd> matrix(int id) {
    const auto& s = layout_->segments[id];
    return {flat_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<Eigen::VectorXd> vector(int id) {
    const auto& s = layout_->segments[id];
    return {flat_.data() + s.offset, s.rows * s.cols};
  }
  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }
  void clear() { flat_.setZero(); }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  Eigen::VectorXd flat_;
};

// Activations are matrices with one row per batch item.

/// Linear (no bias) -> LayerNorm (affine) -> SiLU.
struct DenseBlock {
  int w = -1;     // out x in
  int gain = -1;  // layer-norm gain, length out
  int bias = -1;  // layer-norm bias, length out
  Eigen::Index in = 0;
  Eigen::Index out = 0;
};

struct DenseBlockCache {
  Eigen::MatrixXd x;        // input
  Eigen::MatrixXd xhat;     // normalized pre-affine
  Eigen::MatrixXd preact;   // after affine, before SiLU
  Eigen::VectorXd inv_std;  // per-row 1/sqrt(var + eps)
};

Eigen::MatrixXd dense_block_forward(const ParameterStore& p, const DenseBlock& b,
                                    const Eigen::MatrixXd& x, DenseBlockCache* cache);
Eigen::MatrixXd dense_block_backward(const ParameterStore& p, const DenseBlock& b,
                                     const DenseBlockCache& cache, const Eigen::MatrixXd& dy,
                                     GradientStore& grad);

struct MlpStack {
  std::vector<DenseBlock> blocks;

  struct Cache {
    std::vector<DenseBlockCache> blocks;
  };

  Eigen::MatrixXd forward(const ParameterStore& p, const Eigen::MatrixXd& x,
                          Cache* cache) const;
  Eigen::MatrixXd backward(const ParameterStore& p, const Cache& cache,
                           const Eigen::MatrixXd& dy, GradientStore& grad) const;
};

/// Plain affine output layer.
struct LinearHead {
  int w = -1;  // out x in
  int b = -1;  // length out
  Eigen::Index in = 0;
  Eigen::Index out = 0;
};

Eigen::MatrixXd linear_head_forward(const ParameterStore& p, const LinearHead& h,
                                    const Eigen::MatrixXd& x);
Eigen::MatrixXd linear_head_backward(const ParameterStore& p, const LinearHead& h,
                                     const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy,
                                     GradientStore& grad);

/// Decoupled weight decay Adam. Decay applies only where the layout's
/// weight_decay flag is set (trunk and head weights, not norm gains/biases).
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParameterStore& params, double lr, double weight_decay);

  void update(ParameterStore& params, const GradientStore& grad);

  double lr = 5e-5;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  Eigen::VectorXd decay_mask;
};

// He/LeCun style uniform init for hidden weights; heads are zero-initialized
// by the caller. Deterministic per seed.
void init_uniform(ParameterStore& params, int segment, std::uint64_t seed);

}  // namespace c2fq

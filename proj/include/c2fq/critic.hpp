#pragma once

#include "c2fq/distribution.hpp"
#include "c2fq/network.hpp"

#include <cstdint>
#include <vector>

namespace c2fq {

/// Shape of the coarse-to-fine critic. A state encoder produces features
/// from the (history-stacked) observation; a shared trunk consumes
/// (features, one-hot level, previous-level action); one linear head per
/// action dimension emits dueling value/advantage logits over the atoms.
/// With `distributional` off the heads emit one scalar per bin instead.
struct CriticSpec {
  int obs_dim = 0;
  std::vector<int> encoder_widths{64, 512, 512};
  std::vector<int> trunk_widths{512};
  int levels = 3;
  int dims = 1;
  int bins = 5;
  int num_atoms = 51;
  bool distributional = true;

  int atoms() const { return distributional ? num_atoms : 1; }
  int feature_dim() const { return encoder_widths.back(); }
  int trunk_input_dim() const { return feature_dim() + levels + dims; }
  int head_out_dim() const { return atoms() * (1 + bins); }  // value K + advantage B*K
  int logits_per_dim() const { return bins * atoms(); }
  void validate() const;
};

class CriticNetwork {
 public:
  explicit CriticNetwork(CriticSpec spec);

  /// Fresh parameters: hidden weights uniform per seed, norm gains one,
  /// final heads zero (so initial distributions are uniform over atoms).
  ParameterStore init_params(std::uint64_t seed) const;

  struct EncoderCache {
    MlpStack::Cache mlp;
  };
  struct LevelCache {
    MlpStack::Cache trunk;
    Eigen::MatrixXd trunk_in;
    Eigen::MatrixXd trunk_out;
  };

  // Observations, features and actions are row-per-item matrices.
  Eigen::MatrixXd encode(const ParameterStore& p, const Eigen::MatrixXd& obs,
                         EncoderCache* cache = nullptr) const;
  void encode_backward(const ParameterStore& p, const EncoderCache& cache,
                       const Eigen::MatrixXd& dfeatures, GradientStore& grad) const;

  /// Dueling logits for one level: (batch, dims*bins*atoms), column base
  /// for (dim, bin) given by logit_offset. `level` is 1-based.
  Eigen::MatrixXd level_forward(const ParameterStore& p, const Eigen::MatrixXd& features,
                                int level, const Eigen::MatrixXd& prev_actions,
                                LevelCache* cache = nullptr) const;
  /// Returns d(features); accumulates parameter gradients.
  Eigen::MatrixXd level_backward(const ParameterStore& p, const LevelCache& cache,
                                 const Eigen::MatrixXd& dlogits, GradientStore& grad) const;

  Eigen::Index logit_offset(int dim, int bin) const {
    return static_cast<Eigen::Index>(dim) * spec_.logits_per_dim() + bin * spec_.atoms();
  }

  const CriticSpec& spec() const { return spec_; }
  std::shared_ptr<const ParamLayout> layout() const { return layout_; }

 private:
  CriticSpec spec_;
  std::shared_ptr<const ParamLayout> layout_;
  MlpStack encoder_;
  MlpStack trunk_;
  std::vector<LinearHead> heads_;
};

/// theta_bar <- (1 - tau) * theta_bar + tau * theta
void polyak_update(ParameterStore& target, const ParameterStore& online, double tau);

/// Scalar Q per bin from dueling logits of one dimension (bins x atoms):
/// mean of the per-bin softmax distribution over the support.
Eigen::VectorXd q_values(const Eigen::MatrixXd& logits_bins_by_atoms, const SupportGrid& g);

}  // namespace c2fq

#pragma once

#include <cstdint>

namespace c2fq {

/// One evaluation point of a training run; serialized as a JSON line.
struct MetricsRecord {
  long step = 0;
  long episode = 0;
  double train_success_mean = 0.0;  // running mean over recent train episodes
  double eval_success = 0.0;
  double eval_return = 0.0;
  double loss_rl = 0.0;
  double loss_bc = 0.0;
  double mean_q = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

}  // namespace c2fq

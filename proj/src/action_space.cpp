#include "c2fq/action_space.hpp"

#include <cmath>
#include <stdexcept>

namespace c2fq {

ActionSpaceSpec ActionSpaceSpec::make(int dims, int levels, int bins) {
  return make(dims, levels, bins, Eigen::VectorXd::Constant(dims, -1.0),
              Eigen::VectorXd::Constant(dims, 1.0));
}

ActionSpaceSpec ActionSpaceSpec::make(int dims, int levels, int bins,
                                      const Eigen::VectorXd& low,
                                      const Eigen::VectorXd& high) {
  ActionSpaceSpec spec;
  spec.dims = dims;
  spec.levels = levels;
  spec.bins = bins;
  spec.low = low;
  spec.high = high;
  spec.validate();
  return spec;
}

void ActionSpaceSpec::validate() const {
  if (dims < 1) throw std::invalid_argument("action space: dims must be >= 1");
  if (levels < 1) throw std::invalid_argument("action space: levels must be >= 1");
  if (bins < 2) throw std::invalid_argument("action space: bins must be >= 2");
  if (low.size() != dims || high.size() != dims)
    throw std::invalid_argument("action space: bounds size mismatch");
  for (int n = 0; n < dims; ++n) {
    if (!(low[n] < high[n]))
      throw std::invalid_argument("action space: low must be < high per dimension");
  }
}

std::vector<Interval> partition_interval(const Interval& iv, int bins) {
  if (bins < 2) throw std::invalid_argument("partition_interval: bins must be >= 2");
  if (!(iv.low < iv.high)) throw std::invalid_argument("partition_interval: empty interval");
  const double w = iv.width() / bins;
  std::vector<Interval> out(static_cast<size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    out[k].low = iv.low + k * w;
    out[k].high = (k + 1 == bins) ? iv.high : iv.low + (k + 1) * w;
  }
  return out;
}

Interval zoom_interval(const Interval& iv, int bin_index, int bins) {
  if (bins < 2) throw std::invalid_argument("zoom_interval: bins must be >= 2");
  if (!(iv.low < iv.high)) throw std::invalid_argument("zoom_interval: empty interval");
  if (bin_index < 0 || bin_index >= bins)
    throw std::out_of_range("zoom_interval: bin_index out of range");
  const double w = iv.width() / bins;
  Interval out;
  out.low = iv.low + bin_index * w;
  out.high = (bin_index + 1 == bins) ? iv.high : iv.low + (bin_index + 1) * w;
  return out;
}

namespace {

// Containing bin of `a` in the uniform partition of `iv`; half-open bins,
// top bin closed. Float rounding in the division is corrected against the
// actual bin edges so the returned bin always contains `a`.
int containing_bin(const Interval& iv, double a, int bins) {
  const double w = iv.width() / bins;
  int k = static_cast<int>(std::floor((a - iv.low) / w));
  k = std::max(0, std::min(bins - 1, k));
  if (k > 0 && a < iv.low + k * w) {
    --k;
  } else if (k + 1 < bins && a >= iv.low + (k + 1) * w) {
    ++k;
  }
  return k;
}

}  // namespace

BinPath encode_action(const Eigen::VectorXd& action, const ActionSpaceSpec& spec) {
  spec.validate();
  if (action.size() != spec.dims)
    throw std::invalid_argument("encode_action: action size mismatch");
  if (!action.allFinite()) throw std::invalid_argument("encode_action: non-finite action");

  BinPath path(spec.levels, spec.dims);
  for (int n = 0; n < spec.dims; ++n) {
    Interval iv = spec.bounds(n);
    const double a = std::min(std::max(action[n], iv.low), iv.high);
    for (int l = 0; l < spec.levels; ++l) {
      const int k = containing_bin(iv, a, spec.bins);
      path(l, n) = k;
      iv = zoom_interval(iv, k, spec.bins);
    }
  }
  return path;
}

LevelActions decode_path(const BinPath& path, const ActionSpaceSpec& spec) {
  spec.validate();
  if (path.rows() != spec.levels || path.cols() != spec.dims)
    throw std::invalid_argument("decode_path: path shape mismatch");

  LevelActions out;
  out.actions.resize(spec.levels, spec.dims);
  for (int n = 0; n < spec.dims; ++n) {
    Interval iv = spec.bounds(n);
    for (int l = 0; l < spec.levels; ++l) {
      iv = zoom_interval(iv, path(l, n), spec.bins);
      out.actions(l, n) = iv.centroid();
    }
  }
  return out;
}

Eigen::VectorXd final_precision(const ActionSpaceSpec& spec) {
  spec.validate();
  return (spec.high - spec.low) / std::pow(spec.bins, spec.levels);
}

}  // namespace c2fq

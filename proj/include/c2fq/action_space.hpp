#pragma once

#include <Eigen/Dense>

#include <vector>

namespace c2fq {

struct Interval {
  double low = -1.0;
  double high = 1.0;

  double width() const { return high - low; }
  double centroid() const { return 0.5 * (low + high); }
  bool contains(double x) const { return x >= low && x <= high; }
};

/// Coarse-to-fine lattice over a box action space: `levels` rounds of
/// splitting each per-dimension interval into `bins` uniform pieces.
struct ActionSpaceSpec {
  int dims = 1;
  int levels = 1;
  int bins = 2;
  Eigen::VectorXd low;   // per-dimension lower bounds
  Eigen::VectorXd high;  // per-dimension upper bounds

  static ActionSpaceSpec make(int dims, int levels, int bins);
  static ActionSpaceSpec make(int dims, int levels, int bins,
                              const Eigen::VectorXd& low,
                              const Eigen::VectorXd& high);

  Interval bounds(int dim) const { return {low[dim], high[dim]}; }
  void validate() const;  // throws std::invalid_argument on a bad spec
};

// Bin indices per (level, dim); the discrete identity of a continuous action.
using BinPath = Eigen::MatrixXi;

/// Centroids selected at each level, one row per level. The level-0 action
/// is defined as the zero vector and is not stored.
struct LevelActions {
  Eigen::MatrixXd actions;  // levels x dims

  // Conditioning input for level `level` (1-based): the previous level's
  // action, i.e. zeros for level 1.
  Eigen::VectorXd prev(int level) const {
    if (level <= 1) return Eigen::VectorXd::Zero(actions.cols());
    return actions.row(level - 2);
  }
  Eigen::VectorXd last() const { return actions.row(actions.rows() - 1); }
};

std::vector<Interval> partition_interval(const Interval& iv, int bins);
Interval zoom_interval(const Interval& iv, int bin_index, int bins);

// Digit extraction by repeated zoom; inputs are clamped to the bounds first.
// Bins are half-open [lo, hi) with the top bin closed.
BinPath encode_action(const Eigen::VectorXd& action, const ActionSpaceSpec& spec);
LevelActions decode_path(const BinPath& path, const ActionSpaceSpec& spec);

// Per-dimension width of a final-level bin: (high - low) / bins^levels.
Eigen::VectorXd final_precision(const ActionSpaceSpec& spec);

}  // namespace c2fq

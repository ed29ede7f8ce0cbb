#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace c2fq {

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;  // executed continuous action in environment units
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool done = false;
  bool is_demo = false;
};

struct Episode {
  std::vector<Transition> transitions;
  bool success = false;  // terminal reward == 1

  std::size_t size() const { return transitions.size(); }
  double total_return() const;
};

struct NStepView {
  double return_ = 0.0;            // sum_{k<m} gamma^k r_{t+k+1}
  Eigen::VectorXd bootstrap_obs;   // observation after m steps
  double discount = 0.0;           // gamma^m, or 0 if the window hits a terminal
  bool terminal = false;
};

/// Truncated n-step return starting at index t; the bootstrap is dropped
/// (discount 0) when the window reaches the episode's terminal transition.
NStepView nstep_return(const Episode& episode, int t, int n, double gamma);

/// One training sample: the stored transition plus its n-step view.
struct BatchItem {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;
  double reward = 0.0;
  bool done = false;
  bool is_demo = false;
  double nstep_return = 0.0;
  Eigen::VectorXd bootstrap_obs;
  double nstep_discount = 0.0;
};

/// Ring buffer of transitions with n-step fields precomputed at insertion.
/// capacity 0 means unbounded (demo buffers are append-only).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int n_step, double gamma, std::uint64_t seed,
               bool demo_buffer = false);

  void push_episode(const Episode& episode);
  std::vector<BatchItem> sample(int count);
  std::size_t size() const { return items_.size(); }
  const BatchItem& at(std::size_t i) const { return items_[i]; }
  int n_step() const { return n_step_; }

 private:
  std::size_t capacity_;
  int n_step_;
  double gamma_;
  bool demo_buffer_;
  std::vector<BatchItem> items_;
  std::size_t write_pos_ = 0;
  std::mt19937_64 rng_;
};

/// Uniform sample of batch_size_each items from each buffer, online first.
std::vector<BatchItem> sample_batch(ReplayBuffer& online_buffer, ReplayBuffer& demo_buffer,
                                    int batch_size_each);

/// Copies successful episodes into the demonstration buffer; failures are
/// untouched.
void relabel_success(const Episode& episode, ReplayBuffer& demo_buffer);

/// Affine map sending the per-dimension demo action range [min, max] to
/// [-1, 1]. Degenerate dimensions map to 0 and invert to the midpoint.
struct ActionScaler {
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  static ActionScaler identity(int dims);
  Eigen::VectorXd apply(const Eigen::VectorXd& action) const;
  Eigen::VectorXd invert(const Eigen::VectorXd& scaled) const;
  bool degenerate(int dim) const { return high[dim] - low[dim] < 1e-6; }
};

ActionScaler fit_scaler(const std::vector<Episode>& demos);

/// Concatenation of the last `depth` observations, oldest first; the first
/// observation is repeated to fill at episode start.
Eigen::VectorXd stack_history(const std::vector<Eigen::VectorXd>& history, int depth);

/// Rewrites a raw-observation episode with history-stacked observations.
Episode stack_episode(const Episode& raw, int depth);

// Demonstration files: UTF-8, header line "c2fq-demos v1", one JSON record
// per transition (keys obs, action, reward, done), blank line between
// episodes.
void save_demos(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> load_demos(const std::string& path);

}  // namespace c2fq

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace c2fq {

/// Fixed grid of scalar atoms for categorical value distributions.
struct SupportGrid {
  double v_min = -1.0;
  double v_max = 1.0;
  int num_atoms = 51;
  Eigen::VectorXd atoms;  // strictly increasing, evenly spaced

  static SupportGrid make(double v_min, double v_max, int num_atoms) {
    if (!(v_min < v_max)) throw std::invalid_argument("support grid: v_min must be < v_max");
    if (num_atoms < 2) throw std::invalid_argument("support grid: need at least 2 atoms");
    SupportGrid g;
    g.v_min = v_min;
    g.v_max = v_max;
    g.num_atoms = num_atoms;
    g.atoms = Eigen::VectorXd::LinSpaced(num_atoms, v_min, v_max);
    return g;
  }

  double delta() const { return (v_max - v_min) / (num_atoms - 1); }
};

template <class D>
bool is_distribution(const Eigen::MatrixBase<D>& probs, double tol = 1e-9) {
  return probs.minCoeff() >= 0.0 && std::abs(probs.sum() - 1.0) <= tol;
}

template <class D>
double dist_mean(const Eigen::MatrixBase<D>& probs, const SupportGrid& g) {
  return probs.dot(g.atoms);
}

template <class D>
Eigen::VectorXd dist_cdf(const Eigen::MatrixBase<D>& probs) {
  Eigen::VectorXd cdf(probs.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  return cdf;
}

template <class D>
Eigen::VectorXd softmax(const Eigen::MatrixBase<D>& logits) {
  Eigen::VectorXd z = logits;
  z.array() -= z.maxCoeff();
  Eigen::VectorXd e = z.array().exp();
  return e / e.sum();
}

template <class D>
Eigen::VectorXd log_softmax(const Eigen::MatrixBase<D>& logits) {
  Eigen::VectorXd z = logits;
  z.array() -= z.maxCoeff();
  const double lse = std::log(z.array().exp().sum());
  return z.array() - lse;
}

/// Categorical Bellman projection: each atom z_i maps to
/// clamp(reward + discount * z_i, v_min, v_max) and its mass splits linearly
/// between the two nearest support atoms. An exact atom hit keeps all its
/// mass on that atom.
template <class D>
Eigen::VectorXd project_bellman(const Eigen::MatrixBase<D>& probs, const SupportGrid& g,
                                double reward, double discount) {
  if (probs.size() != g.num_atoms)
    throw std::invalid_argument("project_bellman: distribution/support size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.num_atoms);
  const double delta = g.delta();
  for (int i = 0; i < g.num_atoms; ++i) {
    const double p = probs[i];
    if (p == 0.0) continue;
    double tz = reward + discount * g.atoms[i];
    tz = std::min(std::max(tz, g.v_min), g.v_max);
    const double b = (tz - g.v_min) / delta;
    const int lo = static_cast<int>(std::floor(b));
    const int hi = static_cast<int>(std::ceil(b));
    if (lo == hi) {
      out[lo] += p;
    } else {
      out[lo] += p * (hi - b);
      out[hi] += p * (b - lo);
    }
  }
  return out;
}

/// Cross entropy of `logits` against a fixed target distribution:
/// -sum_i target_i * log softmax(logits)_i.
template <class D1, class D2>
double cross_entropy_loss(const Eigen::MatrixBase<D1>& target,
                          const Eigen::MatrixBase<D2>& logits) {
  if (target.size() != logits.size())
    throw std::invalid_argument("cross_entropy_loss: size mismatch");
  return -target.dot(log_softmax(logits));
}

/// Sum of CDF hinge violations; zero iff `expert` first-order stochastically
/// dominates `rival` on the shared support.
template <class D1, class D2>
double dominance_loss(const Eigen::MatrixBase<D1>& expert,
                      const Eigen::MatrixBase<D2>& rival) {
  if (expert.size() != rival.size())
    throw std::invalid_argument("dominance_loss: support mismatch");
  double loss = 0.0;
  double ce = 0.0, cr = 0.0;
  for (Eigen::Index i = 0; i < expert.size(); ++i) {
    ce += expert[i];
    cr += rival[i];
    loss += std::max(0.0, ce - cr);
  }
  return loss;
}

}  // namespace c2fq

#pragma once

#include <cstdint>
#include <vector>

#include "svp/scene_graph.hpp"

namespace svp {

struct LogitMatrix {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::vector<double> z;  // n * k, row-major
  double guard = 50.0;    // |z| bound keeping softmax comfortably stable

  double at(std::uint32_t s, std::uint32_t j) const {
    return z[static_cast<std::size_t>(s) * k + j];
  }
  double& at(std::uint32_t s, std::uint32_t j) {
    return z[static_cast<std::size_t>(s) * k + j];
  }
};

// Row-stochastic soft membership matrix.
struct AssignmentMatrix {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::vector<double> a;  // n * k, row-major

  double at(std::uint32_t s, std::uint32_t j) const {
    return a[static_cast<std::size_t>(s) * k + j];
  }
  double& at(std::uint32_t s, std::uint32_t j) {
    return a[static_cast<std::size_t>(s) * k + j];
  }
};

struct GroupWeights {
  double coh = 1.0;
  double bal = 0.0;
  double sharp = 0.0;
};

// Default weighting: the balance term grows like N^2, so it is normalized
// by N to keep the three terms comparable as scenes scale.
inline GroupWeights default_weights(std::uint32_t n) {
  return {1.0, 1.0 / static_cast<double>(n), 0.1};
}

struct Partition {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::vector<std::vector<std::uint32_t>> groups;  // disjoint, nonempty, ascending
  std::uint32_t anchor = 0;
};

struct OptimizeConfig {
  std::uint32_t iterations = 10;
  double step = 0.5;
  std::uint64_t seed = 0;
  double init_noise = 0.01;
  bool backtracking = true;
  double logit_guard = 50.0;
};

struct OptimizeResult {
  AssignmentMatrix assignment;
  std::vector<double> loss_trace;  // initial loss plus one entry per iteration
};

// Row-wise exponential normalization with per-row max subtraction.
AssignmentMatrix soft_assign(const LogitMatrix& logits);

// L_coh = sum_k || h_k - h_avg ||^2 where h_k is the soft group mean of
// similarity rows and h_avg the global mean row. Throws
// degenerate_group_error if any soft group mass m_k falls below 1e-8.
double coherence_loss(const AssignmentMatrix& a, const SimilarityGraph& s);

// L_bal = sum_k (m_k - N/K)^2
double balance_loss(const AssignmentMatrix& a);

// L_sharp = sum_{s,k} a(1-a)
double sharpness_loss(const AssignmentMatrix& a);

double group_loss(const AssignmentMatrix& a, const SimilarityGraph& s,
                  const GroupWeights& w);

struct GradResult {
  double loss = 0.0;
  std::vector<double> grad;  // d group_loss / d z, n * k row-major
};

// Loss and exact analytic gradient of group_loss(soft_assign(z)) w.r.t. z.
GradResult group_loss_grad(const LogitMatrix& logits, const SimilarityGraph& s,
                           const GroupWeights& w);

// Gradient descent on logits from a seeded small-noise init. With
// backtracking enabled the step is halved up to 8 times on a loss increase
// and the iteration becomes a no-move if all candidates fail, so the
// recorded loss trace is non-increasing by construction.
OptimizeResult optimize(const SimilarityGraph& s, std::uint32_t k,
                        const GroupWeights& w, const OptimizeConfig& cfg);

// Per-row argmax (ties toward the lowest group index) followed by empty
// group repair: each empty group k, in ascending order, receives the frame
// with the highest a[s][k] among frames whose current group keeps >= 2
// members.
Partition harden(const AssignmentMatrix& a, std::uint32_t anchor);

// Greedy similarity-guided reassignment until every group size <= cap:
// repeatedly take from the lowest-index oversized group its member with the
// lowest mean similarity to that group, and move it to the under-cap group
// with the highest mean similarity (ties: lowest frame, then lowest group).
Partition rebalance(const Partition& p, const SimilarityGraph& s,
                    std::uint32_t cap);

inline std::uint32_t default_cap(std::uint32_t n, std::uint32_t k) {
  return (n + k - 1) / k + 1;
}

AssignmentMatrix one_hot(const Partition& p);

}  // namespace svp

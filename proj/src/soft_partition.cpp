#include "svp/soft_partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "svp/errors.hpp"
#include "svp/rng.hpp"

namespace svp {
namespace {

constexpr double kMinGroupMass = 1e-8;

void check_pair(const AssignmentMatrix& a, const SimilarityGraph& s) {
  if (a.n != s.num_frames) {
    throw config_error("assignment has " + std::to_string(a.n) +
                       " frames but similarity graph has " +
                       std::to_string(s.num_frames));
  }
}

// Soft group masses m_k; throws when any falls below the division guard.
std::vector<double> group_masses(const AssignmentMatrix& a) {
  std::vector<double> m(a.k, 0.0);
  for (std::uint32_t s = 0; s < a.n; ++s) {
    for (std::uint32_t j = 0; j < a.k; ++j) m[j] += a.at(s, j);
  }
  for (std::uint32_t j = 0; j < a.k; ++j) {
    if (m[j] < kMinGroupMass) {
      throw degenerate_group_error("soft group " + std::to_string(j) +
                                   " mass " + std::to_string(m[j]) +
                                   " below guard 1e-8");
    }
  }
  return m;
}

struct CoherenceState {
  std::vector<double> m;      // k
  std::vector<double> h;      // k x n group mean rows
  std::vector<double> h_avg;  // n
  std::vector<double> g;      // k x n, h - h_avg
  double loss = 0.0;
};

CoherenceState coherence_state(const AssignmentMatrix& a,
                               const SimilarityGraph& s) {
  const std::uint32_t n = a.n;
  const std::uint32_t k = a.k;
  CoherenceState st;
  st.m = group_masses(a);
  st.h.assign(static_cast<std::size_t>(k) * n, 0.0);
  st.h_avg.assign(n, 0.0);
  for (std::uint32_t row = 0; row < n; ++row) {
    const double* srow = s.matrix.data() + static_cast<std::size_t>(row) * n;
    for (std::uint32_t j = 0; j < n; ++j) st.h_avg[j] += srow[j];
    for (std::uint32_t grp = 0; grp < k; ++grp) {
      double w = a.at(row, grp);
      double* hrow = st.h.data() + static_cast<std::size_t>(grp) * n;
      for (std::uint32_t j = 0; j < n; ++j) hrow[j] += w * srow[j];
    }
  }
  for (std::uint32_t j = 0; j < n; ++j) st.h_avg[j] /= n;
  st.g.assign(static_cast<std::size_t>(k) * n, 0.0);
  for (std::uint32_t grp = 0; grp < k; ++grp) {
    double* hrow = st.h.data() + static_cast<std::size_t>(grp) * n;
    double* grow = st.g.data() + static_cast<std::size_t>(grp) * n;
    for (std::uint32_t j = 0; j < n; ++j) {
      hrow[j] /= st.m[grp];
      grow[j] = hrow[j] - st.h_avg[j];
      st.loss += grow[j] * grow[j];
    }
  }
  return st;
}

double balance_term(const AssignmentMatrix& a, const std::vector<double>& m) {
  double target = static_cast<double>(a.n) / a.k;
  double loss = 0.0;
  for (double mk : m) {
    double d = mk - target;
    loss += d * d;
  }
  return loss;
}

double sharpness_term(const AssignmentMatrix& a) {
  double loss = 0.0;
  for (double v : a.a) loss += v * (1.0 - v);
  return loss;
}

}  // namespace

AssignmentMatrix soft_assign(const LogitMatrix& logits) {
  if (logits.n == 0 || logits.k == 0 ||
      logits.z.size() != static_cast<std::size_t>(logits.n) * logits.k) {
    throw config_error("logit matrix dimensions do not match its payload");
  }
  AssignmentMatrix a;
  a.n = logits.n;
  a.k = logits.k;
  a.a.resize(logits.z.size());
  for (std::uint32_t s = 0; s < logits.n; ++s) {
    const double* zrow = logits.z.data() + static_cast<std::size_t>(s) * logits.k;
    double* arow = a.a.data() + static_cast<std::size_t>(s) * logits.k;
    double zmax = zrow[0];
    for (std::uint32_t j = 1; j < logits.k; ++j) zmax = std::max(zmax, zrow[j]);
    double sum = 0.0;
    for (std::uint32_t j = 0; j < logits.k; ++j) {
      arow[j] = std::exp(zrow[j] - zmax);
      sum += arow[j];
    }
    for (std::uint32_t j = 0; j < logits.k; ++j) arow[j] /= sum;
  }
  return a;
}

double coherence_loss(const AssignmentMatrix& a, const SimilarityGraph& s) {
  check_pair(a, s);
  return coherence_state(a, s).loss;
}

double balance_loss(const AssignmentMatrix& a) {
  std::vector<double> m(a.k, 0.0);
  for (std::uint32_t s = 0; s < a.n; ++s) {
    for (std::uint32_t j = 0; j < a.k; ++j) m[j] += a.at(s, j);
  }
  return balance_term(a, m);
}

double sharpness_loss(const AssignmentMatrix& a) { return sharpness_term(a); }

double group_loss(const AssignmentMatrix& a, const SimilarityGraph& s,
                  const GroupWeights& w) {
  check_pair(a, s);
  if (w.coh != 0.0) {
    CoherenceState st = coherence_state(a, s);
    return w.coh * st.loss + w.bal * balance_term(a, st.m) +
           w.sharp * sharpness_term(a);
  }
  return w.bal * balance_loss(a) + w.sharp * sharpness_term(a);
}

GradResult group_loss_grad(const LogitMatrix& logits, const SimilarityGraph& s,
                           const GroupWeights& w) {
  AssignmentMatrix a = soft_assign(logits);
  check_pair(a, s);
  const std::uint32_t n = a.n;
  const std::uint32_t k = a.k;
  const bool use_coh = w.coh != 0.0;
  const double target = static_cast<double>(n) / k;

  CoherenceState st;
  if (use_coh) {
    st = coherence_state(a, s);
  } else {
    st.m.assign(k, 0.0);
    for (std::uint32_t row = 0; row < n; ++row) {
      for (std::uint32_t grp = 0; grp < k; ++grp) st.m[grp] += a.at(row, grp);
    }
  }

  GradResult out;
  if (use_coh) {
    out.loss = w.coh * st.loss + w.bal * balance_term(a, st.m) +
               w.sharp * sharpness_term(a);
  } else {
    out.loss = w.bal * balance_term(a, st.m) + w.sharp * sharpness_term(a);
  }
  out.grad.assign(static_cast<std::size_t>(n) * k, 0.0);

  // dL_coh/da_tk = (2/m_k) * <g_k, S_t: - h_k>; precompute <g_k, h_k>.
  std::vector<double> gh(k, 0.0);
  if (use_coh) {
    for (std::uint32_t grp = 0; grp < k; ++grp) {
      const double* grow = st.g.data() + static_cast<std::size_t>(grp) * n;
      const double* hrow = st.h.data() + static_cast<std::size_t>(grp) * n;
      for (std::uint32_t j = 0; j < n; ++j) gh[grp] += grow[j] * hrow[j];
    }
  }

  std::vector<double> u(k);
  for (std::uint32_t t = 0; t < n; ++t) {
    const double* srow = s.matrix.data() + static_cast<std::size_t>(t) * n;
    const double* arow = a.a.data() + static_cast<std::size_t>(t) * k;
    for (std::uint32_t grp = 0; grp < k; ++grp) {
      double dcoh = 0.0;
      if (use_coh) {
        const double* grow = st.g.data() + static_cast<std::size_t>(grp) * n;
        double gs = 0.0;
        for (std::uint32_t j = 0; j < n; ++j) gs += grow[j] * srow[j];
        dcoh = 2.0 * (gs - gh[grp]) / st.m[grp];
      }
      double dbal = 2.0 * (st.m[grp] - target);
      double dsharp = 1.0 - 2.0 * arow[grp];
      u[grp] = w.coh * dcoh + w.bal * dbal + w.sharp * dsharp;
    }
    // Chain rule through the row softmax.
    double dot = 0.0;
    for (std::uint32_t grp = 0; grp < k; ++grp) dot += u[grp] * arow[grp];
    double* gout = out.grad.data() + static_cast<std::size_t>(t) * k;
    for (std::uint32_t grp = 0; grp < k; ++grp) {
      gout[grp] = arow[grp] * (u[grp] - dot);
    }
  }
  return out;
}

OptimizeResult optimize(const SimilarityGraph& s, std::uint32_t k,
                        const GroupWeights& w, const OptimizeConfig& cfg) {
  const std::uint32_t n = s.num_frames;
  if (k < 1 || k > n) {
    throw config_error("group count " + std::to_string(k) +
                       " outside [1, " + std::to_string(n) + "]");
  }
  if (cfg.iterations < 1) throw config_error("iterations must be >= 1");
  if (!(cfg.step > 0.0)) throw config_error("step must be positive");

  LogitMatrix z;
  z.n = n;
  z.k = k;
  z.guard = cfg.logit_guard;
  z.z.resize(static_cast<std::size_t>(n) * k);
  Rng rng = derive_rng(cfg.seed, "soft_partition/init");
  for (double& v : z.z) v = cfg.init_noise * rng.next_gaussian();

  auto clamp_logits = [&](LogitMatrix& m) {
    for (double& v : m.z) v = std::clamp(v, -m.guard, m.guard);
  };
  clamp_logits(z);

  auto eval = [&](std::uint32_t iteration) -> GradResult {
    try {
      return group_loss_grad(z, s, w);
    } catch (const degenerate_group_error& e) {
      throw degenerate_group_error(std::string(e.what()) + " (iteration " +
                                   std::to_string(iteration) + ")");
    }
  };

  OptimizeResult result;
  GradResult cur = eval(0);
  result.loss_trace.push_back(cur.loss);

  LogitMatrix cand = z;
  for (std::uint32_t it = 1; it <= cfg.iterations; ++it) {
    if (!cfg.backtracking) {
      for (std::size_t i = 0; i < z.z.size(); ++i) {
        z.z[i] -= cfg.step * cur.grad[i];
      }
      clamp_logits(z);
      cur = eval(it);
      result.loss_trace.push_back(cur.loss);
      continue;
    }
    double alpha = cfg.step;
    for (int attempt = 0; attempt <= 8; ++attempt) {
      for (std::size_t i = 0; i < z.z.size(); ++i) {
        cand.z[i] = z.z[i] - alpha * cur.grad[i];
      }
      clamp_logits(cand);
      GradResult next;
      try {
        next = group_loss_grad(cand, s, w);
      } catch (const degenerate_group_error& e) {
        throw degenerate_group_error(std::string(e.what()) + " (iteration " +
                                     std::to_string(it) + ")");
      }
      if (next.loss <= cur.loss) {
        z.z.swap(cand.z);
        cur = std::move(next);
        break;
      }
      alpha *= 0.5;
    }
    // When every halving increased the loss the iteration is a no-move.
    result.loss_trace.push_back(cur.loss);
  }

  result.assignment = soft_assign(z);
  return result;
}

Partition harden(const AssignmentMatrix& a, std::uint32_t anchor) {
  const std::uint32_t n = a.n;
  const std::uint32_t k = a.k;
  if (n == 0 || k == 0) throw config_error("empty assignment");
  if (k > n) {
    throw config_error("cannot harden " + std::to_string(n) + " frames into " +
                       std::to_string(k) + " nonempty groups");
  }
  if (anchor >= n) {
    throw config_error("anchor " + std::to_string(anchor) + " outside [0, " +
                       std::to_string(n) + ")");
  }

  std::vector<std::uint32_t> assign(n);
  std::vector<std::uint32_t> sizes(k, 0);
  for (std::uint32_t s = 0; s < n; ++s) {
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < k; ++j) {
      if (a.at(s, j) > a.at(s, best)) best = j;
    }
    assign[s] = best;
    ++sizes[best];
  }

  // Empty group repair, ascending group index.
  for (std::uint32_t grp = 0; grp < k; ++grp) {
    if (sizes[grp] > 0) continue;
    std::uint32_t pick = n;
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t s = 0; s < n; ++s) {
      if (sizes[assign[s]] < 2) continue;
      if (a.at(s, grp) > best) {
        best = a.at(s, grp);
        pick = s;
      }
    }
    if (pick == n) {
      throw std::logic_error("empty group repair found no donor frame");
    }
    --sizes[assign[pick]];
    assign[pick] = grp;
    ++sizes[grp];
  }

  Partition p;
  p.n = n;
  p.k = k;
  p.anchor = anchor;
  p.groups.assign(k, {});
  for (std::uint32_t s = 0; s < n; ++s) p.groups[assign[s]].push_back(s);
  return p;
}

Partition rebalance(const Partition& p, const SimilarityGraph& s,
                    std::uint32_t cap) {
  const std::uint32_t n = p.n;
  const std::uint32_t k = p.k;
  if (static_cast<std::uint64_t>(cap) * k < n) {
    throw infeasible_error("cap " + std::to_string(cap) + " with " +
                           std::to_string(k) + " groups cannot hold " +
                           std::to_string(n) + " frames");
  }

  std::vector<std::vector<std::uint32_t>> groups = p.groups;

  auto mean_sim = [&](std::uint32_t frame,
                      const std::vector<std::uint32_t>& members) {
    double sum = 0.0;
    std::uint32_t count = 0;
    for (std::uint32_t m : members) {
      if (m == frame) continue;
      sum += s.at(frame, m);
      ++count;
    }
    return count == 0 ? 0.0 : sum / count;
  };

  std::uint32_t moves = 0;
  for (;;) {
    std::uint32_t over = k;
    for (std::uint32_t g = 0; g < k; ++g) {
      if (groups[g].size() > cap) {
        over = g;
        break;
      }
    }
    if (over == k) break;
    if (++moves > n) {
      throw std::logic_error("rebalance exceeded its move bound");
    }

    // Weakest member of the oversized group (ties: lowest frame index).
    std::uint32_t weakest = 0;
    double weakest_sim = std::numeric_limits<double>::infinity();
    for (std::uint32_t f : groups[over]) {
      double ms = mean_sim(f, groups[over]);
      if (ms < weakest_sim) {
        weakest_sim = ms;
        weakest = f;
      }
    }

    // Best under-cap destination (ties: lowest group index).
    std::uint32_t dest = k;
    double dest_sim = -std::numeric_limits<double>::infinity();
    for (std::uint32_t g = 0; g < k; ++g) {
      if (g == over || groups[g].size() >= cap) continue;
      double ms = mean_sim(weakest, groups[g]);
      if (ms > dest_sim) {
        dest_sim = ms;
        dest = g;
      }
    }

    auto& src = groups[over];
    src.erase(std::find(src.begin(), src.end(), weakest));
    auto& dst = groups[dest];
    dst.insert(std::upper_bound(dst.begin(), dst.end(), weakest), weakest);
  }

  Partition out;
  out.n = n;
  out.k = k;
  out.anchor = p.anchor;
  out.groups = std::move(groups);
  return out;
}

AssignmentMatrix one_hot(const Partition& p) {
  AssignmentMatrix a;
  a.n = p.n;
  a.k = p.k;
  a.a.assign(static_cast<std::size_t>(p.n) * p.k, 0.0);
  for (std::uint32_t g = 0; g < p.k; ++g) {
    for (std::uint32_t f : p.groups[g]) a.at(f, g) = 1.0;
  }
  return a;
}

}  // namespace svp

#ifndef ERPCA_MULTI_HPP
#define ERPCA_MULTI_HPP

// Multi-group decomposition Theta_g = L + S_g with a shared low-rank L.
// Stage 1 pools every group under a common S and runs the single-group
// solver to estimate L. Stage 2 fixes L and runs an ADMM over (S_g, Theta_g,
// Y_g) for each group independently.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "erpca/solver.hpp"

namespace erpca {

enum class PoolWeighting {
  Equal,       // every group mean weighs 1/G
  SampleSize,  // group g weighs n_g / sum(n)
};

template <typename Scalar>
struct MultiConfig {
  Scalar alpha = 1;
  std::vector<Scalar> betas;
  Scalar mu = 1;
  Scalar tol = Scalar(1e-7);
  int max_iter = 1000;
  std::optional<Index> init_rank;
  int threads = 1;
  double clamp_eps = kClampEps;
  PoolWeighting pooling = PoolWeighting::Equal;

  void validate(std::size_t groups, Index p, Index q) const {
    if (betas.size() != groups) {
      fail(ErrorCode::InvalidConfig, "betas has " + std::to_string(betas.size()) + " entries for " +
                                         std::to_string(groups) + " groups");
    }
    for (Scalar b : betas) {
      if (!(b > Scalar(0))) fail(ErrorCode::InvalidConfig, "every beta_g must be positive");
    }
    stage1_config().validate(p, q);
  }

  /// Stage 1 fits one shared S, penalised by the average of the betas.
  SolverConfig<Scalar> stage1_config() const {
    SolverConfig<Scalar> c;
    c.alpha = alpha;
    c.beta = betas.empty() ? Scalar(1)
                           : std::accumulate(betas.begin(), betas.end(), Scalar(0)) / Scalar(betas.size());
    c.mu = mu;
    c.tol = tol;
    c.max_iter = max_iter;
    c.init_rank = init_rank;
    c.threads = threads;
    c.clamp_eps = clamp_eps;
    return c;
  }
};

struct GroupDiagnostics {
  int iterations = 0;
  double final_residual = 0;
  std::vector<double> objective_trace;
  std::vector<double> residual_trace;
  bool converged = false;
};

template <typename Scalar>
struct MultiDecomposition {
  Matrix<Scalar> L;
  std::vector<Matrix<Scalar>> S;
  std::vector<Matrix<Scalar>> Theta;
  std::vector<Matrix<Scalar>> Y;
  Decomposition<Scalar> stage1;
  std::vector<GroupDiagnostics> groups;
  DistributionKind kind;
  Link link = Link::Mean;
  /// Multi-group objective at the final iterate.
  Scalar objective = 0;

  bool converged() const {
    return stage1.converged &&
           std::all_of(groups.begin(), groups.end(), [](const GroupDiagnostics& g) { return g.converged; });
  }
};

template <typename Scalar>
void check_groups(const std::vector<MatrixStack<Scalar>>& groups) {
  if (groups.empty()) fail(ErrorCode::Shape, "no groups given");
  const auto& first = groups.front();
  for (std::size_t g = 1; g < groups.size(); ++g) {
    const auto& s = groups[g];
    if (s.rows() != first.rows() || s.cols() != first.cols()) {
      fail(ErrorCode::Shape, "group " + std::to_string(g) + " dimensions differ from group 0");
    }
    if (!(s.kind() == first.kind()) || s.link() != first.link()) {
      fail(ErrorCode::InvalidConfig, "group " + std::to_string(g) + " distribution differs from group 0");
    }
  }
}

/// Sufficient statistics of the pooled Stage 1 problem. The per-cell sum is
/// order independent, so permuting the groups leaves it bitwise unchanged.
template <typename Scalar>
SufficientStats<Scalar> pooled_stats(const std::vector<MatrixStack<Scalar>>& groups,
                                     PoolWeighting pooling = PoolWeighting::Equal) {
  check_groups(groups);
  const Index p = groups.front().rows();
  const Index q = groups.front().cols();
  Scalar total_n = 0;
  for (const auto& g : groups) total_n += Scalar(g.size());

  SufficientStats<Scalar> stats{groups.front().kind(), groups.front().link(), Matrix<Scalar>(p, q)};
  std::vector<Scalar> cell(groups.size());
  for (Index k = 0; k < q; ++k) {
    for (Index j = 0; j < p; ++j) {
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const Scalar w = pooling == PoolWeighting::Equal ? Scalar(1) : Scalar(groups[g].size()) * Scalar(groups.size()) / total_n;
        cell[g] = w * groups[g].sufficient_mean()(j, k);
      }
      stats.mean(j, k) = detail::permutation_invariant_mean(cell);
    }
  }
  return stats;
}

template <typename Scalar>
MultiConfig<Scalar> default_multi_config(const std::vector<MatrixStack<Scalar>>& groups,
                                         PoolWeighting pooling = PoolWeighting::Equal) {
  const SufficientStats<Scalar> pooled = pooled_stats(groups, pooling);
  const SolverConfig<Scalar> single = default_config(pooled);
  MultiConfig<Scalar> config;
  config.alpha = single.alpha;
  config.betas.assign(groups.size(), single.beta);
  config.mu = single.mu;
  config.pooling = pooling;
  return config;
}

/// ||Theta_g - L - S_g||_F / max(1, ||Theta_g||_F).
template <typename Scalar>
Scalar stage2_residual(const Matrix<Scalar>& theta_g, const Matrix<Scalar>& l, const Matrix<Scalar>& s_g) {
  return primal_residual(theta_g, l, s_g);
}

template <typename Scalar>
struct Stage2Result {
  Matrix<Scalar> S;
  Matrix<Scalar> Theta;
  Matrix<Scalar> Y;
  GroupDiagnostics diagnostics;
  Scalar objective = 0;  // likelihood + beta_g ||S_g||_1
};

/// Stage 2 ADMM for one group with L held fixed.
template <typename Scalar>
Stage2Result<Scalar> fit_group_fixed_l(const SufficientStats<Scalar>& stats, const Matrix<Scalar>& l,
                                       const Matrix<Scalar>& s0, Scalar beta, Scalar mu, Scalar tol,
                                       int max_iter, double clamp_eps = kClampEps, int threads = 1) {
  const Scalar inv_mu = Scalar(1) / mu;
  Stage2Result<Scalar> out;
  out.S = s0;
  out.Theta = entrywise_mle(stats.kind, stats.mean, clamp_eps);
  if (stats.link == Link::Canonical) out.Theta = out.Theta.unaryExpr([](Scalar v) { return logit(v); });
  out.Y = Matrix<Scalar>::Zero(l.rows(), l.cols());

  Matrix<Scalar> s_next;
  Matrix<Scalar> theta_next = out.Theta;
  for (int t = 1; t <= max_iter; ++t) {
    s_next = soft_threshold((out.Theta - l + inv_mu * out.Y).eval(), beta * inv_mu);
    update_theta(stats, mu, l, s_next, out.Y, theta_next, threads, clamp_eps);
    out.Y += mu * (theta_next - l - s_next);
    if (!s_next.allFinite() || !theta_next.allFinite() || !out.Y.allFinite()) {
      fail(ErrorCode::Numeric, "non-finite iterate at iteration " + std::to_string(t));
    }

    const Scalar residual = stage2_residual(theta_next, l, s_next);
    const Scalar step = (s_next - out.S).norm() / std::max(Scalar(1), out.S.norm());
    out.S.swap(s_next);
    out.Theta.swap(theta_next);
    out.objective = likelihood_term(stats, out.Theta, clamp_eps) + beta * l1_norm(out.S);

    auto& d = out.diagnostics;
    d.iterations = t;
    d.final_residual = static_cast<double>(residual);
    d.residual_trace.push_back(static_cast<double>(residual));
    d.objective_trace.push_back(static_cast<double>(out.objective));
    if (residual < tol && step < tol) {
      d.converged = true;
      break;
    }
  }
  return out;
}

template <typename Scalar>
MultiDecomposition<Scalar> fit_multi(const std::vector<MatrixStack<Scalar>>& groups,
                                     const MultiConfig<Scalar>& config) {
  check_groups(groups);
  const Index p = groups.front().rows();
  const Index q = groups.front().cols();
  config.validate(groups.size(), p, q);

  MultiDecomposition<Scalar> out;
  out.kind = groups.front().kind();
  out.link = groups.front().link();

  const SolverConfig<Scalar> stage1_config = config.stage1_config();
  try {
    out.stage1 = fit(pooled_stats(groups, config.pooling), stage1_config);
  } catch (const Error& e) {
    fail(e.code(), std::string("stage 1: ") + e.what());
  }
  out.L = out.stage1.L;

  const std::size_t G = groups.size();
  std::vector<Stage2Result<Scalar>> stage2(G);
  // Groups are independent once L is fixed; spread them over the workers.
  parallel_for(static_cast<Index>(G), config.threads, [&](Index g) {
    const auto gi = static_cast<std::size_t>(g);
    try {
      stage2[gi] = fit_group_fixed_l(SufficientStats<Scalar>::from(groups[gi]), out.L, out.stage1.S,
                                     config.betas[gi], config.mu, config.tol, config.max_iter, config.clamp_eps);
    } catch (const Error& e) {
      fail(e.code(), "group " + std::to_string(g) + ": " + e.what());
    }
  });

  out.objective = config.alpha * nuclear_norm(out.L);
  for (auto& r : stage2) {
    out.objective += r.objective;
    out.S.push_back(std::move(r.S));
    out.Theta.push_back(std::move(r.Theta));
    out.Y.push_back(std::move(r.Y));
    out.groups.push_back(std::move(r.diagnostics));
  }
  return out;
}

}  // namespace erpca

#endif  // ERPCA_MULTI_HPP

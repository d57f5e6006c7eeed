#ifndef ERPCA_TUNING_HPP
#define ERPCA_TUNING_HPP

// Rank / sparsity driven search over (alpha, beta). Starting from the
// default penalties, alpha grows by eta_alpha * sqrt(t) in every round where
// rank(L) > r and beta by eta_beta * sqrt(t) where %nz(S) > s, until
// rank(L) <= r and %nz(S) < s hold, nothing changed, or max_rounds is spent.

#include <cmath>
#include <optional>
#include <vector>

#include "erpca/solver.hpp"

namespace erpca {

struct TuneSpec {
  Index rank_cap = 1;
  double sparsity_cap = 0.1;
  std::optional<double> eta_alpha;  // default 0.5
  std::optional<double> eta_beta;   // default 0.25 / sqrt(max(p, q))
  int max_rounds = 20;

  void validate(Index p, Index q) const {
    if (rank_cap < 1 || rank_cap > std::min(p, q)) {
      fail(ErrorCode::InvalidConfig, "rank cap must lie in [1, min(p, q)]");
    }
    if (!(sparsity_cap > 0.0 && sparsity_cap < 1.0)) fail(ErrorCode::InvalidConfig, "sparsity cap must lie in (0, 1)");
    if (eta_alpha && !(*eta_alpha > 0.0)) fail(ErrorCode::InvalidConfig, "eta_alpha must be positive");
    if (eta_beta && !(*eta_beta > 0.0)) fail(ErrorCode::InvalidConfig, "eta_beta must be positive");
    if (max_rounds < 0) fail(ErrorCode::InvalidConfig, "max_rounds must be nonnegative");
  }
};

template <typename Scalar>
struct TuneResult {
  SolverConfig<Scalar> config;
  Decomposition<Scalar> fit;
  int rounds = 0;
  bool satisfied = false;
  Index rank_L = 0;
  double pct_nz_S = 0;
  std::vector<Scalar> alpha_history;
  std::vector<Scalar> beta_history;
};

template <typename Scalar>
TuneResult<Scalar> tune(const SufficientStats<Scalar>& stats, const TuneSpec& spec, int threads = 1) {
  const Index p = stats.rows();
  const Index q = stats.cols();
  spec.validate(p, q);
  const Scalar eta_alpha = Scalar(spec.eta_alpha.value_or(0.5));
  const Scalar eta_beta =
      Scalar(spec.eta_beta.value_or(0.25 / std::sqrt(static_cast<double>(std::max(p, q)))));

  TuneResult<Scalar> out;
  out.config = default_config(stats);
  out.config.threads = threads;

  auto run = [&] {
    out.fit = fit(stats, out.config);
    out.rank_L = numeric_rank(out.fit.L);
    out.pct_nz_S = fraction_nonzero(out.fit.S);
    out.alpha_history.push_back(out.config.alpha);
    out.beta_history.push_back(out.config.beta);
  };
  auto caps_met = [&] { return out.rank_L <= spec.rank_cap && out.pct_nz_S < spec.sparsity_cap; };

  run();
  int t = 0;
  while (!caps_met() && t < spec.max_rounds) {
    ++t;
    const Scalar step = std::sqrt(Scalar(t));
    bool changed = false;
    if (out.rank_L > spec.rank_cap) {
      out.config.alpha += eta_alpha * step;
      changed = true;
    }
    if (out.pct_nz_S > spec.sparsity_cap) {
      out.config.beta += eta_beta * step;
      changed = true;
    }
    if (!changed) break;
    out.rounds = t;
    run();
  }
  out.satisfied = caps_met();
  return out;
}

template <typename Scalar>
TuneResult<Scalar> tune(const MatrixStack<Scalar>& stack, const TuneSpec& spec, int threads = 1) {
  return tune(SufficientStats<Scalar>::from(stack), spec, threads);
}

}  // namespace erpca

#endif  // ERPCA_TUNING_HPP

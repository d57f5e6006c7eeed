#include "erpca/simgen.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "erpca/prox.hpp"
#include "erpca/rng.hpp"

namespace erpca {

SimSpec SimSpec::preset(const DistributionKind& kind, Index p, Index n, Index groups, std::uint64_t seed) {
  SimSpec spec;
  spec.p = p;
  spec.kind = kind;
  spec.n = n;
  spec.groups = groups;
  spec.seed = seed;
  spec.target_rank = (p + 4) / 5;
  spec.spike_count = (p * p + 19) / 20;
  switch (kind.family()) {
    case Family::Bernoulli:
      spec.bg_mean = 0.5;
      spec.bg_sd = 0.15;
      spec.spike_lo = 0.2;
      spec.spike_hi = 0.3;
      break;
    case Family::Exponential:
      spec.bg_mean = 1.0;
      spec.bg_sd = 0.15;
      spec.spike_lo = 0.2;
      spec.spike_hi = 0.3;
      break;
    case Family::Poisson:
      spec.bg_mean = 50.0;
      spec.bg_sd = 2.0;
      spec.spike_lo = 2.0;
      spec.spike_hi = 5.0;
      break;
    case Family::Gaussian:
      spec.bg_mean = 0.5;
      spec.bg_sd = 0.15;
      spec.spike_lo = 0.2;
      spec.spike_hi = 0.3;
      break;
  }
  return spec;
}

void SimSpec::validate() const {
  if (p <= 0) fail(ErrorCode::InvalidConfig, "p must be positive");
  if (n <= 0) fail(ErrorCode::InvalidConfig, "n must be positive");
  if (groups <= 0) fail(ErrorCode::InvalidConfig, "G must be positive");
  if (n < groups) fail(ErrorCode::InvalidConfig, "n must be at least G");
  if (target_rank <= 0 || target_rank > p) fail(ErrorCode::InvalidConfig, "target_rank must lie in [1, p]");
  if (spike_count < 0 || spike_count > p * p) fail(ErrorCode::InvalidConfig, "spike_count exceeds p^2");
  if (disjoint_supports && spike_count * groups > p * p) {
    fail(ErrorCode::InvalidConfig, "disjoint supports need spike_count * G <= p^2");
  }
  if (!(bg_sd > 0.0) || !std::isfinite(bg_mean) || !std::isfinite(bg_sd)) {
    fail(ErrorCode::InvalidConfig, "bg_sd must be positive and bg_mean finite");
  }
  if (!(spike_lo <= spike_hi) || !std::isfinite(spike_lo) || !std::isfinite(spike_hi)) {
    fail(ErrorCode::InvalidConfig, "spike_lo must not exceed spike_hi");
  }
}

Index SimSpec::group_size(Index g) const {
  return n / groups + (g < n % groups ? 1 : 0);
}

MatrixXd gen_lowrank(const SimSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, kLowRankStream);
  MatrixXd raw(spec.p, spec.p);
  for (Index j = 0; j < spec.p; ++j) {
    for (Index k = 0; k < spec.p; ++k) raw(j, k) = rng.normal(spec.bg_mean, spec.bg_sd);
  }
  return truncate_rank(raw, spec.target_rank);
}

MatrixXd gen_sparse(const SimSpec& spec, Index group_index, std::vector<Cell>* support,
                    const std::vector<Cell>& exclude) {
  spec.validate();
  CounterRng rng(spec.seed, kSparseStream + static_cast<std::uint64_t>(group_index));
  std::vector<bool> blocked(static_cast<std::size_t>(spec.p * spec.p), false);
  for (const auto& [j, k] : exclude) blocked[static_cast<std::size_t>(j * spec.p + k)] = true;
  std::vector<Index> order;
  for (Index c = 0; c < spec.p * spec.p; ++c) {
    if (!blocked[static_cast<std::size_t>(c)]) order.push_back(c);
  }
  const auto cells = static_cast<Index>(order.size());
  if (spec.spike_count > cells) fail(ErrorCode::InvalidConfig, "not enough free cells for the spikes");
  for (Index i = 0; i < spec.spike_count; ++i) {
    const auto r = i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(cells - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(r)]);
  }
  MatrixXd s = MatrixXd::Zero(spec.p, spec.p);
  if (support) support->clear();
  for (Index i = 0; i < spec.spike_count; ++i) {
    const Index cell = order[static_cast<std::size_t>(i)];
    const Index j = cell / spec.p;
    const Index k = cell % spec.p;
    s(j, k) = spec.spike_lo == spec.spike_hi ? spec.spike_lo : rng.uniform(spec.spike_lo, spec.spike_hi);
    if (support) support->emplace_back(j, k);
  }
  return s;
}

MatrixXd repair_theta(const DistributionKind& kind, const MatrixXd& theta, double clamp_eps) {
  return theta.unaryExpr([&](double v) {
    switch (kind.family()) {
      case Family::Bernoulli: v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); break;
      case Family::Poisson:
      case Family::Exponential: v = v < 0.0 ? 0.0 : v; break;
      case Family::Gaussian: break;
    }
    return clamp_to_domain(kind, Link::Mean, v, clamp_eps);
  });
}

GroundTruth make_ground_truth(const SimSpec& spec) {
  spec.validate();
  GroundTruth truth;
  truth.L_true = gen_lowrank(spec);
  std::vector<Cell> used;
  for (Index g = 0; g < spec.groups; ++g) {
    std::vector<Cell> support;
    MatrixXd s = gen_sparse(spec, g, &support, spec.disjoint_supports ? used : std::vector<Cell>{});
    used.insert(used.end(), support.begin(), support.end());
    truth.Theta.push_back(repair_theta(spec.kind, truth.L_true + s));
    truth.S_true.push_back(std::move(s));
    truth.spike_supports.push_back(std::move(support));
  }
  return truth;
}

double sample_entry(CounterRng& rng, const DistributionKind& kind, double theta) {
  switch (kind.family()) {
    case Family::Bernoulli: return rng.bernoulli(theta);
    case Family::Poisson: return rng.poisson(theta);
    case Family::Exponential: return rng.exponential(theta);
    case Family::Gaussian: return rng.normal(theta, std::sqrt(kind.sigma2()));
  }
  return 0.0;
}

std::vector<MatrixStack<double>> sample_stack(const GroundTruth& truth, const SimSpec& spec) {
  spec.validate();
  if (static_cast<Index>(truth.Theta.size()) != spec.groups) {
    fail(ErrorCode::Shape, "ground truth has " + std::to_string(truth.Theta.size()) + " groups, spec has " +
                               std::to_string(spec.groups));
  }
  std::vector<MatrixStack<double>> out;
  for (Index g = 0; g < spec.groups; ++g) {
    CounterRng rng(spec.seed, kObservationStream + static_cast<std::uint64_t>(g));
    const MatrixXd& theta = truth.Theta[static_cast<std::size_t>(g)];
    std::vector<MatrixXd> draws;
    const Index n_g = spec.group_size(g);
    draws.reserve(static_cast<std::size_t>(n_g));
    for (Index i = 0; i < n_g; ++i) {
      MatrixXd m(theta.rows(), theta.cols());
      for (Index j = 0; j < theta.rows(); ++j) {
        for (Index k = 0; k < theta.cols(); ++k) m(j, k) = sample_entry(rng, spec.kind, theta(j, k));
      }
      draws.push_back(std::move(m));
    }
    out.emplace_back(spec.kind, std::move(draws));
  }
  return out;
}

}  // namespace erpca

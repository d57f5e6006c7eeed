#ifndef ERPCA_SIMGEN_HPP
#define ERPCA_SIMGEN_HPP

// Seeded ground truth Theta_g = L + S_g and observation stacks.
//
// Streams of CounterRng(seed, stream):
//   kLowRankStream         p x p background normals, row-major
//   kSparseStream + g      spike support (partial Fisher-Yates), then values
//   kObservationStream + g observations of group g: matrix, row, column order

#include <cstdint>
#include <utility>
#include <vector>

#include "erpca/expfam.hpp"
#include "erpca/rng.hpp"
#include "erpca/solver.hpp"
#include "erpca/types.hpp"

namespace erpca {

inline constexpr std::uint64_t kLowRankStream = 0;
inline constexpr std::uint64_t kSparseStream = 0x100;
inline constexpr std::uint64_t kObservationStream = 0x10000;

struct SimSpec {
  Index p = 10;
  DistributionKind kind = DistributionKind::bernoulli();
  Index n = 500;
  Index groups = 1;
  std::uint64_t seed = 1;
  double bg_mean = 0.5;
  double bg_sd = 0.15;
  Index target_rank = 2;
  Index spike_count = 5;
  double spike_lo = 0.2;
  double spike_hi = 0.3;
  /// Draw each group's spikes from cells no earlier group uses.
  bool disjoint_supports = false;

  /// Background and spike settings per family, rank ceil(p/5) and
  /// ceil(p^2/20) spikes.
  static SimSpec preset(const DistributionKind& kind, Index p, Index n = 500, Index groups = 1,
                        std::uint64_t seed = 1);

  void validate() const;
  Index group_size(Index g) const;
};

using Cell = std::pair<Index, Index>;

struct GroundTruth {
  MatrixXd L_true;
  std::vector<MatrixXd> S_true;  // per group, before domain repair
  std::vector<MatrixXd> Theta;   // per group, repaired and clamped
  std::vector<std::vector<Cell>> spike_supports;
};

MatrixXd gen_lowrank(const SimSpec& spec);
/// Spike cells come from a partial Fisher-Yates shuffle of the row-major
/// cell list with the `exclude` cells removed.
MatrixXd gen_sparse(const SimSpec& spec, Index group_index, std::vector<Cell>* support = nullptr,
                    const std::vector<Cell>& exclude = {});

/// Moves L + S into the parameter domain: Bernoulli values snap to the
/// nearer of {0, 1}, negative Poisson / exponential values become 0, then
/// everything is clamped eps inside the domain.
MatrixXd repair_theta(const DistributionKind& kind, const MatrixXd& theta, double clamp_eps = kClampEps);

GroundTruth make_ground_truth(const SimSpec& spec);

double sample_entry(CounterRng& rng, const DistributionKind& kind, double theta);

std::vector<MatrixStack<double>> sample_stack(const GroundTruth& truth, const SimSpec& spec);

}  // namespace erpca

#endif  // ERPCA_SIMGEN_HPP

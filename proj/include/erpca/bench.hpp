#ifndef ERPCA_BENCH_HPP
#define ERPCA_BENCH_HPP

// Recovery benchmark: eRPCA against the Gaussian RPCA baseline on seeded
// simulated instances.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "erpca/baseline.hpp"
#include "erpca/simgen.hpp"
#include "erpca/types.hpp"

namespace erpca {

enum class Method { Erpca, RpcaBaseline };

const char* to_string(Method m);

struct TrialResult {
  Method method = Method::Erpca;
  Index p = 0;
  Family kind = Family::Bernoulli;
  std::uint64_t seed = 0;
  int trial = 0;
  double err_L = 0;
  double err_S = 0;
  Index rank_L = 0;
  double pct_nz_S = 0;  // fraction of nonzero entries of S (mean over groups)
  int iterations = 0;
  double wall_time_s = 0;
  std::string status = "ok";
};

double frobenius_error(const MatrixXd& est, const MatrixXd& truth);

struct BenchSuite {
  std::vector<Index> p_list{10};
  DistributionKind kind = DistributionKind::bernoulli();
  Index n = 500;
  int trials = 1;
  bool multi = false;
  Index groups = 2;  // multi mode only
  std::uint64_t seed = 1;
  int max_iter = 1000;
  double tol = 1e-7;
  bool record_wall_time = false;
  VarianceMode baseline_variance = VarianceMode::PerEntry;

  void validate() const;
  Index group_count() const { return multi ? groups : 1; }
};

/// Seed of trial `trial` at dimension p.
std::uint64_t trial_seed(std::uint64_t suite_seed, Index p, int trial);

BenchSuite parse_suite(const nlohmann::json& doc);
nlohmann::json to_json(const BenchSuite& suite);

/// Runs one trial of both methods on a shared sampled instance. Solver
/// failures are recorded in the status field.
std::vector<TrialResult> run_trial(const BenchSuite& suite, Index p, int trial);

/// All trials, ordered by (p, trial, method).
std::vector<TrialResult> run_experiment(const BenchSuite& suite, int threads = 1);

std::string results_csv(const std::vector<TrialResult>& rows, bool with_wall_time);
nlohmann::json manifest_json(const BenchSuite& suite);

/// Runs the suite and writes the CSV to out_path and the manifest next to it.
std::vector<TrialResult> run_experiment(const BenchSuite& suite, const std::filesystem::path& out_path,
                                        int threads = 1);

std::filesystem::path manifest_path(const std::filesystem::path& csv_path);

double median(std::vector<double> values);

}  // namespace erpca

#endif  // ERPCA_BENCH_HPP

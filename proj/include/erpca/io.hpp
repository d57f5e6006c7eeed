#ifndef ERPCA_IO_HPP
#define ERPCA_IO_HPP

// File formats.
//
// Stack file (stacked CSV, UTF-8, LF):
//   # p=<int> q=<int> n=<int> kind=<poisson|bernoulli|exponential|gaussian> [sigma2=<real>]
//   n blocks of p rows with q comma-separated decimals, blocks separated by
//   exactly one blank line.
// Matrix file: p rows of q comma-separated decimals.
// Decimals are written in shortest round-trip form.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "erpca/baseline.hpp"
#include "erpca/multi.hpp"
#include "erpca/simgen.hpp"
#include "erpca/solver.hpp"
#include "erpca/tuning.hpp"

namespace erpca::io {

using nlohmann::json;

std::string format_double(double value);

std::string format_matrix(const MatrixXd& m);
void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_matrix_csv(const std::filesystem::path& path);

std::string stack_header(Index p, Index q, Index n, const DistributionKind& kind);
std::string format_stack(const std::vector<MatrixXd>& matrices, const DistributionKind& kind);
void write_stack_file(const std::filesystem::path& path, const MatrixStack<double>& stack);
MatrixStack<double> parse_stack(const std::string& text, Link link = Link::Mean);
MatrixStack<double> read_stack_file(const std::filesystem::path& path, Link link = Link::Mean);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);

/// Decomposition settings as read from a run configuration file. Absent
/// keys keep the data-driven defaults.
struct RunConfig {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::vector<double>> betas;
  std::optional<double> mu;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<Index> init_rank;
  std::optional<double> clamp_eps;
  std::optional<PoolWeighting> pooling;
  std::optional<Link> link;

  void apply(SolverConfig<double>& config) const;
  void apply(MultiConfig<double>& config) const;
};

RunConfig parse_run_config(const json& doc);
SimSpec parse_sim_spec(const json& doc);
json to_json(const SimSpec& spec);

json diagnostics_json(const Decomposition<double>& d);
json diagnostics_json(const MultiDecomposition<double>& d);

}  // namespace erpca::io

#endif  // ERPCA_IO_HPP

#include "erpca/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "erpca/bench.hpp"
#include "erpca/io.hpp"
#include "erpca/multi.hpp"
#include "erpca/simgen.hpp"
#include "erpca/tuning.hpp"

namespace erpca {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  int resolved_threads() const {
    if (threads) return std::max(1, *threads);
    if (const char* env = std::getenv("ERPCA_THREADS")) {
      try {
        return std::max(1, std::stoi(env));
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "ERPCA_THREADS must be an integer");
      }
    }
    return 1;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::string indexed(const char* stem, std::size_t g) { return std::string(stem) + "_" + std::to_string(g) + ".csv"; }

struct DecomposeArgs {
  std::string input;
  std::string config;
  std::string out;
  std::string link;
  bool multi = false;
  std::vector<std::string> group_inputs;
};

int cmd_decompose(const DecomposeArgs& a, const Globals& g) {
  io::RunConfig rc;
  if (!a.config.empty()) rc = io::parse_run_config(io::read_json(a.config));
  Link link = rc.link.value_or(Link::Mean);
  if (!a.link.empty()) link = parse_link(a.link);
  const int threads = g.resolved_threads();
  const fs::path out(a.out);

  if (a.multi) {
    std::vector<std::string> files;
    if (!a.input.empty()) files.push_back(a.input);
    files.insert(files.end(), a.group_inputs.begin(), a.group_inputs.end());
    if (files.size() < 2) fail(ErrorCode::InvalidConfig, "--multi needs at least two group stack files");
    std::vector<MatrixStack<double>> groups;
    for (const auto& f : files) groups.push_back(io::read_stack_file(f, link));
    MultiConfig<double> config = default_multi_config(groups, rc.pooling.value_or(PoolWeighting::Equal));
    rc.apply(config);
    config.threads = threads;
    const MultiDecomposition<double> d = fit_multi(groups, config);
    ensure_dir(out);
    io::write_matrix_csv(out / "L.csv", d.L);
    for (std::size_t i = 0; i < d.S.size(); ++i) {
      io::write_matrix_csv(out / indexed("S", i), d.S[i]);
      io::write_matrix_csv(out / indexed("Theta", i), d.Theta[i]);
    }
    io::write_text(out / "diagnostics.json", io::diagnostics_json(d).dump(2) + "\n");
    return d.converged() ? kExitOk : kExitNotConverged;
  }

  if (a.input.empty()) fail(ErrorCode::InvalidConfig, "--input is required");
  if (!a.group_inputs.empty()) fail(ErrorCode::InvalidConfig, "--group-inputs requires --multi");
  const MatrixStack<double> stack = io::read_stack_file(a.input, link);
  SolverConfig<double> config = default_config(stack);
  rc.apply(config);
  config.threads = threads;
  const Decomposition<double> d = fit(stack, config);
  ensure_dir(out);
  io::write_matrix_csv(out / "L.csv", d.L);
  io::write_matrix_csv(out / "S.csv", d.S);
  io::write_matrix_csv(out / "Theta.csv", d.Theta);
  io::write_text(out / "diagnostics.json", io::diagnostics_json(d).dump(2) + "\n");
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
  return d.converged ? kExitOk : kExitNotConverged;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir, const Globals& g) {
  SimSpec spec = io::parse_sim_spec(io::read_json(spec_path));
  if (g.seed) spec.seed = *g.seed;
  const GroundTruth truth = make_ground_truth(spec);
  const std::vector<MatrixStack<double>> stacks = sample_stack(truth, spec);
  const fs::path out(out_dir);
  ensure_dir(out);
  io::write_matrix_csv(out / "L_true.csv", truth.L_true);
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    io::write_matrix_csv(out / indexed("S_true", i), truth.S_true[i]);
    io::write_matrix_csv(out / indexed("Theta", i), truth.Theta[i]);
    io::write_stack_file(out / indexed("stack", i), stacks[i]);
  }
  const json manifest = {{"artifact_version", kVersion},
                         {"rng", kRngAlgorithm},
                         {"seed", spec.seed},
                         {"spec", io::to_json(spec)}};
  io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

struct TuneArgs {
  std::string input;
  std::string out;
  std::string link;
  Index rank_cap = 0;
  double sparsity_cap = 0;
  std::optional<double> eta_alpha;
  std::optional<double> eta_beta;
  int max_rounds = 20;
};

int cmd_tune(const TuneArgs& a, const Globals& g) {
  const Link link = a.link.empty() ? Link::Mean : parse_link(a.link);
  const MatrixStack<double> stack = io::read_stack_file(a.input, link);
  TuneSpec spec;
  spec.rank_cap = a.rank_cap;
  spec.sparsity_cap = a.sparsity_cap;
  spec.eta_alpha = a.eta_alpha;
  spec.eta_beta = a.eta_beta;
  spec.max_rounds = a.max_rounds;
  const TuneResult<double> r = tune(stack, spec, g.resolved_threads());

  if (!a.out.empty()) {
    const fs::path out(a.out);
    ensure_dir(out);
    io::write_matrix_csv(out / "L.csv", r.fit.L);
    io::write_matrix_csv(out / "S.csv", r.fit.S);
    io::write_matrix_csv(out / "Theta.csv", r.fit.Theta);
    io::write_text(out / "diagnostics.json", io::diagnostics_json(r.fit).dump(2) + "\n");
  }
  const json report = {{"alpha", r.config.alpha}, {"beta", r.config.beta}, {"rank_L", r.rank_L},
                       {"pct_nz_S", r.pct_nz_S},  {"rounds", r.rounds},     {"satisfied", r.satisfied}};
  std::cout << report.dump() << std::endl;
  if (!r.satisfied) {
    std::cerr << "caps not met\n";
    return kExitCapsNotMet;
  }
  return kExitOk;
}

int cmd_bench(const std::string& suite_path, const std::string& out, const Globals& g) {
  json doc = io::read_json(suite_path);
  if (doc.is_object() && doc.contains("suite")) doc = doc.at("suite");
  BenchSuite suite = parse_suite(doc);
  if (g.seed) suite.seed = *g.seed;
  run_experiment(suite, fs::path(out), g.resolved_threads());
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Exponential-family robust PCA"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  Globals globals;
  app.add_option("--seed", globals.seed, "Override the random seed");
  app.add_option("--threads", globals.threads, "Worker threads (fallback: ERPCA_THREADS)");

  DecomposeArgs dec;
  auto* decompose = app.add_subcommand("decompose", "Fit Theta = L + S to a stack file");
  decompose->add_option("--input", dec.input, "Stack file");
  decompose->add_option("--config", dec.config, "JSON run configuration");
  decompose->add_option("--out", dec.out, "Output directory")->required();
  decompose->add_option("--link", dec.link, "mean or canonical");
  decompose->add_flag("--multi", dec.multi, "Multi-group decomposition");
  decompose->add_option("--group-inputs", dec.group_inputs, "Stack files of the remaining groups");

  std::string spec_path, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a seeded instance");
  simulate->add_option("--spec", spec_path, "JSON simulation spec")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  TuneArgs tn;
  auto* tune_cmd = app.add_subcommand("tune", "Search penalties meeting rank and sparsity caps");
  tune_cmd->add_option("--input", tn.input, "Stack file")->required();
  tune_cmd->add_option("--rank-cap", tn.rank_cap, "Largest acceptable rank of L")->required();
  tune_cmd->add_option("--sparsity-cap", tn.sparsity_cap, "Fraction of nonzeros S must stay below")->required();
  tune_cmd->add_option("--eta-alpha", tn.eta_alpha, "alpha step size");
  tune_cmd->add_option("--eta-beta", tn.eta_beta, "beta step size");
  tune_cmd->add_option("--max-rounds", tn.max_rounds, "Round limit");
  tune_cmd->add_option("--link", tn.link, "mean or canonical");
  tune_cmd->add_option("--out", tn.out, "Directory for the tuned decomposition");

  std::string suite_path, bench_out;
  auto* bench = app.add_subcommand("bench", "Run the recovery benchmark");
  bench->add_option("--suite", suite_path, "Suite JSON or a previous run manifest")->required();
  bench->add_option("--out", bench_out, "Result CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*decompose) return cmd_decompose(dec, globals);
    if (*simulate) return cmd_simulate(spec_path, sim_out, globals);
    if (*tune_cmd) return cmd_tune(tn, globals);
    if (*bench) return cmd_bench(suite_path, bench_out, globals);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Numeric ? kExitNumeric : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace erpca

#include "erpca/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

namespace erpca::io {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
  if (text.empty()) return {};
  return split(text, '\n');
}

bool parse_number(std::string_view token, double& value) {
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc() && ptr == end;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  fail(ErrorCode::Parse, "line " + std::to_string(line) + ": " + what);
}

std::vector<double> parse_row(std::string_view line, Index q, std::size_t line_no) {
  const auto fields = split(line, ',');
  if (static_cast<Index>(fields.size()) != q) {
    parse_error(line_no, "expected " + std::to_string(q) + " values, found " + std::to_string(fields.size()));
  }
  std::vector<double> row(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!parse_number(fields[i], row[i])) {
      parse_error(line_no, "cannot parse '" + std::string(fields[i]) + "' as a number");
    }
  }
  return row;
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const char* what) {
  if (!doc.is_object()) fail(ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.count(key)) fail(ErrorCode::InvalidConfig, std::string("unknown key '") + key + "' in " + what);
  }
}

template <typename T>
std::optional<T> get(const json& doc, const char* key) {
  if (!doc.contains(key)) return std::nullopt;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

json trace_json(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(v);
  return arr;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorCode::Io, "cannot format number");
  return std::string(buf, ptr);
}

std::string format_matrix(const MatrixXd& m) {
  std::string out;
  for (Index j = 0; j < m.rows(); ++j) {
    for (Index k = 0; k < m.cols(); ++k) {
      if (k) out += ',';
      out += format_double(m(j, k));
    }
    out += '\n';
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m) { write_text(path, format_matrix(m)); }

MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const auto lines = split_lines(text);
  if (lines.empty()) fail(ErrorCode::Parse, path.string() + ": empty matrix file");
  const auto q = static_cast<Index>(split(lines.front(), ',').size());
  MatrixXd m(static_cast<Index>(lines.size()), q);
  for (std::size_t j = 0; j < lines.size(); ++j) {
    const auto row = parse_row(lines[j], q, j + 1);
    for (Index k = 0; k < q; ++k) m(static_cast<Index>(j), k) = row[static_cast<std::size_t>(k)];
  }
  return m;
}

std::string stack_header(Index p, Index q, Index n, const DistributionKind& kind) {
  std::string h = "# p=" + std::to_string(p) + " q=" + std::to_string(q) + " n=" + std::to_string(n) +
                  " kind=" + to_string(kind.family());
  if (kind.is(Family::Gaussian)) h += " sigma2=" + format_double(kind.sigma2());
  return h;
}

std::string format_stack(const std::vector<MatrixXd>& matrices, const DistributionKind& kind) {
  if (matrices.empty()) fail(ErrorCode::Shape, "cannot write an empty stack");
  std::string out = stack_header(matrices.front().rows(), matrices.front().cols(),
                                 static_cast<Index>(matrices.size()), kind);
  out += '\n';
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    if (i) out += '\n';
    out += format_matrix(matrices[i]);
  }
  return out;
}

void write_stack_file(const std::filesystem::path& path, const MatrixStack<double>& stack) {
  write_text(path, format_stack(stack.matrices(), stack.kind()));
}

MatrixStack<double> parse_stack(const std::string& text, Link link) {
  const auto lines = split_lines(text);
  if (lines.empty()) parse_error(1, "empty stack file");

  std::string_view header = lines.front();
  if (header.substr(0, 2) != "# ") parse_error(1, "header must start with '# '");
  std::optional<Index> p, q, n;
  std::optional<Family> family;
  std::optional<double> sigma2;
  for (std::string_view token : split(header.substr(2), ' ')) {
    if (token.empty()) continue;
    const std::size_t eq = token.find('=');
    if (eq == std::string_view::npos) parse_error(1, "malformed header field '" + std::string(token) + "'");
    const std::string_view key = token.substr(0, eq);
    const std::string_view value = token.substr(eq + 1);
    auto as_int = [&](std::string_view v) {
      Index out = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size() || out <= 0) {
        parse_error(1, "header field " + std::string(key) + " must be a positive integer");
      }
      return out;
    };
    if (key == "p") p = as_int(value);
    else if (key == "q") q = as_int(value);
    else if (key == "n") n = as_int(value);
    else if (key == "kind") {
      try {
        family = parse_family(value);
      } catch (const Error&) {
        parse_error(1, "unknown kind '" + std::string(value) + "'");
      }
    } else if (key == "sigma2") {
      double v = 0;
      if (!parse_number(value, v) || !(v > 0.0)) parse_error(1, "sigma2 must be a positive number");
      sigma2 = v;
    } else {
      parse_error(1, "unknown header field '" + std::string(key) + "'");
    }
  }
  if (!p || !q || !n || !family) parse_error(1, "header must define p, q, n and kind");
  if (sigma2 && *family != Family::Gaussian) parse_error(1, "sigma2 is only valid for kind=gaussian");
  const DistributionKind kind = DistributionKind::of(*family, sigma2.value_or(1.0));

  std::vector<MatrixXd> matrices;
  std::size_t idx = 1;
  while (idx < lines.size()) {
    if (!matrices.empty()) {
      if (!lines[idx].empty()) {
        parse_error(idx + 1, "expected a blank line between blocks (block " + std::to_string(matrices.size()) +
                                 " has more than p=" + std::to_string(*p) + " rows?)");
      }
      ++idx;
    }
    MatrixXd m(*p, *q);
    for (Index j = 0; j < *p; ++j, ++idx) {
      if (idx >= lines.size()) {
        parse_error(idx + 1, "block " + std::to_string(matrices.size() + 1) + " ends after " + std::to_string(j) +
                                 " of " + std::to_string(*p) + " rows");
      }
      if (lines[idx].empty()) parse_error(idx + 1, "unexpected blank line inside a block");
      const auto row = parse_row(lines[idx], *q, idx + 1);
      for (Index k = 0; k < *q; ++k) m(j, k) = row[static_cast<std::size_t>(k)];
    }
    matrices.push_back(std::move(m));
  }
  if (static_cast<Index>(matrices.size()) != *n) {
    fail(ErrorCode::Parse, "header declares n=" + std::to_string(*n) + " blocks but the file contains " +
                               std::to_string(matrices.size()) + " blocks");
  }
  return MatrixStack<double>(kind, std::move(matrices), link);
}

MatrixStack<double> read_stack_file(const std::filesystem::path& path, Link link) {
  try {
    return parse_stack(read_text(path), link);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void RunConfig::apply(SolverConfig<double>& config) const {
  if (alpha) config.alpha = *alpha;
  if (beta) config.beta = *beta;
  if (betas) fail(ErrorCode::InvalidConfig, "betas is only valid for multi-group runs");
  if (mu) config.mu = *mu;
  if (tol) config.tol = *tol;
  if (max_iter) config.max_iter = *max_iter;
  if (init_rank) config.init_rank = *init_rank;
  if (clamp_eps) config.clamp_eps = *clamp_eps;
}

void RunConfig::apply(MultiConfig<double>& config) const {
  if (alpha) config.alpha = *alpha;
  if (beta) config.betas.assign(config.betas.size(), *beta);
  if (betas) config.betas = *betas;
  if (mu) config.mu = *mu;
  if (tol) config.tol = *tol;
  if (max_iter) config.max_iter = *max_iter;
  if (init_rank) config.init_rank = *init_rank;
  if (clamp_eps) config.clamp_eps = *clamp_eps;
  if (pooling) config.pooling = *pooling;
}

RunConfig parse_run_config(const json& doc) {
  check_keys(doc, {"alpha", "beta", "betas", "mu", "tol", "max_iter", "init_rank", "clamp_eps", "pooling", "link"},
             "run configuration");
  RunConfig c;
  c.alpha = get<double>(doc, "alpha");
  c.beta = get<double>(doc, "beta");
  c.betas = get<std::vector<double>>(doc, "betas");
  c.mu = get<double>(doc, "mu");
  c.tol = get<double>(doc, "tol");
  c.max_iter = get<int>(doc, "max_iter");
  c.init_rank = get<Index>(doc, "init_rank");
  c.clamp_eps = get<double>(doc, "clamp_eps");
  if (auto pooling = get<std::string>(doc, "pooling")) {
    if (*pooling == "equal") c.pooling = PoolWeighting::Equal;
    else if (*pooling == "sample_size") c.pooling = PoolWeighting::SampleSize;
    else fail(ErrorCode::InvalidConfig, "pooling must be 'equal' or 'sample_size'");
  }
  if (auto link = get<std::string>(doc, "link")) c.link = parse_link(*link);
  return c;
}

SimSpec parse_sim_spec(const json& doc) {
  check_keys(doc,
             {"p", "kind", "n", "G", "seed", "sigma2", "bg_mean", "bg_sd", "target_rank", "spike_count", "spike_lo",
              "spike_hi", "disjoint_supports"},
             "simulation spec");
  const auto p = get<Index>(doc, "p");
  const auto kind_name = get<std::string>(doc, "kind");
  if (!p || !kind_name) fail(ErrorCode::InvalidConfig, "simulation spec requires p and kind");
  const Family family = parse_family(*kind_name);
  const auto sigma2 = get<double>(doc, "sigma2");
  if (sigma2 && family != Family::Gaussian) fail(ErrorCode::InvalidConfig, "sigma2 is only valid for gaussian");
  if (*p <= 0) fail(ErrorCode::InvalidConfig, "p must be positive");

  SimSpec spec = SimSpec::preset(DistributionKind::of(family, sigma2.value_or(1.0)), *p);
  if (auto v = get<Index>(doc, "n")) spec.n = *v;
  if (auto v = get<Index>(doc, "G")) spec.groups = *v;
  if (auto v = get<std::uint64_t>(doc, "seed")) spec.seed = *v;
  if (auto v = get<double>(doc, "bg_mean")) spec.bg_mean = *v;
  if (auto v = get<double>(doc, "bg_sd")) spec.bg_sd = *v;
  if (auto v = get<Index>(doc, "target_rank")) spec.target_rank = *v;
  if (auto v = get<Index>(doc, "spike_count")) spec.spike_count = *v;
  if (auto v = get<double>(doc, "spike_lo")) spec.spike_lo = *v;
  if (auto v = get<double>(doc, "spike_hi")) spec.spike_hi = *v;
  if (auto v = get<bool>(doc, "disjoint_supports")) spec.disjoint_supports = *v;
  spec.validate();
  return spec;
}

json to_json(const SimSpec& spec) {
  json doc = {{"p", spec.p},
              {"kind", to_string(spec.kind.family())},
              {"n", spec.n},
              {"G", spec.groups},
              {"seed", spec.seed},
              {"bg_mean", spec.bg_mean},
              {"bg_sd", spec.bg_sd},
              {"target_rank", spec.target_rank},
              {"spike_count", spec.spike_count},
              {"spike_lo", spec.spike_lo},
              {"spike_hi", spec.spike_hi},
              {"disjoint_supports", spec.disjoint_supports}};
  if (spec.kind.is(Family::Gaussian)) doc["sigma2"] = spec.kind.sigma2();
  return doc;
}

json diagnostics_json(const Decomposition<double>& d) {
  return {{"kind", to_string(d.kind.family())},
          {"link", to_string(d.link)},
          {"iterations", d.iterations},
          {"converged", d.converged},
          {"final_residual", d.final_residual},
          {"residual_trace", trace_json(d.residual_trace)},
          {"objective_trace", trace_json(d.objective_trace)},
          {"warnings", d.warnings}};
}

json diagnostics_json(const MultiDecomposition<double>& d) {
  json groups = json::array();
  for (const auto& g : d.groups) {
    groups.push_back({{"iterations", g.iterations},
                      {"converged", g.converged},
                      {"final_residual", g.final_residual},
                      {"residual_trace", trace_json(g.residual_trace)},
                      {"objective_trace", trace_json(g.objective_trace)}});
  }
  return {{"kind", to_string(d.kind.family())},
          {"link", to_string(d.link)},
          {"converged", d.converged()},
          {"objective", d.objective},
          {"stage1", diagnostics_json(d.stage1)},
          {"groups", groups}};
}

}  // namespace erpca::io

// depthkv: command-line front end for trace generation, importance scoring,
// layer budget allocation, chunked-prefill eviction simulation,
// representation metrics and the statistical machinery.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "depthkv/allocation.hpp"
#include "depthkv/errors.hpp"
#include "depthkv/importance.hpp"
#include "depthkv/prefill_sim.hpp"
#include "depthkv/rep_metrics.hpp"
#include "depthkv/rng.hpp"
#include "depthkv/score_table.hpp"
#include "depthkv/snapshot.hpp"
#include "depthkv/stats.hpp"
#include "depthkv/trace.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kParse = 3,
  kInfeasible = 4,
  kIo = 5,
  kInternal = 70,
};

// --out without a directory part lands in $DEPTHKV_OUT_DIR when set.
fs::path resolve_out(const std::string& out) {
  fs::path path(out);
  if (!path.has_parent_path()) {
    if (const char* dir = std::getenv("DEPTHKV_OUT_DIR"); dir && *dir) {
      return fs::path(dir) / path;
    }
  }
  return path;
}

std::string fmt_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw depthkv::IoError("cannot open output file: " + path.string());
  }
  out << content;
  if (!out) {
    throw depthkv::IoError("write failed: " + path.string());
  }
}

// All numeric tokens of a text file in order, one value per CSV cell or
// whitespace-separated token. A leading non-numeric line is treated as a
// header and skipped.
std::vector<double> load_vector(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw depthkv::IoError("cannot open vector file: " + path.string());
  }
  std::vector<double> values;
  std::string line;
  bool first_line = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string token;
    std::vector<double> row;
    bool row_ok = true;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',' || line[i] == ' ' || line[i] == '\t') {
        if (!token.empty()) {
          try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            row.push_back(v);
          } catch (const std::exception&) {
            row_ok = false;
          }
          token.clear();
        }
      } else {
        token.push_back(line[i]);
      }
    }
    if (row.empty()) continue;
    if (!row_ok) {
      if (first_line) {
        first_line = false;
        continue;  // header
      }
      throw depthkv::ParseError(depthkv::ParseErrc::bad_csv,
                                "non-numeric cell in " + path.string() +
                                    " line " + std::to_string(line_no));
    }
    first_line = false;
    values.insert(values.end(), row.begin(), row.end());
  }
  if (values.empty()) {
    throw depthkv::ParseError(depthkv::ParseErrc::bad_csv,
                              "no numeric values in " + path.string());
  }
  return values;
}

// Per-layer metric vector: either a single numeric row, or a table whose
// columns are averaged (a score table with a header works as-is).
std::vector<double> load_metric_vector(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw depthkv::IoError("cannot open metric file: " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::string token;
    bool numeric = true;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (!token.empty()) {
          try {
            std::size_t used = 0;
            row.push_back(std::stod(token, &used));
            if (used != token.size()) numeric = false;
          } catch (const std::exception&) {
            numeric = false;
          }
        }
        token.clear();
      } else if (line[i] != ' ' && line[i] != '\t') {
        token.push_back(line[i]);
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header line
      throw depthkv::ParseError(depthkv::ParseErrc::bad_csv,
                                "non-numeric metric cell in " + path.string() +
                                    " line " + std::to_string(line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw depthkv::ParseError(depthkv::ParseErrc::bad_csv,
                                "ragged metric row in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw depthkv::ParseError(depthkv::ParseErrc::bad_csv,
                              "no numeric rows in " + path.string());
  }
  std::vector<double> metric(rows.front().size(), 0.0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) metric[c] += row[c];
  }
  for (double& v : metric) v /= static_cast<double>(rows.size());
  return metric;
}

depthkv::ScorerKind parse_scorer(const std::string& name) {
  if (name == "h2o") return depthkv::ScorerKind::h2o;
  if (name == "value_aware_l1") return depthkv::ScorerKind::value_aware_l1;
  if (name == "value_aware_l2") return depthkv::ScorerKind::value_aware_l2;
  throw CLI::ValidationError("--scorer", "unknown scorer '" + name + "'");
}

struct AllocateArgs {
  std::string strategy;
  std::uint32_t layers = 0;
  double rho = depthkv::kDefaultGlobalRatio;
  double rho_max = depthkv::kDefaultRhoMax;
  std::string metric_file;
  std::uint32_t middle_layers = 2;
  bool exempt_first = false;
};

depthkv::LayerBudgetPlan build_plan(const AllocateArgs& args) {
  std::vector<double> metric;
  if (args.strategy == "mga" || args.strategy == "mlma") {
    if (args.metric_file.empty()) {
      throw CLI::ValidationError("--metric",
                                 "strategy " + args.strategy +
                                     " needs a per-layer metric file");
    }
    metric = load_metric_vector(args.metric_file);
    if (metric.size() != args.layers) {
      throw depthkv::ParseError(
          depthkv::ParseErrc::bad_csv,
          "metric file has " + std::to_string(metric.size()) +
              " layers, expected " + std::to_string(args.layers));
    }
  }
  if (args.strategy == "uniform") {
    return depthkv::uniform_plan(args.layers, args.rho, args.exempt_first);
  }
  if (args.strategy == "mlp") {
    return depthkv::mlp_plan(args.layers, args.rho);
  }
  if (args.strategy == "mga") {
    return depthkv::mga_plan(args.layers, args.rho, metric, args.rho_max);
  }
  if (args.strategy == "mlma") {
    return depthkv::mlma_plan(args.layers, args.rho, metric, args.middle_layers,
                              args.rho_max);
  }
  throw CLI::ValidationError("--strategy", "unknown strategy '" + args.strategy + "'");
}

void emit_error(const char* code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layer-dependent KV cache budget toolkit"};
  app.require_subcommand(1);

  // ---- gen-trace ----
  auto* gen = app.add_subcommand("gen-trace", "generate a seeded synthetic trace");
  std::uint32_t g_layers = 0, g_heads = 0, g_seq = 0, g_dk = 16, g_dv = 16;
  std::uint64_t g_seed = 0;
  std::string g_out;
  gen->add_option("--layers", g_layers, "number of layers")->required();
  gen->add_option("--heads", g_heads, "number of heads")->required();
  gen->add_option("--seq-len", g_seq, "number of tokens")->required();
  gen->add_option("--key-dim", g_dk, "key/query width")->capture_default_str();
  gen->add_option("--value-dim", g_dv, "value width")->capture_default_str();
  gen->add_option("--seed", g_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", g_out, "output .dkvt path")->required();

  // ---- importance ----
  auto* imp = app.add_subcommand("importance", "score token importance for one layer");
  std::string i_trace, i_scorer = "h2o", i_out, i_retained_out, i_format = "csv";
  std::uint32_t i_layer = 0;
  std::optional<std::uint32_t> i_budget;
  imp->add_option("--trace", i_trace, "input .dkvt path")->required();
  imp->add_option("--layer", i_layer, "layer index")->required();
  imp->add_option("--scorer", i_scorer, "h2o|value_aware_l1|value_aware_l2")->capture_default_str();
  imp->add_option("--budget", i_budget, "retained-token budget for --retained-out");
  imp->add_option("--out", i_out, "scores output path")->required();
  imp->add_option("--retained-out", i_retained_out, "retained-set JSON path");
  imp->add_option("--format", i_format, "csv|json")->capture_default_str()
      ->check(CLI::IsMember({"csv", "json"}));

  // ---- allocate ----
  auto* alloc = app.add_subcommand("allocate", "build a layer budget plan");
  AllocateArgs a_args;
  std::optional<std::uint32_t> a_seq_len;
  std::string a_out;
  alloc->add_option("--strategy", a_args.strategy, "uniform|mlp|mga|mlma")
      ->required()
      ->check(CLI::IsMember({"uniform", "mlp", "mga", "mlma"}));
  alloc->add_option("--layers", a_args.layers, "number of layers")->required();
  alloc->add_option("--rho", a_args.rho, "global pruning ratio")->capture_default_str();
  alloc->add_option("--rho-max", a_args.rho_max, "per-layer cap for mga/mlma")->capture_default_str();
  alloc->add_option("--metric", a_args.metric_file, "per-layer metric CSV (mga/mlma)");
  alloc->add_option("--middle-layers", a_args.middle_layers,
                    "protected middle layers for mlma (2|4|6)")->capture_default_str()
      ->check(CLI::IsMember({2, 4, 6}));
  alloc->add_flag("--exempt-first-layer", a_args.exempt_first,
                  "uniform only: keep layer 0 unpruned");
  alloc->add_option("--seq-len", a_seq_len, "token count; adds integer counts");
  alloc->add_option("--out", a_out, "plan JSON path")->required();

  // ---- prune-sim ----
  auto* sim = app.add_subcommand("prune-sim", "run chunked-prefill eviction");
  std::string s_trace, s_plan, s_scorer = "h2o", s_replay = "renorm", s_out;
  AllocateArgs s_args;
  std::uint32_t s_chunk = depthkv::kDefaultChunkSize;
  sim->add_option("--trace", s_trace, "input .dkvt path")->required();
  sim->add_option("--plan", s_plan, "plan JSON path (alternative to --strategy)");
  sim->add_option("--strategy", s_args.strategy, "inline plan: uniform|mlp|mga|mlma")
      ->check(CLI::IsMember({"uniform", "mlp", "mga", "mlma"}));
  sim->add_option("--rho", s_args.rho, "inline plan: global ratio")->capture_default_str();
  sim->add_option("--rho-max", s_args.rho_max, "inline plan: cap")->capture_default_str();
  sim->add_option("--metric", s_args.metric_file, "inline plan: metric CSV");
  sim->add_option("--middle-layers", s_args.middle_layers, "inline plan: 2|4|6")->capture_default_str()
      ->check(CLI::IsMember({2, 4, 6}));
  sim->add_flag("--exempt-first-layer", s_args.exempt_first, "inline plan flag");
  sim->add_option("--chunk-size", s_chunk, "prefill chunk size")->capture_default_str();
  sim->add_option("--scorer", s_scorer, "h2o|value_aware_l1|value_aware_l2")->capture_default_str();
  sim->add_option("--replay", s_replay, "renorm|full-context")->capture_default_str()
      ->check(CLI::IsMember({"renorm", "full-context"}));
  sim->add_option("--out", s_out, "report JSON path")->required();

  // ---- metrics ----
  auto* met = app.add_subcommand("metrics", "representation metrics over snapshots");
  std::vector<std::string> m_snapshots, m_augmented;
  depthkv::MetricConfig m_config;
  std::string m_denominator = "standard", m_format = "csv", m_out;
  std::uint64_t m_seed = 0;
  bool m_spectral_only = false;
  met->add_option("--snapshot", m_snapshots, "original .dkvr paths")
      ->required()
      ->expected(-1);
  met->add_option("--augmented", m_augmented, "augmented .dkvr paths")->expected(-1);
  met->add_option("--drop-prob", m_config.drop_prob,
                  "token dropout used when no --augmented given")->capture_default_str();
  met->add_option("--seed", m_seed, "perturbation/bootstrap seed")->capture_default_str();
  met->add_option("--knn-k", m_config.knn_k, "curvature neighbors")->capture_default_str();
  met->add_option("--tau", m_config.temperature, "infonce temperature")->capture_default_str();
  met->add_option("--resamples", m_config.bootstrap_resamples,
                  "bootstrap resamples")
      ->capture_default_str();
  met->add_option("--alpha", m_config.bootstrap_alpha, "bootstrap alpha")->capture_default_str();
  met->add_option("--denominator", m_denominator, "standard|literal")->capture_default_str()
      ->check(CLI::IsMember({"standard", "literal"}));
  met->add_flag("--spectral-only", m_spectral_only,
                "skip pairwise metrics (no perturbation)");
  met->add_option("--format", m_format, "csv|json")->capture_default_str()
      ->check(CLI::IsMember({"csv", "json"}));
  met->add_option("--out", m_out, "report path")->required();

  // ---- stats ----
  auto* stats = app.add_subcommand("stats", "statistical analyses");
  stats->require_subcommand(1);

  auto* perm = stats->add_subcommand("perm", "permutation test of layer uniformity");
  std::string p_table, p_scheme = "row", p_out, p_format = "json";
  std::uint32_t p_nperm = depthkv::kDefaultPermutations;
  std::uint64_t p_seed = 0;
  perm->add_option("--table", p_table, "score table CSV")->required();
  perm->add_option("--n-perm", p_nperm, "permutation count")->capture_default_str();
  perm->add_option("--seed", p_seed, "permutation seed")->capture_default_str();
  perm->add_option("--scheme", p_scheme, "row|global")->capture_default_str()
      ->check(CLI::IsMember({"row", "global"}));
  perm->add_option("--out", p_out, "result path")->required();
  perm->add_option("--format", p_format, "json|csv")->capture_default_str()
      ->check(CLI::IsMember({"json", "csv"}));

  auto* pear = stats->add_subcommand("pearson", "Pearson correlation");
  auto* spear = stats->add_subcommand("spearman", "Spearman correlation");
  std::string c_x, c_y, c_out;
  for (auto* cmd : {pear, spear}) {
    cmd->add_option("--x", c_x, "first vector file")->required();
    cmd->add_option("--y", c_y, "second vector file")->required();
    cmd->add_option("--out", c_out, "result JSON path")->required();
  }

  auto* yap = stats->add_subcommand("yap", "yapscore of an output length");
  std::int64_t y_length = 0, y_baseline = 0;
  std::string y_out;
  yap->add_option("--length", y_length, "output length")->required();
  yap->add_option("--baseline", y_baseline, "baseline length")->required();
  yap->add_option("--out", y_out, "optional result JSON path");

  auto* zs = stats->add_subcommand("zscore", "standardize a vector");
  std::string z_values, z_out;
  zs->add_option("--values", z_values, "vector file")->required();
  zs->add_option("--out", z_out, "output CSV path")->required();

  // ---- compare ----
  auto* cmp = app.add_subcommand("compare", "run several plans on one trace");
  std::string k_trace, k_scorer = "h2o", k_replay = "renorm", k_out;
  std::vector<std::string> k_plans;
  std::uint32_t k_chunk = depthkv::kDefaultChunkSize;
  cmp->add_option("--trace", k_trace, "input .dkvt path")->required();
  cmp->add_option("--plan", k_plans, "plan JSON paths")->required()->expected(-1);
  cmp->add_option("--chunk-size", k_chunk, "prefill chunk size")->capture_default_str();
  cmp->add_option("--scorer", k_scorer, "h2o|value_aware_l1|value_aware_l2")->capture_default_str();
  cmp->add_option("--replay", k_replay, "renorm|full-context")->capture_default_str()
      ->check(CLI::IsMember({"renorm", "full-context"}));
  cmp->add_option("--out", k_out, "report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      const auto trace = depthkv::generate_synthetic_trace(g_layers, g_heads,
                                                           g_seq, g_dk, g_dv,
                                                           g_seed);
      const auto path = resolve_out(g_out);
      depthkv::save_trace(trace, path);
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (imp->parsed()) {
      const auto trace = depthkv::load_trace(i_trace);
      depthkv::ImportanceScores scores;
      switch (parse_scorer(i_scorer)) {
        case depthkv::ScorerKind::h2o:
          scores = depthkv::h2o_importance(trace, i_layer);
          break;
        case depthkv::ScorerKind::value_aware_l1:
          scores = depthkv::value_aware_importance(trace, i_layer,
                                                   depthkv::ValueNorm::l1);
          break;
        case depthkv::ScorerKind::value_aware_l2:
          scores = depthkv::value_aware_importance(trace, i_layer,
                                                   depthkv::ValueNorm::l2);
          break;
      }
      const auto path = resolve_out(i_out);
      if (i_format == "csv") {
        write_text(path, depthkv::scores_to_csv(scores));
      } else {
        json j{{"layer", scores.layer}, {"scores", scores.scores}};
        write_text(path, j.dump(2) + "\n");
      }
      if (!i_retained_out.empty()) {
        if (!i_budget) {
          throw CLI::ValidationError("--retained-out", "needs --budget");
        }
        const auto retained = depthkv::select_top_tokens(scores, *i_budget);
        write_text(resolve_out(i_retained_out),
                   depthkv::retained_to_json(retained) + "\n");
      }
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (alloc->parsed()) {
      const auto plan = build_plan(a_args);
      std::optional<depthkv::LayerCounts> counts;
      if (a_seq_len) {
        counts = depthkv::ratios_to_counts(plan, *a_seq_len);
      }
      const auto path = resolve_out(a_out);
      write_text(path, depthkv::plan_to_json(plan, counts ? &*counts : nullptr));
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (sim->parsed()) {
      const auto trace = depthkv::load_trace(s_trace);
      depthkv::PrefillConfig config;
      config.chunk_size = s_chunk;
      config.scorer = parse_scorer(s_scorer);
      config.replay = s_replay == "renorm"
                          ? depthkv::AttentionReplay::visible_renormalized
                          : depthkv::AttentionReplay::full_context;
      if (!s_plan.empty()) {
        std::ifstream in(s_plan);
        if (!in) {
          throw depthkv::IoError("cannot open plan file: " + s_plan);
        }
        const std::string text((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        config.plan = depthkv::plan_from_json(text);
      } else if (!s_args.strategy.empty()) {
        s_args.layers = trace.num_layers();
        config.plan = build_plan(s_args);
      } else {
        throw CLI::ValidationError("--plan", "needs --plan or --strategy");
      }
      const auto cache = depthkv::run_chunked_prefill(trace, config);
      const auto path = resolve_out(s_out);
      write_text(path, depthkv::prefill_report_to_json(config.plan.strategy, cache,
                                                       trace.header()));
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (met->parsed()) {
      std::vector<depthkv::RepresentationSnapshot> originals;
      for (const auto& p : m_snapshots) {
        originals.push_back(depthkv::load_snapshot(p));
      }
      std::vector<depthkv::RepresentationSnapshot> augmenteds;
      if (!m_augmented.empty()) {
        for (const auto& p : m_augmented) {
          augmenteds.push_back(depthkv::load_snapshot(p));
        }
      } else if (!m_spectral_only) {
        // deterministic per-sample perturbation streams off the base seed
        const depthkv::CounterRng root(m_seed);
        for (std::size_t i = 0; i < originals.size(); ++i) {
          augmenteds.push_back(depthkv::perturb_snapshot(
              originals[i], m_config.drop_prob, root.derive(i).seed()));
        }
      }
      m_config.denominator_mode = m_denominator == "standard"
                                      ? depthkv::DenominatorMode::standard
                                      : depthkv::DenominatorMode::literal;
      const auto report =
          depthkv::compute_metric_report(originals, augmenteds, m_config, m_seed);
      const auto path = resolve_out(m_out);
      write_text(path, m_format == "csv" ? depthkv::report_to_csv(report)
                                         : depthkv::report_to_json(report));
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (perm->parsed()) {
      const auto table = depthkv::load_score_table(p_table);
      const auto scheme = p_scheme == "row"
                              ? depthkv::PermutationScheme::row_wise
                              : depthkv::PermutationScheme::global;
      const auto result = depthkv::permutation_test(table, p_nperm, p_seed, scheme);
      const auto path = resolve_out(p_out);
      if (p_format == "json") {
        write_text(path, depthkv::permutation_result_to_json(result));
      } else {
        std::string csv = "observed,p_value,effect_size,n_perm,seed\n";
        csv += fmt_double(result.observed) + ",";
        csv += fmt_double(result.p_value) + ",";
        csv += fmt_double(result.effect_size) + ",";
        csv += std::to_string(result.n_perm) + ",";
        csv += std::to_string(result.seed) + "\n";
        write_text(path, csv);
      }
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (pear->parsed() || spear->parsed()) {
      const auto x = load_vector(c_x);
      const auto y = load_vector(c_y);
      const auto result = pear->parsed() ? depthkv::pearson(x, y)
                                         : depthkv::spearman(x, y);
      const auto path = resolve_out(c_out);
      write_text(path, depthkv::correlation_result_to_json(result));
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (yap->parsed()) {
      const auto score = depthkv::yapscore(y_length, y_baseline);
      const std::string text =
          json{{"yapscore", score}, {"length", y_length}, {"baseline", y_baseline}}
              .dump(2) +
          "\n";
      if (!y_out.empty()) {
        write_text(resolve_out(y_out), text);
      }
      std::cout << text;
      return kOk;
    }

    if (zs->parsed()) {
      const auto values = load_vector(z_values);
      const auto z = depthkv::zscore(values);
      std::string csv = "z\n";
      for (double v : z) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        csv.append(buf, res.ptr);
        csv.push_back('\n');
      }
      const auto path = resolve_out(z_out);
      write_text(path, csv);
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    if (cmp->parsed()) {
      const auto trace = depthkv::load_trace(k_trace);
      std::vector<depthkv::LayerBudgetPlan> plans;
      for (const auto& p : k_plans) {
        std::ifstream in(p);
        if (!in) {
          throw depthkv::IoError("cannot open plan file: " + p);
        }
        const std::string text((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        plans.push_back(depthkv::plan_from_json(text));
      }
      const auto replay = k_replay == "renorm"
                              ? depthkv::AttentionReplay::visible_renormalized
                              : depthkv::AttentionReplay::full_context;
      const auto report = depthkv::compare_plans(trace, plans, k_chunk,
                                                 parse_scorer(k_scorer), replay);
      const auto path = resolve_out(k_out);
      write_text(path, depthkv::comparison_report_to_json(report));
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }

    emit_error("usage", "no subcommand given");
    return kUsage;
  } catch (const CLI::ValidationError& e) {
    emit_error("usage", e.what());
    return kUsage;
  } catch (const depthkv::ParseError& e) {
    emit_error("parse", e.what());
    return kParse;
  } catch (const depthkv::InfeasibleError& e) {
    emit_error("infeasible", e.what());
    return kInfeasible;
  } catch (const depthkv::IoError& e) {
    emit_error("io", e.what());
    return kIo;
  } catch (const std::invalid_argument& e) {
    emit_error("usage", e.what());
    return kUsage;
  } catch (const std::out_of_range& e) {
    emit_error("usage", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return kInternal;
  }
}

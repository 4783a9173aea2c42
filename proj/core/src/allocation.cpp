#include "depthkv/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "depthkv/errors.hpp"

namespace depthkv {

namespace {

constexpr double kScoreEpsilon = 1e-9;
constexpr double kRedistributeTol = 1e-12;
// Slack for feasibility comparisons that can land exactly on the boundary
// (e.g. L*rho == rho_max * |pruned|) up to representation error.
constexpr double kFeasibilityTol = 1e-9;

void check_global_ratio(double global_ratio) {
  if (!(global_ratio >= 0.0 && global_ratio < 1.0)) {
    throw std::invalid_argument("global pruning ratio must lie in [0, 1)");
  }
}

// Proportional allocation of `total_mass` over `pruned`, capped at rho_max,
// excess redistributed among unsaturated layers by their normalized scores.
void metric_guided_fill(LayerBudgetPlan& plan,
                        const std::vector<std::uint32_t>& pruned,
                        std::span<const double> metric, double total_mass,
                        double rho_max) {
  if (!(rho_max > 0.0 && rho_max <= 1.0)) {
    throw std::invalid_argument("rho_max must lie in (0, 1]");
  }
  for (std::uint32_t l : pruned) {
    if (!std::isfinite(metric[l])) {
      throw std::invalid_argument("metric value for layer " + std::to_string(l) +
                                  " is not finite");
    }
  }
  if (total_mass > rho_max * static_cast<double>(pruned.size()) + kFeasibilityTol) {
    throw InfeasibleError(
        "budget infeasible: required pruned mass " + std::to_string(total_mass) +
        " exceeds rho_max * " + std::to_string(pruned.size()) + " = " +
        std::to_string(rho_max * static_cast<double>(pruned.size())));
  }

  double min_metric = metric[pruned.front()];
  for (std::uint32_t l : pruned) {
    min_metric = std::min(min_metric, metric[l]);
  }

  // s = metric - min + eps keeps all-equal metrics well defined.
  std::vector<double> alpha(pruned.size());
  double score_sum = 0.0;
  for (std::size_t i = 0; i < pruned.size(); ++i) {
    alpha[i] = metric[pruned[i]] - min_metric + kScoreEpsilon;
    score_sum += alpha[i];
  }
  for (double& a : alpha) {
    a /= score_sum;
  }

  std::vector<double> ratio(pruned.size());
  for (std::size_t i = 0; i < pruned.size(); ++i) {
    ratio[i] = total_mass * alpha[i];
  }

  std::vector<bool> saturated(pruned.size(), false);
  while (true) {
    double excess = 0.0;
    double unsaturated_alpha = 0.0;
    for (std::size_t i = 0; i < pruned.size(); ++i) {
      if (saturated[i]) continue;
      if (ratio[i] >= rho_max) {
        excess += ratio[i] - rho_max;
        ratio[i] = rho_max;
        saturated[i] = true;
      } else {
        unsaturated_alpha += alpha[i];
      }
    }
    if (excess <= kRedistributeTol || unsaturated_alpha == 0.0) {
      break;
    }
    for (std::size_t i = 0; i < pruned.size(); ++i) {
      if (!saturated[i]) {
        ratio[i] += excess * alpha[i] / unsaturated_alpha;
      }
    }
  }

  for (std::size_t i = 0; i < pruned.size(); ++i) {
    plan.ratios[pruned[i]] = ratio[i];
  }
}

LayerBudgetPlan make_plan(std::string strategy, std::uint32_t num_layers,
                          double global_ratio, double rho_max) {
  LayerBudgetPlan plan;
  plan.strategy = std::move(strategy);
  plan.num_layers = num_layers;
  plan.global_ratio = global_ratio;
  plan.rho_max = rho_max;
  plan.ratios.assign(num_layers, 0.0);
  return plan;
}

}  // namespace

double LayerBudgetPlan::mean_ratio() const {
  if (ratios.empty()) return 0.0;
  return std::accumulate(ratios.begin(), ratios.end(), 0.0) /
         static_cast<double>(ratios.size());
}

LayerBudgetPlan uniform_plan(std::uint32_t num_layers, double global_ratio,
                             bool exempt_first_layer) {
  if (num_layers == 0) {
    throw std::invalid_argument("uniform plan needs at least one layer");
  }
  check_global_ratio(global_ratio);

  LayerBudgetPlan plan = make_plan("uniform", num_layers, global_ratio, 1.0);
  if (!exempt_first_layer) {
    std::fill(plan.ratios.begin(), plan.ratios.end(), global_ratio);
    return plan;
  }

  if (num_layers < 2) {
    throw InfeasibleError("cannot exempt layer 0 with a single layer");
  }
  const double per_layer = static_cast<double>(num_layers) * global_ratio /
                           static_cast<double>(num_layers - 1);
  if (per_layer > 1.0 + kFeasibilityTol) {
    throw InfeasibleError("budget infeasible: exempting layer 0 needs per-layer ratio " +
                          std::to_string(per_layer));
  }
  plan.protected_layers = {0};
  for (std::uint32_t l = 1; l < num_layers; ++l) {
    plan.ratios[l] = std::min(per_layer, 1.0);
  }
  return plan;
}

LayerBudgetPlan mlp_plan(std::uint32_t num_layers, double global_ratio) {
  if (num_layers < 4) {
    throw std::invalid_argument("middle-layer protection needs L >= 4");
  }
  check_global_ratio(global_ratio);

  const std::set<std::uint32_t> protected_set = {0, num_layers / 2,
                                                 num_layers / 2 + 1};
  LayerBudgetPlan plan = make_plan("mlp", num_layers, global_ratio, 1.0);
  plan.protected_layers.assign(protected_set.begin(), protected_set.end());

  const std::size_t pruned_count = num_layers - protected_set.size();
  const double per_layer =
      static_cast<double>(num_layers) * global_ratio / static_cast<double>(pruned_count);
  if (per_layer > 1.0 + kFeasibilityTol) {
    throw InfeasibleError("budget infeasible: middle-layer protection needs per-layer ratio " +
                          std::to_string(per_layer) + " > 1");
  }
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    if (!protected_set.contains(l)) {
      plan.ratios[l] = std::min(per_layer, 1.0);
    }
  }
  return plan;
}

LayerBudgetPlan mga_plan(std::uint32_t num_layers, double global_ratio,
                         std::span<const double> metric, double rho_max) {
  if (num_layers < 2) {
    throw std::invalid_argument("metric-guided allocation needs L >= 2");
  }
  check_global_ratio(global_ratio);
  if (metric.size() != num_layers) {
    throw std::invalid_argument("metric length must equal the layer count");
  }

  LayerBudgetPlan plan = make_plan("mga", num_layers, global_ratio, rho_max);
  plan.protected_layers = {0};

  std::vector<std::uint32_t> pruned(num_layers - 1);
  std::iota(pruned.begin(), pruned.end(), 1u);
  metric_guided_fill(plan, pruned, metric,
                     static_cast<double>(num_layers) * global_ratio, rho_max);
  return plan;
}

std::vector<std::uint32_t> middle_layer_indices(std::uint32_t num_layers,
                                                std::uint32_t middle_layers) {
  if (middle_layers != 2 && middle_layers != 4 && middle_layers != 6) {
    throw std::invalid_argument("middle layer count must be 2, 4 or 6");
  }
  const std::uint32_t mid = num_layers / 2;
  const std::uint32_t half = middle_layers / 2;
  // m=2 protects {mid, mid+1}; m=4 and m=6 extend symmetrically.
  const std::uint32_t first = mid - (half - 1);
  std::vector<std::uint32_t> out;
  for (std::uint32_t l = first; l < first + middle_layers; ++l) {
    out.push_back(l);
  }
  return out;
}

LayerBudgetPlan mlma_plan(std::uint32_t num_layers, double global_ratio,
                          std::span<const double> metric,
                          std::uint32_t middle_layers, double rho_max) {
  if (num_layers <= middle_layers + 1) {
    throw std::invalid_argument("middle-layer metric allocation needs L > m + 1");
  }
  check_global_ratio(global_ratio);
  if (metric.size() != num_layers) {
    throw std::invalid_argument("metric length must equal the layer count");
  }

  std::set<std::uint32_t> protected_set = {0};
  for (std::uint32_t l : middle_layer_indices(num_layers, middle_layers)) {
    if (l >= num_layers) {
      throw std::invalid_argument("protected middle layer out of range");
    }
    protected_set.insert(l);
  }

  LayerBudgetPlan plan =
      make_plan("mlma" + std::to_string(middle_layers), num_layers, global_ratio, rho_max);
  plan.protected_layers.assign(protected_set.begin(), protected_set.end());

  std::vector<std::uint32_t> pruned;
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    if (!protected_set.contains(l)) {
      pruned.push_back(l);
    }
  }
  if (pruned.empty()) {
    throw InfeasibleError("no layers left to prune after protection");
  }
  metric_guided_fill(plan, pruned, metric,
                     static_cast<double>(num_layers) * global_ratio, rho_max);
  return plan;
}

LayerCounts ratios_to_counts(const LayerBudgetPlan& plan, std::uint32_t seq_len) {
  if (seq_len == 0) {
    throw std::invalid_argument("sequence length must be >= 1");
  }
  const std::size_t layers = plan.ratios.size();
  if (layers == 0) {
    throw std::invalid_argument("plan has no layers");
  }

  std::vector<double> target(layers);
  double target_sum = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    target[l] = (1.0 - plan.ratios[l]) * static_cast<double>(seq_len);
    target_sum += target[l];
  }
  const std::int64_t total = std::llround(target_sum);

  LayerCounts result;
  result.total = static_cast<std::uint64_t>(total);
  result.counts.assign(layers, 0);

  // Largest-remainder apportionment, remainder ties to the lower index.
  std::vector<double> remainder(layers);
  std::int64_t floor_sum = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const double f = std::floor(target[l]);
    result.counts[l] = static_cast<std::uint32_t>(f);
    remainder[l] = target[l] - f;
    floor_sum += static_cast<std::int64_t>(f);
  }
  std::int64_t deficit = total - floor_sum;
  std::vector<std::size_t> order(layers);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return a < b;
  });
  for (std::size_t i = 0; i < order.size() && deficit > 0; ++i, --deficit) {
    ++result.counts[order[i]];
  }

  if (total < static_cast<std::int64_t>(layers)) {
    throw InfeasibleError("total budget " + std::to_string(total) +
                          " cannot give every one of " + std::to_string(layers) +
                          " layers at least one token");
  }

  // Raise empty layers to one token, taking from the fullest layer.
  for (std::size_t l = 0; l < layers; ++l) {
    while (result.counts[l] == 0) {
      std::size_t donor = 0;
      for (std::size_t m = 1; m < layers; ++m) {
        if (result.counts[m] > result.counts[donor]) donor = m;
      }
      if (result.counts[donor] <= 1) {
        throw InfeasibleError("cannot guarantee one retained token per layer");
      }
      --result.counts[donor];
      ++result.counts[l];
    }
  }
  return result;
}

std::string plan_to_json(const LayerBudgetPlan& plan, const LayerCounts* counts) {
  nlohmann::json j;
  j["strategy"] = plan.strategy;
  j["L"] = plan.num_layers;
  j["rho"] = plan.global_ratio;
  j["rho_max"] = plan.rho_max;
  j["ratios"] = plan.ratios;
  j["protected"] = plan.protected_layers;
  j["counts"] = counts ? nlohmann::json(counts->counts) : nlohmann::json::array();
  return j.dump(2) + "\n";
}

LayerBudgetPlan plan_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(ParseErrc::bad_header,
                     std::string("plan JSON parse failure: ") + e.what());
  }
  try {
    LayerBudgetPlan plan;
    plan.strategy = j.at("strategy").get<std::string>();
    plan.num_layers = j.at("L").get<std::uint32_t>();
    plan.global_ratio = j.at("rho").get<double>();
    plan.rho_max = j.at("rho_max").get<double>();
    plan.ratios = j.at("ratios").get<std::vector<double>>();
    plan.protected_layers = j.at("protected").get<std::vector<std::uint32_t>>();
    if (plan.ratios.size() != plan.num_layers) {
      throw ParseError(ParseErrc::bad_header,
                       "plan ratios length does not match L");
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrc::bad_header,
                     std::string("plan JSON missing or mistyped field: ") + e.what());
  }
}

}  // namespace depthkv

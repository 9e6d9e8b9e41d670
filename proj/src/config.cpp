#include "treedp/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "treedp/errors.hpp"

namespace treedp {

namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

TreePtr build_tree(const json& cfg) {
  if (!cfg.contains("tree")) throw ConfigError("config field 'tree' is required");
  const json& tc = cfg.at("tree");
  if (tc.contains("nodes")) {
    std::vector<ScenarioTree::NodeInput> inputs;
    for (const auto& nj : tc.at("nodes")) {
      ScenarioTree::NodeInput in;
      in.parent = nj.value("parent", -1);
      in.prob = nj.value("prob", 1.0);
      if (nj.contains("shock")) in.shock = nj.at("shock").get<std::vector<double>>();
      inputs.push_back(std::move(in));
    }
    return std::make_shared<const ScenarioTree>(tc.at("horizon").get<int>(), std::move(inputs));
  }
  const std::string tmpl = tc.value("template", "binomial");
  const int horizon = tc.value("horizon", 2);
  if (tmpl == "binomial") {
    return std::make_shared<const ScenarioTree>(ScenarioTree::binomial(
        horizon, tc.value("p_up", 0.5), tc.value("up", 1.0), tc.value("down", -1.0)));
  }
  if (tmpl == "trinomial") {
    const auto probs = tc.value("probs", std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto shocks = tc.value("shocks", std::vector<double>{1.0, 0.0, -1.0});
    return std::make_shared<const ScenarioTree>(ScenarioTree::trinomial(horizon, probs, shocks));
  }
  throw ConfigError("tree.template must be 'binomial' or 'trinomial', got '" + tmpl + "'");
}

ForwardGenerator build_forward(const json& fc) {
  const std::string kind = fc.value("kind", "self_financing");
  if (kind == "wealth_consumption") return ForwardGenerator::wealth_consumption();
  if (kind == "self_financing") return ForwardGenerator::self_financing();
  if (kind == "portfolio_identity") return ForwardGenerator::portfolio_identity();
  throw ConfigError("forward.kind '" + kind + "' is not recognized");
}

BackwardGenerator build_backward(const json& bc) {
  const std::string kind = bc.value("kind", "entropic_wealth");
  if (kind == "entropic_wealth")
    return BackwardGenerator::entropic_wealth(bc.value("gamma_min", 1.0),
                                              bc.value("gamma_max", bc.value("gamma_min", 1.0)));
  if (kind == "additive_consumption") {
    const double scale = bc.value("reward_scale", 2.0);
    // Concave reward of the consumption coordinate (the last one), with a
    // bounded derivative so grid refinement converges cleanly.
    return BackwardGenerator::additive(
        [scale](const ScenarioTree&, int, double, std::span<const double> z) {
          return z.empty() ? 0.0 : scale * std::log1p(std::max(z.back(), 0.0));
        });
  }
  if (kind == "scaling") return BackwardGenerator::scaling_entropic();
  throw ConfigError("backward.kind '" + kind + "' is not recognized");
}

ConditionalRiskMeasure build_risk(const json& rc) {
  const std::string kind = rc.value("kind", "entropic");
  if (kind == "entropic") return ConditionalRiskMeasure::entropic(rc.value("gamma", 1.0));
  if (kind == "negative_expectation") return ConditionalRiskMeasure::negative_expectation();
  throw ConfigError("risk.kind '" + kind + "' is not recognized");
}

double cumulative_shock(const ScenarioTree& tree, int id) {
  double s = 0.0;
  for (const TreeNode* n = &tree.node(id); n->parent >= 0; n = &tree.node(n->parent))
    if (!n->shock.empty()) s += n->shock.front();
  return s;
}

SharingProblem build_sharing(const json& cfg, const TreePtr& tree) {
  if (!cfg.contains("sharing")) throw ConfigError("config field 'sharing' is required for share");
  const json& sc = cfg.at("sharing");
  SharingProblem problem;
  problem.tree = tree;
  const double drift = sc.value("drift", 0.1);
  for (const auto& agent : sc.at("agents")) {
    std::vector<ConditionalValue> process;
    if (agent.contains("endowments")) {
      const auto rows = agent.at("endowments").get<std::vector<std::vector<double>>>();
      for (int s = 0; s <= tree->horizon(); ++s)
        process.push_back(ConditionalValue::scalars(
            tree, s, ConditionalValue::ScalarData(rows.at(static_cast<std::size_t>(s)))));
    } else {
      const double weight = agent.value("weight", 1.0);
      if (!(weight > 0.0)) throw ConfigError("sharing agent weight must be positive");
      for (int s = 0; s <= tree->horizon(); ++s) {
        ConditionalValue::ScalarData vals(tree->stage_size(s));
        for (std::size_t i = 0; i < vals.size(); ++i)
          vals[i] = weight * std::exp(drift * cumulative_shock(*tree, tree->atoms(s)[i]));
        process.push_back(ConditionalValue::scalars(tree, s, std::move(vals)));
      }
    }
    problem.endowments.push_back(std::move(process));
  }
  problem.validate();
  return problem;
}

json preset_defaults(const std::string& name) {
  if (name == "risk-constrained-consumption") {
    return json{{"tree", {{"template", "binomial"}, {"horizon", 2}, {"p_up", 0.6}}},
                {"forward", {{"kind", "wealth_consumption"}}},
                {"backward", {{"kind", "additive_consumption"}}},
                {"controls",
                 {{"kind", "risk_constrained"},
                  {"consumption", true},
                  {"risk", {{"kind", "entropic"}, {"gamma", 1.0}}}}},
                {"initial_state", 1.0},
                {"grid", {{"state_points", 65}, {"control_resolution", 0.1}}}};
  }
  if (name == "wealth-entropic") {
    return json{{"tree", {{"template", "binomial"}, {"horizon", 2}, {"p_up", 0.6}}},
                {"forward", {{"kind", "self_financing"}}},
                {"backward", {{"kind", "entropic_wealth"}, {"gamma_min", 0.5}, {"gamma_max", 2.0}}},
                {"controls", {{"kind", "upper_level"}}},
                {"initial_state", 1.0},
                {"grid", {{"state_points", 65}, {"control_resolution", 0.05}}}};
  }
  if (name == "risk-sharing") {
    return json{{"tree", {{"template", "binomial"}, {"horizon", 2}, {"p_up", 0.6}}},
                {"sharing", {{"agents", {{{"weight", 1.0}}, {{"weight", 2.0}}}}, {"drift", 0.1}}},
                {"initial_state", 1.0}};
  }
  throw ConfigError("preset '" + name + "' is not recognized");
}

void merge_defaults(json& cfg, const json& defaults) {
  for (auto it = defaults.begin(); it != defaults.end(); ++it)
    if (!cfg.contains(it.key())) cfg[it.key()] = it.value();
}

std::vector<ControlSetSpec> build_controls(const json& cfg, const TreePtr& tree,
                                           const ForwardGenerator& forward,
                                           const std::vector<BackwardGenerator>& backward,
                                           std::optional<double>& k_bound, double x0) {
  const json& cc = cfg.at("controls");
  const std::string kind = cc.value("kind", "box");
  const int T = tree->horizon();
  std::vector<ControlSetSpec> out;

  if (kind == "box") {
    const auto lower = cc.at("lower").get<std::vector<double>>();
    const auto upper = cc.at("upper").get<std::vector<double>>();
    for (int t = 0; t < T; ++t) out.push_back(ControlSetSpec::box(tree, t, lower, upper));
    return out;
  }
  if (kind == "risk_constrained") {
    const auto rho = build_risk(cc.value("risk", json::object()));
    const bool consumption = cc.value("consumption", true);
    for (int t = 0; t < T; ++t)
      out.push_back(ControlSetSpec::risk_constrained(tree, t, rho, consumption));
    return out;
  }
  if (kind == "upper_level") {
    // The threshold needs the one-step advantage bound; the battery spans a
    // window around the initial state.
    std::vector<double> battery;
    for (int i = 0; i <= 12; ++i) battery.push_back(x0 - 3.0 + 0.5 * i);
    const KEstimate est = estimate_K(tree, forward, backward, battery);
    k_bound = est.overall;
    return induced_control_sets(tree, forward, backward, est.overall);
  }
  if (kind == "explicit") {
    const auto shared = cc.at("points").get<std::vector<std::vector<double>>>();
    for (int t = 0; t < T; ++t)
      out.push_back(ControlSetSpec::explicit_grid(
          tree, t, std::vector<std::vector<std::vector<double>>>(tree->stage_size(t), shared)));
    return out;
  }
  throw ConfigError("controls.kind '" + kind + "' is not recognized");
}

}  // namespace

std::string config_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return hex64(h);
}

BuildOutput build_from_text(const std::string& text, const CliOverrides& overrides) {
  json cfg;
  try {
    cfg = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  try {
    if (cfg.contains("preset")) merge_defaults(cfg, preset_defaults(cfg.at("preset")));

    BuildOutput out;
    out.config_hash = config_hash(text);
    out.seed = overrides.seed.value_or(cfg.value("seed", 42ULL));
    out.x0 = cfg.value("initial_state", 1.0);

    const json gc = cfg.value("grid", json::object());
    out.grid.state_points = overrides.grid_points.value_or(gc.value("state_points", 129));
    out.grid.control_resolution =
        overrides.control_resolution.value_or(gc.value("control_resolution", 0.1));
    out.grid.polish_tol = gc.value("polish_tol", 1e-7);
    out.grid.polish = gc.value("polish", true);
    out.grid.workers = overrides.workers.value_or(gc.value("workers", 0));
    if (gc.contains("state_bounds")) {
      const auto b = gc.at("state_bounds").get<std::vector<double>>();
      if (b.size() != 2) throw ConfigError("grid.state_bounds needs exactly [lo, hi]");
      out.grid.state_bounds = std::make_pair(b[0], b[1]);
    }
    if (out.grid.state_points < 2) throw ConfigError("grid.state_points must be at least 2");
    if (!(out.grid.control_resolution > 0.0))
      throw ConfigError("grid.control_resolution must be positive");

    const TreePtr tree = build_tree(cfg);

    if (cfg.contains("sharing")) out.sharing = build_sharing(cfg, tree);

    if (cfg.contains("forward") || cfg.contains("controls")) {
      Problem problem;
      problem.tree = tree;
      problem.forward = build_forward(cfg.value("forward", json::object()));
      const BackwardGenerator bwd = build_backward(cfg.value("backward", json::object()));
      problem.backward.assign(static_cast<std::size_t>(tree->horizon()), bwd);
      problem.terminal = TerminalGenerator::identity();
      problem.controls =
          build_controls(cfg, tree, problem.forward, problem.backward, out.k_bound, out.x0);
      problem.validate();
      out.problem = std::move(problem);
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
}

BuildOutput load_config(const std::string& path, const CliOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return build_from_text(buffer.str(), overrides);
}

}  // namespace treedp

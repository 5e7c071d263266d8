#include "mnca/io/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace mnca {

SimParams TissueBlock::sim_params() const {
  SimParams p;
  if (params == "default") {
    p = default_params();
  } else if (params == "minimal") {
    p = minimal_params();
  } else {
    throw ConfigError("tissue.params: unknown parameter set '" + params + "' (expected default or minimal)");
  }
  p.size = size;
  p.steps = steps;
  p.stem_min = stem_min;
  p.stem_max = stem_max;
  p.interaction = interaction;
  return p;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.milestones = milestones;
  t.gamma = gamma;
  t.grad_eps = grad_eps;
  t.seed = seed;
  t.gumbel_temperature = gumbel_temperature;
  t.window = tissue.window;
  t.tau = tissue.tau;
  t.samples = tissue.samples;
  t.batch_size = image.batch_size;
  t.pool_size = image.pool_size;
  t.n_min = image.n_min;
  t.n_max = image.n_max;
  t.seed_y = image.seed_y;
  t.seed_x = image.seed_x;
  return t;
}

void ExperimentConfig::validate() const {
  if (model.channels < 1) throw ConfigError("channels must be >= 1");
  if (model.hidden < 1) throw ConfigError("hidden_dim must be >= 1");
  if (model.rules < 1) throw ConfigError("rules must be >= 1");
  if (!is_mixture(model.variant) && model.rules != 1) {
    throw ConfigError("rules must be 1 for variant " + std::string(to_string(model.variant)));
  }
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  for (const auto& f : filters) {
    if (f != "grad_x" && f != "grad_y") throw ConfigError("filters: unsupported filter '" + f + "'");
  }
  if (filters.size() != 2 || filters[0] == filters[1]) throw ConfigError("filters must be [grad_x, grad_y]");
  train_config().validate();
  if (task == Task::Tissue && model.channels < kCellLabels) throw ConfigError("tissue task needs channels >= 6");
  if (task == Task::Image && model.channels < 4) throw ConfigError("image task needs channels >= 4");
  tissue.sim_params().validate();
  if (tissue.realizations < 1 || tissue.eval_repeats < 1) throw ConfigError("tissue.realizations and tissue.eval_repeats must be >= 1");
  if (tissue.window > tissue.steps) throw ConfigError("tissue.window must not exceed tissue.steps");
  if (image.target_size < 0 || image.pad < 0) throw ConfigError("image.target_size and image.pad must be >= 0");
  if (image.grow_steps < 0) throw ConfigError("image.grow_steps must be >= 0");
  if (abc.particles < 1) throw ConfigError("abc.particles must be >= 1");
  if (abc.quantile < 0.0 || abc.quantile > 1.0) throw ConfigError("abc.quantile must lie in [0, 1]");
  if (abc.quantile == 0.0 && !(abc.epsilon > 0.0)) throw ConfigError("abc.epsilon must be positive when quantile is 0");
  if (abc.realizations_per_particle < 1 || abc.observed_realizations < 1 || abc.posterior_realizations < 1) {
    throw ConfigError("abc realization counts must be >= 1");
  }
  abc.prior.validate();
  if (perturb.repeats < 1 || perturb.steps < 0) throw ConfigError("perturb.repeats must be >= 1, steps >= 0");
  if (sweep.rule_counts.empty() || sweep.repeats < 1) throw ConfigError("sweep needs rule_counts and repeats >= 1");
  for (int k : sweep.rule_counts) {
    if (k < 1) throw ConfigError("sweep.rule_counts entries must be >= 1");
  }
  if (analyze.noise_draws < 1 || analyze.permutations < 1) throw ConfigError("analyze counts must be >= 1");
  if (!steer.multipliers.empty()) {
    try {
      check_steering(steer.multipliers, model.rules);
    } catch (const UsageError& e) {
      throw ConfigError(std::string("steer.multipliers: ") + e.what());
    }
  }
  if (steer.steps < 0) throw ConfigError("steer.steps must be >= 0");
}

namespace {

std::string where(const YAML::Node& node, const std::string& source) {
  const auto mark = node.Mark();
  if (mark.line < 0) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

class Reader {
 public:
  Reader(const YAML::Node& node, std::string prefix, const std::string& source)
      : node_(node), present_(node && !node.IsNull()), prefix_(std::move(prefix)), source_(source) {
    if (present_ && !node_.IsMap()) throw ConfigError(where(node_, source_) + ": '" + prefix_ + "' must be a mapping");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!present_) return;
    const YAML::Node v = std::as_const(node_)[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v, source_) + ": field '" + name(key) + "' has an invalid value");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return present_ ? std::as_const(node_)[key] : YAML::Node(YAML::NodeType::Undefined);
  }

  void finish() const {
    if (!present_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(where(kv.first, source_) + ": unknown key '" + name(key) + "'");
    }
  }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  const std::string& source() const { return source_; }

 private:
  YAML::Node node_;
  bool present_;
  std::string prefix_;
  const std::string& source_;
  std::set<std::string> seen_;
};

template <typename T, typename F>
void get_enum(Reader& r, const std::string& key, T& out, F parse) {
  std::string text;
  r.get(key, text);
  if (text.empty()) return;
  try {
    out = parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError(r.name(key) + ": " + e.what());
  }
}

InteractionMode parse_interaction(const std::string& s) {
  if (s == "neighbor_rows") return InteractionMode::NeighborRows;
  if (s == "per_type") return InteractionMode::PerType;
  throw ConfigError("unknown interaction mode '" + s + "' (expected neighbor_rows or per_type)");
}

Discretize parse_discretize(const std::string& s) {
  if (s == "argmax") return Discretize::Argmax;
  if (s == "none") return Discretize::None;
  throw ConfigError("unknown discretization '" + s + "' (expected argmax or none)");
}

Task parse_task(const std::string& s) {
  if (s == "tissue") return Task::Tissue;
  if (s == "image") return Task::Image;
  throw ConfigError("unknown task '" + s + "' (expected tissue or image)");
}

GammaReading parse_reading(const std::string& s) {
  if (s == "scale") return GammaReading::Scale;
  if (s == "rate") return GammaReading::Rate;
  throw ConfigError("unknown gamma reading '" + s + "' (expected scale or rate)");
}

void read_gamma(Reader& r, const std::string& key, GammaPrior& g) {
  const YAML::Node n = r.child(key);
  Reader gr(n, r.name(key), r.source());
  gr.get("shape", g.shape);
  gr.get("scale", g.param);
  gr.finish();
}

ExperimentConfig from_yaml(const YAML::Node& root, const std::string& source) {
  ExperimentConfig cfg;
  if (!root || root.IsNull()) throw ConfigError(source + ": empty config");
  Reader top(root, "", source);

  get_enum(top, "variant", cfg.model.variant, [](const std::string& s) { return parse_variant(s); });
  top.get("channels", cfg.model.channels);
  top.get("hidden_dim", cfg.model.hidden);
  top.get("rules", cfg.model.rules);
  top.get("residual", cfg.model.residual);
  top.get("dropout", cfg.model.dropout);
  top.get("learning_rate", cfg.learning_rate);
  top.get("epochs", cfg.epochs);
  top.get("milestones", cfg.milestones);
  top.get("gamma", cfg.gamma);
  top.get("filters", cfg.filters);
  if (std::as_const(root)["seed"]) {
    top.get("seed", cfg.seed);
    cfg.seed_given = true;
  } else {
    top.get("seed", cfg.seed);
  }
  top.get("grad_eps", cfg.grad_eps);
  top.get("gumbel_temperature", cfg.gumbel_temperature);
  get_enum(top, "task", cfg.task, parse_task);

  {
    Reader r(top.child("tissue"), "tissue", source);
    r.get("params", cfg.tissue.params);
    r.get("size", cfg.tissue.size);
    r.get("steps", cfg.tissue.steps);
    r.get("realizations", cfg.tissue.realizations);
    r.get("stem_min", cfg.tissue.stem_min);
    r.get("stem_max", cfg.tissue.stem_max);
    get_enum(r, "interaction", cfg.tissue.interaction, parse_interaction);
    r.get("window", cfg.tissue.window);
    r.get("tau", cfg.tissue.tau);
    r.get("samples", cfg.tissue.samples);
    get_enum(r, "discretize", cfg.tissue.discretize, parse_discretize);
    r.get("cohort", cfg.tissue.cohort);
    r.get("eval_repeats", cfg.tissue.eval_repeats);
    r.finish();
  }
  {
    Reader r(top.child("image"), "image", source);
    r.get("target", cfg.image.target);
    r.get("target_size", cfg.image.target_size);
    r.get("pad", cfg.image.pad);
    r.get("pad_value", cfg.image.pad_value);
    r.get("pool_size", cfg.image.pool_size);
    r.get("batch_size", cfg.image.batch_size);
    r.get("n_min", cfg.image.n_min);
    r.get("n_max", cfg.image.n_max);
    r.get("seed_y", cfg.image.seed_y);
    r.get("seed_x", cfg.image.seed_x);
    r.get("grow_steps", cfg.image.grow_steps);
    r.finish();
  }
  {
    Reader r(top.child("abc"), "abc", source);
    r.get("particles", cfg.abc.particles);
    get_enum(r, "statistic", cfg.abc.statistic, [](const std::string& s) { return parse_summary_kind(s); });
    r.get("epsilon", cfg.abc.epsilon);
    r.get("quantile", cfg.abc.quantile);
    r.get("realizations_per_particle", cfg.abc.realizations_per_particle);
    r.get("observed_realizations", cfg.abc.observed_realizations);
    r.get("posterior_realizations", cfg.abc.posterior_realizations);
    {
      Reader pr(r.child("prior"), "abc.prior", source);
      read_gamma(pr, "b", cfg.abc.prior.b);
      read_gamma(pr, "d", cfg.abc.prior.d);
      read_gamma(pr, "s", cfg.abc.prior.s);
      read_gamma(pr, "D", cfg.abc.prior.D);
      pr.get("I_mean", cfg.abc.prior.I_mean);
      pr.get("I_sd", cfg.abc.prior.I_sd);
      get_enum(pr, "gamma_reading", cfg.abc.prior.reading, parse_reading);
      pr.finish();
    }
    r.finish();
  }
  {
    Reader r(top.child("perturb"), "perturb", source);
    const YAML::Node list = r.child("perturbations");
    if (list) {
      if (!list.IsSequence()) throw ConfigError(where(list, source) + ": perturb.perturbations must be a list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        Perturbation p;
        Reader pr(list[i], "perturb.perturbations[" + std::to_string(i) + "]", source);
        get_enum(pr, "kind", p.kind, [](const std::string& s) { return parse_perturb_kind(s); });
        pr.get("side", p.side);
        pr.get("rho", p.rho);
        pr.get("count", p.count);
        pr.get("sigma", p.sigma);
        pr.get("visible_only", p.visible_only);
        pr.finish();
        cfg.perturb.perturbations.push_back(p);
      }
    }
    r.get("repeats", cfg.perturb.repeats);
    r.get("steps", cfg.perturb.steps);
    r.finish();
  }
  {
    Reader r(top.child("sweep"), "sweep", source);
    r.get("rule_counts", cfg.sweep.rule_counts);
    r.get("repeats", cfg.sweep.repeats);
    r.finish();
  }
  {
    Reader r(top.child("analyze"), "analyze", source);
    r.get("noise_draws", cfg.analyze.noise_draws);
    r.get("permutations", cfg.analyze.permutations);
    r.get("pixels", cfg.analyze.pixels);
    r.get("state_steps", cfg.analyze.state_steps);
    r.finish();
  }
  {
    Reader r(top.child("steer"), "steer", source);
    r.get("multipliers", cfg.steer.multipliers);
    r.get("steps", cfg.steer.steps);
    r.finish();
  }
  top.finish();
  if (!is_mixture(cfg.model.variant) && !std::as_const(root)["rules"]) cfg.model.rules = 1;
  if (cfg.perturb.perturbations.empty()) {
    Perturbation chunk;
    chunk.kind = PerturbKind::Chunk;
    chunk.side = 5;
    Perturbation sparse;
    sparse.kind = PerturbKind::Sparse;
    sparse.count = 100;
    cfg.perturb.perturbations = {chunk, sparse};
  }
  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": malformed config: " + e.msg);
  }
  return from_yaml(root, source);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json j;
  j["variant"] = std::string(to_string(c.model.variant));
  j["channels"] = c.model.channels;
  j["hidden_dim"] = c.model.hidden;
  j["rules"] = c.model.rules;
  j["residual"] = c.model.residual;
  j["dropout"] = c.model.dropout;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["milestones"] = c.milestones;
  j["gamma"] = c.gamma;
  j["filters"] = c.filters;
  j["seed"] = c.seed;
  j["grad_eps"] = c.grad_eps;
  j["gumbel_temperature"] = c.gumbel_temperature;
  j["task"] = c.task == Task::Tissue ? "tissue" : "image";
  j["tissue"] = {{"params", c.tissue.params},
                 {"size", c.tissue.size},
                 {"steps", c.tissue.steps},
                 {"realizations", c.tissue.realizations},
                 {"stem_min", c.tissue.stem_min},
                 {"stem_max", c.tissue.stem_max},
                 {"interaction", c.tissue.interaction == InteractionMode::NeighborRows ? "neighbor_rows" : "per_type"},
                 {"window", c.tissue.window},
                 {"tau", c.tissue.tau},
                 {"samples", c.tissue.samples},
                 {"discretize", c.tissue.discretize == Discretize::Argmax ? "argmax" : "none"},
                 {"cohort", c.tissue.cohort},
                 {"eval_repeats", c.tissue.eval_repeats}};
  j["image"] = {{"target", c.image.target},       {"target_size", c.image.target_size},
                {"pad", c.image.pad},             {"pad_value", c.image.pad_value},
                {"pool_size", c.image.pool_size}, {"batch_size", c.image.batch_size},
                {"n_min", c.image.n_min},         {"n_max", c.image.n_max},
                {"seed_y", c.image.seed_y},       {"seed_x", c.image.seed_x},
                {"grow_steps", c.image.grow_steps}};
  auto gamma = [](const GammaPrior& g) { return json{{"shape", g.shape}, {"scale", g.param}}; };
  j["abc"] = {{"particles", c.abc.particles},
              {"statistic", std::string(to_string(c.abc.statistic))},
              {"epsilon", c.abc.epsilon},
              {"quantile", c.abc.quantile},
              {"realizations_per_particle", c.abc.realizations_per_particle},
              {"observed_realizations", c.abc.observed_realizations},
              {"posterior_realizations", c.abc.posterior_realizations},
              {"prior",
               {{"b", gamma(c.abc.prior.b)},
                {"d", gamma(c.abc.prior.d)},
                {"s", gamma(c.abc.prior.s)},
                {"D", gamma(c.abc.prior.D)},
                {"I_mean", c.abc.prior.I_mean},
                {"I_sd", c.abc.prior.I_sd},
                {"gamma_reading", c.abc.prior.reading == GammaReading::Scale ? "scale" : "rate"}}}};
  json perts = json::array();
  for (const auto& p : c.perturb.perturbations) {
    perts.push_back({{"kind", std::string(to_string(p.kind))},
                     {"side", p.side},
                     {"rho", p.rho},
                     {"count", p.count},
                     {"sigma", p.sigma},
                     {"visible_only", p.visible_only}});
  }
  j["perturb"] = {{"perturbations", perts}, {"repeats", c.perturb.repeats}, {"steps", c.perturb.steps}};
  j["sweep"] = {{"rule_counts", c.sweep.rule_counts}, {"repeats", c.sweep.repeats}};
  j["analyze"] = {{"noise_draws", c.analyze.noise_draws},
                  {"permutations", c.analyze.permutations},
                  {"pixels", c.analyze.pixels},
                  {"state_steps", c.analyze.state_steps}};
  j["steer"] = {{"multipliers", c.steer.multipliers}, {"steps", c.steer.steps}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mnca

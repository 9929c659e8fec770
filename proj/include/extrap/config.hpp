#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "extrap/episode_codec.hpp"
#include "extrap/errors.hpp"
#include "extrap/rollout.hpp"
#include "extrap/strategies.hpp"
#include "extrap/train.hpp"
#include "json.hpp"

namespace extrap {

// Resolved run configuration. Every run resolves a preset plus user
// overrides into one JSON document, writes it next to its outputs, and
// stamps artifacts with its hash.
struct RunConfig {
  nlohmann::json doc;  // fully resolved; the canonical form

  static nlohmann::json preset(const std::string& name);
  static RunConfig resolve(const std::string& preset_name,
                           const std::string& config_path = "",
                           std::optional<std::uint64_t> seed_override = {},
                           const std::string& out_override = "");

  std::string hash() const { return fnv1a_hex(doc.dump()); }
  std::string out_dir() const { return doc.at("out").get<std::string>(); }
  std::vector<std::uint64_t> seeds() const {
    return doc.at("seeds").get<std::vector<std::uint64_t>>();
  }
  std::uint64_t primary_seed() const { return seeds().at(0); }

  // typed accessors over the blocks
  const nlohmann::json& task() const { return doc.at("task"); }
  const nlohmann::json& sampler() const { return doc.at("sampler"); }
  const nlohmann::json& model() const { return doc.at("model"); }
  const nlohmann::json& decode_block() const { return doc.at("decode"); }
  const nlohmann::json& eval_block() const { return doc.at("eval"); }

  StrategyConfig strategy() const {
    const auto& s = doc.at("strategy");
    StrategyConfig cfg;
    cfg.kind = StrategyConfig::kind_from(s.at("kind").get<std::string>());
    cfg.n = s.at("n");
    cfg.k = s.at("k");
    cfg.theta = s.at("theta");
    cfg.cap = s.at("cap");
    return cfg;
  }

  MlpTrainConfig mlp_train() const {
    const auto& m = doc.at("model");
    MlpTrainConfig cfg;
    cfg.epochs = m.at("epochs");
    cfg.lr = m.at("lr");
    cfg.batch = m.at("batch");
    cfg.init_scale = m.at("init_scale");
    return cfg;
  }

  ArTrainConfig ar_train() const {
    const auto& m = doc.at("model");
    ArTrainConfig cfg;
    cfg.epochs = m.at("epochs");
    cfg.lr = m.at("lr");
    cfg.batch = m.at("batch");
    cfg.d_model = m.at("d_model");
    cfg.n_heads = m.at("n_heads");
    cfg.n_layers = m.at("n_layers");
    cfg.d_ffn = m.at("d_ffn");
    cfg.context = m.at("context");
    cfg.init_scale = m.at("init_scale");
    return cfg;
  }

  RewardMode reward_mode() const {
    return reward_mode_from(doc.at("model").at("reward_mode").get<std::string>());
  }

  DecodeConfig decode() const {
    DecodeConfig d;
    d.temperature = doc.at("decode").at("temperature");
    d.top_k = doc.at("decode").at("top_k");
    return d;
  }
  int max_states() const { return doc.at("decode").at("max_states"); }

  void write_resolved(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArtifactError("cannot write resolved config: " + path);
    out << doc.dump(2) << "\n";
  }
};

namespace detail {

// every key in `user` must exist in `schema` (recursively for objects)
inline void check_unknown_keys(const nlohmann::json& user,
                               const nlohmann::json& schema,
                               const std::string& prefix,
                               std::vector<std::string>& errors) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.is_object() || !schema.contains(it.key())) {
      errors.push_back("unknown config key: " + path);
      continue;
    }
    if (it.value().is_object()) {
      check_unknown_keys(it.value(), schema.at(it.key()), path, errors);
    }
  }
}

inline void merge_into(nlohmann::json& base, const nlohmann::json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) &&
        base.at(it.key()).is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

inline void require(bool ok, const std::string& msg,
                    std::vector<std::string>& errors) {
  if (!ok) errors.push_back(msg);
}

}  // namespace detail

inline nlohmann::json RunConfig::preset(const std::string& name) {
  if (name == "toy") {
    return {
        {"preset", "toy"},
        {"task",
         {{"family", "toy"}, {"length", 16}, {"vocab", 2}, {"seed", 7},
          {"range", {1.0, 250.0}}, {"x0_band", {1.0, 1.0}},
          {"pool_size", 0}, {"guide_weight", 1.0},
          {"guide_fit", {{"epochs", 0}, {"lr", 1e-2}, {"batch", 64}}}}},
        {"sampler",
         {{"steps", 10000}, {"epochs", 0}, {"chains", 1},
          {"kernel", "block-flip"}, {"mask", "full"}, {"mask_rate", 0.0},
          {"span", 0}, {"temperature", 1.0}, {"record_every", 1}}},
        {"strategy",
         {{"kind", "first-best"}, {"n", 1}, {"k", 3}, {"theta", 0.2}, {"cap", 10}}},
        {"model",
         {{"kind", "mlp"}, {"epochs", 20}, {"lr", 1e-2}, {"batch", 4},
          {"init_scale", 1.0}, {"bins", 32}, {"reward_mode", "none"},
          {"d_model", 64}, {"n_heads", 4}, {"n_layers", 2}, {"d_ffn", 128},
          {"context", 256}}},
        {"decode",
         {{"temperature", 1.0}, {"top_k", 0}, {"max_states", 5}}},
        {"eval",
         {{"inputs", 64}, {"thresholds", {54.6, 100.0, 244.7}},
          {"mcmc_epochs", 10}}},
        {"seeds", {11, 12, 13, 14, 15}},
        {"out", "runs/toy"},
    };
  }
  if (name == "motif") {
    return {
        {"preset", "motif"},
        {"task",
         {{"family", "motif"}, {"length", 24}, {"vocab", 4}, {"seed", 7},
          {"range", {0.0, 6.0}}, {"x0_band", {0.5, 2.5}},
          {"pool_size", 3000}, {"guide_weight", 10.0},
          {"guide_fit", {{"epochs", 40}, {"lr", 1e-2}, {"batch", 64}}}}},
        {"sampler",
         {{"steps", 0}, {"epochs", 10}, {"chains", 220},
          {"kernel", "mask-infill"}, {"mask", "bernoulli"}, {"mask_rate", 0.10},
          {"span", 4}, {"temperature", 1.0}, {"record_every", 1}}},
        {"strategy",
         {{"kind", "denergy-fixed"}, {"n", 4}, {"k", 3}, {"theta", 0.2}, {"cap", 10}}},
        {"model",
         {{"kind", "ar"}, {"epochs", 20}, {"lr", 1e-3}, {"batch", 16},
          {"init_scale", 1.0}, {"bins", 32}, {"reward_mode", "predicted"},
          {"d_model", 64}, {"n_heads", 4}, {"n_layers", 2}, {"d_ffn", 128},
          {"context", 256}}},
        {"decode",
         {{"temperature", 1.0}, {"top_k", 8}, {"max_states", 6}}},
        {"eval",
         {{"inputs", 150}, {"thresholds", {4.0, 6.0, 8.0, 10.0}},
          {"mcmc_epochs", 10}}},
        {"seeds", {21, 22, 23, 24, 25}},
        {"out", "runs/motif"},
    };
  }
  throw ConfigError("unknown preset: " + name + " (available: toy, motif)");
}

inline RunConfig RunConfig::resolve(const std::string& preset_name,
                                    const std::string& config_path,
                                    std::optional<std::uint64_t> seed_override,
                                    const std::string& out_override) {
  std::vector<std::string> errors;
  nlohmann::json user;
  std::string base = preset_name;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config file: " + config_path);
    try {
      in >> user;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (base.empty()) base = user.value("preset", "");
  }
  if (base.empty()) base = "motif";
  nlohmann::json doc = preset(base);
  if (!user.is_null()) {
    detail::check_unknown_keys(user, doc, "", errors);
    detail::merge_into(doc, user);
  }
  if (seed_override) doc["seeds"] = {*seed_override};
  if (!out_override.empty()) doc["out"] = out_override;

  // validate; every violation is reported at once
  using detail::require;
  try {
    require(doc.at("sampler").at("steps").get<long>() >= 0, "sampler.steps must be >= 0", errors);
    require(doc.at("sampler").at("epochs").get<long>() >= 0, "sampler.epochs must be >= 0", errors);
    require(doc.at("sampler").at("steps").get<long>() > 0 ||
                doc.at("sampler").at("epochs").get<long>() > 0,
            "one of sampler.steps / sampler.epochs must be positive", errors);
    require(doc.at("sampler").at("chains").get<long>() >= 1, "sampler.chains must be >= 1", errors);
    require(doc.at("sampler").at("temperature").get<double>() > 0, "sampler.temperature must be > 0", errors);
    require(doc.at("sampler").at("record_every").get<long>() >= 1, "sampler.record_every must be >= 1", errors);
    require(doc.at("strategy").at("n").get<long>() >= 1, "strategy.n must be >= 1", errors);
    require(doc.at("strategy").at("k").get<long>() >= 1, "strategy.k must be >= 1", errors);
    require(doc.at("strategy").at("theta").get<double>() > 0, "strategy.theta must be > 0", errors);
    require(doc.at("strategy").at("cap").get<long>() >= 1, "strategy.cap must be >= 1", errors);
    require(doc.at("model").at("epochs").get<long>() >= 1, "model.epochs must be >= 1", errors);
    require(doc.at("model").at("lr").get<double>() > 0, "model.lr must be > 0", errors);
    require(doc.at("model").at("batch").get<long>() >= 1, "model.batch must be >= 1", errors);
    require(doc.at("model").at("bins").get<long>() >= 2, "model.bins must be >= 2", errors);
    require(doc.at("decode").at("temperature").get<double>() > 0, "decode.temperature must be > 0", errors);
    require(doc.at("decode").at("top_k").get<long>() >= 0, "decode.top_k must be >= 0", errors);
    require(doc.at("decode").at("max_states").get<long>() >= 1, "decode.max_states must be >= 1", errors);
    require(doc.at("eval").at("inputs").get<long>() >= 1, "eval.inputs must be >= 1", errors);
    require(!doc.at("seeds").empty(), "seeds must be non-empty", errors);
    const std::string kind = doc.at("model").at("kind");
    require(kind == "mlp" || kind == "ar", "model.kind must be mlp or ar", errors);
    const std::string family = doc.at("task").at("family");
    require(family == "toy" || family == "motif", "task.family must be toy or motif", errors);
    StrategyConfig::kind_from(doc.at("strategy").at("kind").get<std::string>());
    reward_mode_from(doc.at("model").at("reward_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    errors.push_back(std::string("config structure: ") + e.what());
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  RunConfig rc;
  rc.doc = std::move(doc);
  return rc;
}

}  // namespace extrap

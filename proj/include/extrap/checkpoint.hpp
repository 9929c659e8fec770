#pragma once

#include <fstream>
#include <optional>
#include <string>

#include "extrap/ar_model.hpp"
#include "extrap/episode_codec.hpp"
#include "extrap/errors.hpp"
#include "extrap/mlp.hpp"
#include "extrap/score_binner.hpp"
#include "extrap/vocab.hpp"
#include "json.hpp"

namespace extrap {

// Trained extrapolator plus everything needed to run it: vocabulary,
// score-bin edges, reward mode, provenance. JSON doubles round-trip
// exactly, so a saved checkpoint reproduces bit-identical forward passes.
struct ExtrapolatorCheckpoint {
  std::string kind;  // "mlp" | "mlp-regressor" | "ar"
  std::optional<MlpModel> mlp;
  std::optional<ArModel> ar;
  Vocabulary vocab;          // ar only
  ScoreBinner binner;        // ar only
  RewardMode mode = RewardMode::kNone;
  int max_episode_tokens = 0;  // longest training episode; runaway basis
  std::string config_hash;
  nlohmann::json train_stats;

  static constexpr int kVersion = 1;

  void save(const std::string& path) const;
  static ExtrapolatorCheckpoint load(const std::string& path);
};

namespace detail {

inline nlohmann::json params_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd params_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

}  // namespace detail

inline void ExtrapolatorCheckpoint::save(const std::string& path) const {
  nlohmann::json j;
  j["v"] = kVersion;
  j["kind"] = kind;
  j["mode"] = to_string(mode);
  j["config_hash"] = config_hash;
  j["max_episode_tokens"] = max_episode_tokens;
  j["train_stats"] = train_stats;
  if (mlp) {
    const auto& c = mlp->config();
    j["mlp"] = {{"vocab", c.vocab},     {"embed_dim", c.embed_dim},
                {"hidden", c.hidden},   {"seq_len", c.seq_len},
                {"out_dim", c.out_dim}, {"init_scale", c.init_scale}};
    j["params"] = detail::params_to_json(mlp->params());
  }
  if (ar) {
    const auto& c = ar->config();
    j["ar"] = {{"vocab", c.vocab},       {"d_model", c.d_model},
               {"n_heads", c.n_heads},   {"n_layers", c.n_layers},
               {"d_ffn", c.d_ffn},       {"context", c.context},
               {"init_scale", c.init_scale}};
    j["params"] = detail::params_to_json(ar->params());
    j["vocab"] = {{"content", vocab.content_labels()},
                  {"max_states", vocab.max_states()},
                  {"bins", vocab.num_bins()}};
    j["binner"] = {{"lo", binner.lo()}, {"hi", binner.hi()}, {"bins", binner.bins()}};
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

inline ExtrapolatorCheckpoint ExtrapolatorCheckpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError("checkpoint parse failed: " + std::string(e.what()));
  }
  if (j.value("v", 0) != kVersion) {
    throw StructuralError("checkpoint: unsupported format version");
  }
  ExtrapolatorCheckpoint ck;
  ck.kind = j.at("kind").get<std::string>();
  ck.mode = reward_mode_from(j.at("mode").get<std::string>());
  ck.config_hash = j.value("config_hash", "");
  ck.max_episode_tokens = j.value("max_episode_tokens", 0);
  ck.train_stats = j.value("train_stats", nlohmann::json::object());
  if (j.contains("mlp")) {
    const auto& m = j["mlp"];
    MlpConfig c;
    c.vocab = m.at("vocab");
    c.embed_dim = m.at("embed_dim");
    c.hidden = m.at("hidden");
    c.seq_len = m.at("seq_len");
    c.out_dim = m.at("out_dim");
    c.init_scale = m.at("init_scale");
    ck.mlp.emplace(c, detail::params_from_json(j.at("params")));
  }
  if (j.contains("ar")) {
    const auto& m = j["ar"];
    ArConfig c;
    c.vocab = m.at("vocab");
    c.d_model = m.at("d_model");
    c.n_heads = m.at("n_heads");
    c.n_layers = m.at("n_layers");
    c.d_ffn = m.at("d_ffn");
    c.context = m.at("context");
    c.init_scale = m.at("init_scale");
    ck.ar.emplace(c, detail::params_from_json(j.at("params")));
    const auto& v = j.at("vocab");
    ck.vocab = Vocabulary::build(v.at("content").get<std::vector<std::string>>(),
                                 v.at("max_states"), v.at("bins"));
    const auto& b = j.at("binner");
    ck.binner = ScoreBinner(b.at("lo"), b.at("hi"), b.at("bins"));
  }
  return ck;
}

}  // namespace extrap

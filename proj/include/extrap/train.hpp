#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "extrap/adam.hpp"
#include "extrap/ar_model.hpp"
#include "extrap/checkpoint.hpp"
#include "extrap/episode_codec.hpp"
#include "extrap/mlp.hpp"
#include "extrap/rng.hpp"

namespace extrap {

// ---- fixed-length transition model (toy path) ----------------------------

struct MlpTrainConfig {
  int epochs = 20;
  double lr = 1e-2;
  int batch = 4;
  int embed_dim = 16;
  int hidden = 128;
  double init_scale = 1.0;
};

// Fit the per-position transition predictor on (x_prev -> x_next) pairs
// over a binary vocabulary with multi-label sigmoid cross-entropy.
inline ExtrapolatorCheckpoint train_mlp(
    const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs,
    const MlpTrainConfig& cfg, RngStream& rng) {
  if (pairs.empty()) throw TrainingError("train_mlp: empty training set");
  const int L = static_cast<int>(pairs[0].first.size());
  Eigen::MatrixXi X(pairs.size(), L);
  Eigen::MatrixXd Y(pairs.size(), L);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [a, b] = pairs[i];
    if (static_cast<int>(a.size()) != L || static_cast<int>(b.size()) != L) {
      throw ContractError("train_mlp: pairs have mixed lengths");
    }
    for (int j = 0; j < L; ++j) {
      if ((a[j] | b[j]) & ~1) throw ContractError("train_mlp: non-binary token");
      X(i, j) = a[j];
      Y(i, j) = b[j];
    }
  }

  MlpConfig mc;
  mc.vocab = 2;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden = cfg.hidden;
  mc.seq_len = L;
  mc.out_dim = L;
  mc.init_scale = cfg.init_scale;
  MlpModel model(mc, rng);
  Adam opt(model.params().size(), {cfg.lr});

  const Eigen::Index N = X.rows();
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(model.params().size());
  double first_epoch = 0.0, last_epoch = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    long batches = 0;
    for (Eigen::Index at = 0; at < N; at += cfg.batch) {
      Eigen::Index bs = std::min<Eigen::Index>(cfg.batch, N - at);
      Eigen::MatrixXi Xb(bs, L);
      Eigen::MatrixXd Yb(bs, L);
      for (Eigen::Index r = 0; r < bs; ++r) {
        Xb.row(r) = X.row(order[at + r]);
        Yb.row(r) = Y.row(order[at + r]);
      }
      double loss = model.multilabel_loss(Xb, Yb, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("train_mlp: loss diverged at step " +
                            std::to_string(opt.steps()));
      }
      opt.step(model.params(), grad);
      total += loss;
      ++batches;
    }
    double mean = total / batches;
    if (epoch == 0) first_epoch = mean;
    last_epoch = mean;
  }

  ExtrapolatorCheckpoint ck;
  ck.kind = "mlp";
  ck.mlp = std::move(model);
  ck.train_stats = {{"pairs", pairs.size()},
                    {"epochs", cfg.epochs},
                    {"lr", cfg.lr},
                    {"batch", cfg.batch},
                    {"init_scale", cfg.init_scale},
                    {"first_epoch_loss", first_epoch},
                    {"final_epoch_loss", last_epoch}};
  return ck;
}

// Deterministic one-step revision: per-position probability >= 0.5 -> 1,
// all positions decoded in parallel.
inline TokenSeq mlp_step(const ExtrapolatorCheckpoint& ck, const TokenSeq& x) {
  if (!ck.mlp || ck.kind != "mlp") throw ContractError("mlp_step: not an mlp checkpoint");
  Eigen::MatrixXd z = ck.mlp->forward(ck.mlp->to_row(x));
  TokenSeq out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = z(0, i) >= 0.0 ? 1 : 0;
  return out;
}

// ---- scalar regressor (guide fitting) ------------------------------------

struct RegressorTrainConfig {
  int epochs = 40;
  double lr = 1e-2;
  int batch = 64;
  int embed_dim = 16;
  int hidden = 128;
  double init_scale = 1.0;
};

struct RegressorFit {
  MlpModel model;
  double first_epoch_loss = 0.0;
  double final_epoch_loss = 0.0;
};

inline RegressorFit fit_mlp_regressor(const std::vector<TokenSeq>& inputs,
                                      const std::vector<double>& targets,
                                      int vocab, const RegressorTrainConfig& cfg,
                                      RngStream& rng) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw ContractError("fit_mlp_regressor: bad training data");
  }
  const int L = static_cast<int>(inputs[0].size());
  Eigen::MatrixXi X(inputs.size(), L);
  Eigen::VectorXd y(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (int j = 0; j < L; ++j) X(i, j) = inputs[i][j];
    y[i] = targets[i];
  }
  MlpConfig mc;
  mc.vocab = vocab;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden = cfg.hidden;
  mc.seq_len = L;
  mc.out_dim = 1;
  mc.init_scale = cfg.init_scale;
  MlpModel model(mc, rng);
  Adam opt(model.params().size(), {cfg.lr});

  const Eigen::Index N = X.rows();
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(model.params().size());
  RegressorFit fit{std::move(model)};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    long batches = 0;
    for (Eigen::Index at = 0; at < N; at += cfg.batch) {
      Eigen::Index bs = std::min<Eigen::Index>(cfg.batch, N - at);
      Eigen::MatrixXi Xb(bs, L);
      Eigen::VectorXd yb(bs);
      for (Eigen::Index r = 0; r < bs; ++r) {
        Xb.row(r) = X.row(order[at + r]);
        yb[r] = y[order[at + r]];
      }
      double loss = fit.model.mse_loss(Xb, yb, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("fit_mlp_regressor: loss diverged at step " +
                            std::to_string(opt.steps()));
      }
      opt.step(fit.model.params(), grad);
      total += loss;
      ++batches;
    }
    double mean = total / batches;
    if (epoch == 0) fit.first_epoch_loss = mean;
    fit.final_epoch_loss = mean;
  }
  return fit;
}

// ---- autoregressive episode model -----------------------------------------

struct ArTrainConfig {
  int epochs = 20;
  double lr = 1e-3;
  int batch = 16;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ffn = 128;
  int context = 256;
  double init_scale = 1.0;
};

// Teacher-forced next-token training. The loss covers revised-state
// tokens, separators and <stop>; x0 tokens are context only, and score
// bins join the loss only in predicted-reward mode.
inline std::vector<char> loss_mask_for(const std::vector<int>& tokens,
                                       const Vocabulary& vocab, RewardMode mode) {
  auto roles = token_roles(tokens, vocab);
  std::vector<char> mask(tokens.size(), 0);
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    switch (roles[p]) {
      case TokenRole::kX0: mask[p] = 0; break;
      case TokenRole::kContent:
      case TokenRole::kSeparator:
      case TokenRole::kStop: mask[p] = 1; break;
      case TokenRole::kScore: mask[p] = mode == RewardMode::kPredicted; break;
    }
  }
  return mask;
}

inline ExtrapolatorCheckpoint train_ar(const std::vector<std::vector<int>>& episodes,
                                       const Vocabulary& vocab,
                                       const ScoreBinner& binner, RewardMode mode,
                                       const ArTrainConfig& cfg, RngStream& rng) {
  if (episodes.empty()) throw TrainingError("train_ar: empty training set");
  int max_tokens = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (static_cast<int>(episodes[i].size()) > cfg.context) {
      throw TrainingError("train_ar: episode " + std::to_string(i) +
                          " exceeds the context window");
    }
    max_tokens = std::max(max_tokens, static_cast<int>(episodes[i].size()));
  }

  ArConfig ac;
  ac.vocab = vocab.size();
  ac.d_model = cfg.d_model;
  ac.n_heads = cfg.n_heads;
  ac.n_layers = cfg.n_layers;
  ac.d_ffn = cfg.d_ffn;
  ac.context = cfg.context;
  ac.init_scale = cfg.init_scale;
  ArModel model(ac, rng);
  Adam opt(model.params().size(), {cfg.lr});

  std::vector<std::vector<char>> masks;
  masks.reserve(episodes.size());
  for (const auto& ep : episodes) masks.push_back(loss_mask_for(ep, vocab, mode));

  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(model.params().size());
  double first_epoch = 0.0, last_epoch = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    long seen = 0;
    std::size_t at = 0;
    while (at < order.size()) {
      std::size_t bs = std::min<std::size_t>(cfg.batch, order.size() - at);
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t r = 0; r < bs; ++r) {
        const auto& ep = episodes[order[at + r]];
        batch_loss += model.cross_entropy(ep, masks[order[at + r]], &grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("train_ar: loss diverged at step " +
                            std::to_string(opt.steps()));
      }
      grad /= static_cast<double>(bs);
      opt.step(model.params(), grad);
      total += batch_loss;
      seen += bs;
      at += bs;
    }
    double mean = total / seen;
    if (epoch == 0) first_epoch = mean;
    last_epoch = mean;
  }

  ExtrapolatorCheckpoint ck;
  ck.kind = "ar";
  ck.ar = std::move(model);
  ck.vocab = vocab;
  ck.binner = binner;
  ck.mode = mode;
  ck.max_episode_tokens = max_tokens;
  ck.train_stats = {{"episodes", episodes.size()},
                    {"epochs", cfg.epochs},
                    {"lr", cfg.lr},
                    {"batch", cfg.batch},
                    {"init_scale", cfg.init_scale},
                    {"first_epoch_loss", first_epoch},
                    {"final_epoch_loss", last_epoch}};
  return ck;
}

}  // namespace extrap

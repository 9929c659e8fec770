#pragma once

#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "extrap/checkpoint.hpp"
#include "extrap/energy.hpp"
#include "extrap/episode_codec.hpp"
#include "extrap/rng.hpp"
#include "extrap/train.hpp"

namespace extrap {

struct DecodeConfig {
  double temperature = 1.0;
  int top_k = 0;  // 0 = no truncation
};

struct Rollout {
  TokenSeq x0;
  std::vector<TokenSeq> states;  // revised states x1..xn, chronological
  std::vector<double> scores;    // per revised state; NaN where not supplied
  int iterations = 0;            // number of revised states (never counts x0)
  std::string stop_reason;       // stop-token | max-states | runaway | error
  long grammar_violations = 0;
  std::vector<int> token_stream;  // every token fed to or sampled from the model
  std::string error;

  const TokenSeq& final_state() const {
    return states.empty() ? x0 : states.back();
  }
};

namespace detail {

inline int sample_token(const Eigen::VectorXd& logits, const DecodeConfig& cfg,
                        RngStream& rng) {
  Eigen::VectorXd z = logits / std::max(cfg.temperature, 1e-6);
  if (cfg.top_k > 0 && cfg.top_k < z.size()) {
    std::vector<int> idx(z.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::nth_element(idx.begin(), idx.begin() + cfg.top_k - 1, idx.end(),
                     [&](int a, int b) { return z[a] > z[b]; });
    double cutoff = z[idx[cfg.top_k - 1]];
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z[i] < cutoff) z[i] = -std::numeric_limits<double>::infinity();
    }
  }
  Eigen::VectorXd p = nn::softmax_vec(z);
  std::vector<double> w(p.data(), p.data() + p.size());
  return static_cast<int>(rng.categorical(w));
}

}  // namespace detail

// Iterative refinement with the episode model. Builds the prefix
// ids(x0) <seq0>, then alternates state generation with score handling:
// mode none appends nothing, mode real appends the guide's bin after each
// separator, and mode predicted lets the model emit the bin itself. A bin
// emitted directly after state tokens marks the final state (the encoded
// layout), as does <stop>.
inline Rollout rollout_ar(const ExtrapolatorCheckpoint& ck, const TokenSeq& x0,
                          RewardMode mode, int max_states, const ScoreFn& guide,
                          const DecodeConfig& decode, RngStream& rng) {
  if (!ck.ar || ck.kind != "ar") throw ContractError("rollout_ar: not an ar checkpoint");
  if (max_states < 1) throw ContractError("rollout_ar: max_states must be >= 1");
  if (mode != ck.mode) {
    throw ContractError("rollout_ar: reward mode does not match checkpoint");
  }
  if (mode == RewardMode::kReal && !guide) {
    throw ContractError("rollout_ar: real mode requires the guide");
  }
  const Vocabulary& vocab = ck.vocab;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Rollout out;
  out.x0 = x0;
  auto st = ck.ar->make_state();
  Eigen::VectorXd logits;
  auto feed = [&](int tok) {
    logits = ck.ar->decode_step(st, tok);
    out.token_stream.push_back(tok);
  };
  for (int t : x0) feed(t);
  feed(vocab.seq_token(0));

  long budget = 4L * (ck.max_episode_tokens > 0 ? ck.max_episode_tokens
                                                : ck.ar->config().context);
  const long ctx_room = ck.ar->config().context;
  TokenSeq cur;
  auto finish_state = [&](double score) {
    out.states.push_back(cur);
    out.scores.push_back(score);
    cur.clear();
  };

  out.stop_reason = "runaway";
  while (true) {
    if (budget-- <= 0 ||
        static_cast<long>(out.token_stream.size()) + 1 >= ctx_room) {
      out.stop_reason = "runaway";
      break;
    }
    int tok = detail::sample_token(logits, decode, rng);
    if (vocab.is_content(tok)) {
      feed(tok);
      cur.push_back(tok);
      continue;
    }
    if (vocab.is_seq(tok)) {
      if (cur.empty()) {  // separator with no state: dead end
        ++out.grammar_violations;
        out.stop_reason = "runaway";
        break;
      }
      feed(tok);
      if (mode == RewardMode::kNone) {
        finish_state(nan);
      } else if (mode == RewardMode::kReal) {
        double s = guide(cur);
        finish_state(s);
        feed(vocab.score_token(ck.binner.bin(s)));
      } else {  // predicted: the model emits the bin
        int nxt = detail::sample_token(logits, decode, rng);
        --budget;
        if (vocab.is_score(nxt)) {
          finish_state(ck.binner.midpoint(vocab.score_bin(nxt)));
          feed(nxt);
        } else if (vocab.is_stop(nxt)) {
          ++out.grammar_violations;
          finish_state(nan);
          out.stop_reason = "stop-token";
          break;
        } else {
          ++out.grammar_violations;
          finish_state(nan);
          feed(nxt);
          if (vocab.is_content(nxt)) cur.push_back(nxt);
        }
      }
      if (static_cast<int>(out.states.size()) >= max_states) {
        out.stop_reason = "max-states";
        break;
      }
      continue;
    }
    if (vocab.is_score(tok)) {
      if (cur.empty()) {
        ++out.grammar_violations;
        out.stop_reason = "runaway";
        break;
      }
      // score right after state tokens: the layout's final state
      if (mode == RewardMode::kPredicted) {
        feed(tok);
        finish_state(ck.binner.midpoint(vocab.score_bin(tok)));
      } else if (mode == RewardMode::kReal) {
        double s = guide(cur);
        finish_state(s);
        feed(vocab.score_token(ck.binner.bin(s)));  // real bin, not the sampled one
      } else {
        ++out.grammar_violations;  // mode none has no score tokens
        finish_state(nan);
      }
      out.stop_reason = "stop-token";
      break;
    }
    // <stop>
    if (cur.empty()) {
      feed(tok);
      out.stop_reason = "stop-token";
      break;
    }
    feed(tok);
    finish_state(mode == RewardMode::kReal && guide ? guide(cur) : nan);
    out.stop_reason = "stop-token";
    break;
  }
  out.iterations = static_cast<int>(out.states.size());
  return out;
}

// Deterministic fixed-length refinement: x_t = mlp_step(x_{t-1}).
// score_fn (the task guide) is used for reporting only.
inline Rollout rollout_mlp(const ExtrapolatorCheckpoint& ck, const TokenSeq& x0,
                           int steps, const ScoreFn& score_fn = nullptr) {
  if (steps < 1) throw ContractError("rollout_mlp: steps must be >= 1");
  Rollout out;
  out.x0 = x0;
  TokenSeq x = x0;
  for (int t = 0; t < steps; ++t) {
    x = mlp_step(ck, x);
    out.states.push_back(x);
    out.scores.push_back(score_fn ? score_fn(x)
                                  : std::numeric_limits<double>::quiet_NaN());
  }
  out.iterations = steps;
  out.stop_reason = "max-states";
  return out;
}

// Independent rollouts with derived streams; order-stable, errors captured
// per input.
inline std::vector<Rollout> batch_generate(const ExtrapolatorCheckpoint& ck,
                                           const std::vector<TokenSeq>& inputs,
                                           RewardMode mode, int max_states,
                                           const ScoreFn& guide,
                                           const DecodeConfig& decode,
                                           const RngStream& base_rng,
                                           int jobs = 1) {
  if (inputs.empty()) throw ContractError("batch_generate: no inputs");
  std::vector<Rollout> out(inputs.size());
  auto run_one = [&](std::size_t i) {
    RngStream rng = base_rng.derive(i);
    try {
      out[i] = rollout_ar(ck, inputs[i], mode, max_states, guide, decode, rng);
    } catch (const std::exception& e) {
      out[i] = Rollout{};
      out[i].x0 = inputs[i];
      out[i].stop_reason = "error";
      out[i].error = e.what();
    }
  };
  if (jobs <= 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> futs;
    std::size_t next = 0;
    const std::size_t stride =
        (inputs.size() + static_cast<std::size_t>(jobs) - 1) / jobs;
    for (int w = 0; w < jobs && next < inputs.size(); ++w) {
      std::size_t lo = next, hi = std::min(inputs.size(), next + stride);
      next = hi;
      futs.push_back(std::async(std::launch::async, [&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) run_one(i);
      }));
    }
    for (auto& f : futs) f.get();
  }
  return out;
}

}  // namespace extrap

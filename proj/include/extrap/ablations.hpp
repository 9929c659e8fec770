#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "extrap/metrics.hpp"
#include "extrap/metropolis.hpp"
#include "extrap/rollout.hpp"
#include "extrap/strategies.hpp"
#include "extrap/train.hpp"

namespace extrap {

// Everything one train-and-evaluate cell needs besides the chains.
struct CellConfig {
  StrategyConfig strategy;
  ArTrainConfig train;
  RewardMode mode = RewardMode::kPredicted;
  DecodeConfig decode;
  int max_states = 6;
  int eval_inputs = 150;
  int bins = 32;
  int vocab_max_states = 10;
  std::vector<double> thresholds;
  int jobs = 1;
};

struct CellResult {
  std::string cell;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  double bin_agreement = std::numeric_limits<double>::quiet_NaN();
  long kept_episodes = 0;
  long discarded_chains = 0;
  bool failed = false;
  std::string error;
};

inline Vocabulary vocabulary_for(const Task& task, int max_states, int bins) {
  return Vocabulary::build(task.content_labels, max_states, bins);
}

// Fraction of predicted score bins that match the guide's recomputed bin
// for the same state.
inline double predicted_bin_agreement(const std::vector<Rollout>& rollouts,
                                      const ScoreBinner& binner,
                                      const ScoreFn& guide) {
  long match = 0, total = 0;
  for (const auto& r : rollouts) {
    for (std::size_t i = 0; i < r.states.size(); ++i) {
      if (std::isnan(r.scores[i])) continue;
      ++total;
      match += binner.bin(r.scores[i]) == binner.bin(guide(r.states[i]));
    }
  }
  return total == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : static_cast<double>(match) / total;
}

// Select episodes, fit the binner, train one checkpoint, generate from
// fresh in-range inputs and score the finals with the oracle.
inline CellResult run_cell(const Task& task, std::span<const ChainRecord> chains,
                           const CellConfig& cfg, std::uint64_t seed,
                           const std::string& label,
                           ExtrapolatorCheckpoint* out_ckpt = nullptr) {
  CellResult row;
  row.cell = label;
  row.seed = seed;
  try {
    SelectionCounts counts;
    auto episodes = select_episodes(chains, cfg.strategy, &counts);
    if (episodes.empty()) throw TrainingError("all chains discarded");
    row.kept_episodes = counts.kept;
    row.discarded_chains = counts.discarded;

    std::vector<double> ep_scores;
    for (const auto& ep : episodes) {
      ep_scores.insert(ep_scores.end(), ep.scores.begin(), ep.scores.end());
    }
    ScoreBinner binner = ScoreBinner::fit(ep_scores, cfg.bins);
    Vocabulary vocab = vocabulary_for(task, cfg.vocab_max_states, cfg.bins);

    std::vector<std::vector<int>> encoded;
    encoded.reserve(episodes.size());
    for (const auto& ep : episodes) {
      encoded.push_back(encode_episode(ep, vocab, binner, cfg.mode));
    }

    RngStream train_rng = RngStream(seed).derive(1);
    auto ckpt = train_ar(encoded, vocab, binner, cfg.mode, cfg.train, train_rng);

    RngStream eval_rng = RngStream(seed).derive(2);
    std::vector<TokenSeq> inputs;
    inputs.reserve(cfg.eval_inputs);
    for (int i = 0; i < cfg.eval_inputs; ++i) {
      inputs.push_back(task.sample_initial(eval_rng));
    }
    ScoreFn guide = [&task](const TokenSeq& x) { return task.guide.combined(x); };
    auto rollouts = batch_generate(ckpt, inputs, cfg.mode, cfg.max_states, guide,
                                   cfg.decode, RngStream(seed).derive(3), cfg.jobs);

    std::vector<double> oracle_scores, iters;
    std::vector<TokenSeq> finals;
    for (const auto& r : rollouts) {
      const TokenSeq& f = r.final_state();
      if (static_cast<int>(f.size()) == task.length) {
        oracle_scores.push_back(task.oracle(f));
      } else {
        oracle_scores.push_back(task.oracle(r.x0));  // malformed output scores as its input
      }
      iters.push_back(static_cast<double>(r.iterations));
      finals.push_back(f);
    }
    row.metrics = compute_metrics(oracle_scores, iters, finals,
                                  task.training_range, cfg.thresholds);
    if (cfg.mode == RewardMode::kPredicted) {
      ScoreFn raw_guide = guide;
      row.bin_agreement = predicted_bin_agreement(rollouts, binner, raw_guide);
    }
    if (out_ckpt) *out_ckpt = std::move(ckpt);
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

// Appendix A analog: identical episodes, one checkpoint per reward mode.
inline std::vector<CellResult> ablate_reward_mode(
    const Task& task, std::span<const ChainRecord> chains, const CellConfig& base,
    const std::vector<RewardMode>& modes, const std::vector<std::uint64_t>& seeds) {
  std::vector<CellResult> rows;
  for (RewardMode mode : modes) {
    for (std::uint64_t seed : seeds) {
      CellConfig cfg = base;
      cfg.mode = mode;
      rows.push_back(run_cell(task, chains, cfg, seed, to_string(mode)));
    }
  }
  return rows;
}

// Appendix C analog: oracle metrics against episode length (states per
// episode; length 2 is exactly first/best).
inline std::vector<CellResult> ablate_episode_length(
    const Task& task, std::span<const ChainRecord> chains, const CellConfig& base,
    const std::vector<int>& lengths, const std::vector<std::uint64_t>& seeds) {
  std::vector<CellResult> rows;
  for (int len : lengths) {
    if (len < 2) throw ConfigError("episode length must be >= 2 states");
    CellConfig cfg = base;
    if (len == 2) {
      cfg.strategy.kind = StrategyConfig::Kind::kFirstBest;
    } else {
      cfg.strategy.kind = StrategyConfig::Kind::kThinFixed;
      cfg.strategy.n = len - 1;
    }
    for (std::uint64_t seed : seeds) {
      rows.push_back(run_cell(task, chains, cfg, seed,
                              "len=" + std::to_string(len)));
    }
  }
  return rows;
}

// Truncate a chain to the leading fraction of its states.
inline ChainRecord truncate_chain(const ChainRecord& c, double fraction) {
  ChainRecord out = c;
  std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(c.states.size() * fraction)));
  out.states.resize(keep);
  out.scores.resize(keep);
  out.accepted.resize(keep > 0 ? keep - 1 : 0);
  return out;
}

// Appendix D analog: re-extract, retrain and re-evaluate on truncated
// chains. fraction 1.0 uses the input chains unchanged.
inline std::vector<CellResult> ablate_chain_truncation(
    const Task& task, std::span<const ChainRecord> chains, const CellConfig& base,
    const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds) {
  std::vector<CellResult> rows;
  for (double f : fractions) {
    if (f <= 0.0 || f > 1.0) throw ConfigError("truncation fraction must be in (0,1]");
    std::vector<ChainRecord> cut;
    long too_short = 0;
    if (f == 1.0) {
      cut.assign(chains.begin(), chains.end());
    } else {
      for (const auto& c : chains) {
        auto t = truncate_chain(c, f);
        if (t.states.size() < 2) {
          ++too_short;
          continue;
        }
        cut.push_back(std::move(t));
      }
    }
    for (std::uint64_t seed : seeds) {
      char label[32];
      std::snprintf(label, sizeof label, "frac=%g", f);
      auto row = run_cell(task, cut, base, seed, label);
      row.discarded_chains += too_short;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct ContinuationCurve {
  std::uint64_t seed = 0;
  std::vector<double> best_oracle_per_epoch;  // index 0 = x0 itself
  double qtheta_score = 0.0;
  int qtheta_iterations = 0;
};

// Fig. "MCMC over ten epochs" analog: continued MCMC best-so-far per epoch
// against the trained model's rollout score.
inline ContinuationCurve compare_mcmc_continuation(
    const Task& task, const TokenSeq& x0, int epochs, const SamplerConfig& sampler,
    const ExtrapolatorCheckpoint& ckpt, int steps, RewardMode mode,
    const DecodeConfig& decode, std::uint64_t seed) {
  ContinuationCurve curve;
  curve.seed = seed;
  RngStream mcmc_rng = RngStream(seed).derive(11);
  SamplerConfig cfg = sampler;
  cfg.steps = std::max(1, epochs) * static_cast<int>(x0.size());
  ChainRecord chain = run_chain(task, x0, cfg, mcmc_rng);

  const int L = static_cast<int>(x0.size());
  double best = task.oracle(x0);
  curve.best_oracle_per_epoch.push_back(best);
  for (int e = 1; e <= epochs; ++e) {
    std::size_t upto = std::min<std::size_t>(chain.states.size(),
                                             static_cast<std::size_t>(e) * L + 1);
    for (std::size_t t = (e - 1) * L + 1; t < upto; ++t) {
      best = std::max(best, task.oracle(chain.states[t]));
    }
    curve.best_oracle_per_epoch.push_back(best);
  }

  if (ckpt.kind == "mlp") {
    ScoreFn guide = [&task](const TokenSeq& x) { return task.guide.combined(x); };
    Rollout r = rollout_mlp(ckpt, x0, steps, guide);
    curve.qtheta_score = task.oracle(r.final_state());
    curve.qtheta_iterations = r.iterations;
  } else {
    RngStream roll_rng = RngStream(seed).derive(12);
    ScoreFn guide = [&task](const TokenSeq& x) { return task.guide.combined(x); };
    Rollout r = rollout_ar(ckpt, x0, mode, steps, guide, decode, roll_rng);
    const TokenSeq& f = r.final_state();
    curve.qtheta_score = static_cast<int>(f.size()) == task.length
                             ? task.oracle(f)
                             : task.oracle(x0);
    curve.qtheta_iterations = r.iterations;
  }
  return curve;
}

}  // namespace extrap

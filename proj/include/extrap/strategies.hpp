#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extrap/chain.hpp"
#include "extrap/episode_codec.hpp"
#include "extrap/errors.hpp"

namespace extrap {

struct StrategyConfig {
  enum class Kind {
    kFirstBest,
    kThinFixed,
    kThinVariable,
    kDenergyFixed,
    kDenergyVariable,
  };
  Kind kind = Kind::kDenergyFixed;
  int n = 4;           // fixed-length kinds
  int k = 3;           // thinning factor (thin-variable)
  double theta = 0.2;  // relative improvement threshold (denergy-variable)
  int cap = 10;        // max revised states per episode (variable kinds)

  static Kind kind_from(const std::string& s) {
    if (s == "first-best") return Kind::kFirstBest;
    if (s == "thin-fixed") return Kind::kThinFixed;
    if (s == "thin-variable") return Kind::kThinVariable;
    if (s == "denergy-fixed") return Kind::kDenergyFixed;
    if (s == "denergy-variable") return Kind::kDenergyVariable;
    throw ConfigError("unknown strategy: " + s);
  }
  static const char* name_of(Kind k) {
    switch (k) {
      case Kind::kFirstBest: return "first-best";
      case Kind::kThinFixed: return "thin-fixed";
      case Kind::kThinVariable: return "thin-variable";
      case Kind::kDenergyFixed: return "denergy-fixed";
      case Kind::kDenergyVariable: return "denergy-variable";
    }
    return "?";
  }
  const char* name() const { return name_of(kind); }
};

// Drop consecutive repeats (rejected proposals), keeping the first
// occurrence; every retained transition is a real move.
inline ChainRecord dedup_chain(const ChainRecord& c) {
  c.validate();
  ChainRecord out;
  out.task = c.task;
  out.seed = c.seed;
  out.proposal = c.proposal;
  out.states.push_back(c.states[0]);
  out.scores.push_back(c.scores[0]);
  for (std::size_t t = 1; t < c.states.size(); ++t) {
    if (c.states[t] != out.states.back()) {
      out.states.push_back(c.states[t]);
      out.scores.push_back(c.scores[t]);
      out.accepted.push_back(true);
    }
  }
  return out;
}

namespace detail {

inline Episode episode_from_indices(const ChainRecord& c,
                                    const std::vector<int>& idx,
                                    const char* tag) {
  Episode ep;
  ep.strategy = tag;
  ep.states.push_back(c.states[0]);
  for (int i : idx) {
    if (i == 0) continue;
    ep.states.push_back(c.states[i]);
    ep.scores.push_back(c.scores[i]);
  }
  return ep;
}

}  // namespace detail

// x0 plus the best-scoring state (earliest on ties). Empty optional when
// nothing beats x0 or the chain is a single state: the chain is discarded.
inline std::optional<Episode> select_first_best(const ChainRecord& c) {
  if (c.states.size() < 2) return std::nullopt;
  int best = 0;
  for (int t = 1; t < static_cast<int>(c.states.size()); ++t) {
    if (c.scores[t] > c.scores[best]) best = t;
  }
  if (best == 0) return std::nullopt;
  return detail::episode_from_indices(c, {best}, "first-best");
}

// x0 plus states at indices round(j * (len-1) / n), j = 1..n; the final
// state is always included and duplicate indices collapse.
inline std::optional<Episode> select_thin_fixed(const ChainRecord& c, int n) {
  if (n < 1) throw ContractError("select_thin_fixed: n must be >= 1");
  if (c.states.size() < 2) return std::nullopt;
  const int last = static_cast<int>(c.states.size()) - 1;
  std::vector<int> idx;
  for (int j = 1; j <= n; ++j) {
    int i = static_cast<int>(std::llround(static_cast<double>(j) * last / n));
    if (i == 0) continue;
    if (idx.empty() || idx.back() != i) idx.push_back(i);
  }
  if (idx.empty()) return std::nullopt;
  auto ep = detail::episode_from_indices(c, idx, "thin-fixed");
  return ep;
}

// n = min(cap, chain_length // k), then fixed thinning with that n.
inline std::optional<Episode> select_thin_variable(const ChainRecord& c, int k,
                                                   int cap) {
  if (k < 1) throw ContractError("select_thin_variable: k must be >= 1");
  int n = std::min<int>(cap, static_cast<int>(c.states.size()) / k);
  if (n < 1) return std::nullopt;
  auto ep = select_thin_fixed(c, n);
  if (ep) ep->strategy = "thin-variable";
  return ep;
}

// x0 plus the destinations of the n transitions with the largest score
// improvement (earliest on ties), kept in chronological order. Fewer than
// n positive improvements: take all of them; none: discard.
inline std::optional<Episode> select_denergy_fixed(const ChainRecord& c, int n) {
  if (n < 1) throw ContractError("select_denergy_fixed: n must be >= 1");
  if (c.states.size() < 2) return std::nullopt;
  const int m = static_cast<int>(c.states.size()) - 1;
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return (c.scores[a + 1] - c.scores[a]) > (c.scores[b + 1] - c.scores[b]);
  });
  std::vector<int> idx;
  for (int j = 0; j < m && static_cast<int>(idx.size()) < n; ++j) {
    int t = order[j];
    if (c.scores[t + 1] - c.scores[t] <= 0.0) break;
    idx.push_back(t + 1);
  }
  if (idx.empty()) return std::nullopt;
  std::sort(idx.begin(), idx.end());
  return detail::episode_from_indices(c, idx, "denergy-fixed");
}

// Every transition whose relative improvement meets theta; over the cap,
// keep the cap largest improvements. The epsilon floor guards division by
// scores near zero.
inline std::optional<Episode> select_denergy_variable(const ChainRecord& c,
                                                      double theta, int cap) {
  if (theta <= 0.0) throw ContractError("select_denergy_variable: theta must be > 0");
  if (c.states.size() < 2) return std::nullopt;
  constexpr double kEps = 1e-9;
  const int m = static_cast<int>(c.states.size()) - 1;
  std::vector<std::pair<double, int>> hits;  // (relative improvement, dest index)
  for (int t = 0; t < m; ++t) {
    double rel = (c.scores[t + 1] - c.scores[t]) /
                 std::max(std::abs(c.scores[t]), kEps);
    if (rel >= theta) hits.push_back({rel, t + 1});
  }
  if (hits.empty()) return std::nullopt;
  if (static_cast<int>(hits.size()) > cap) {
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
      return a.first > b.first;
    });
    hits.resize(cap);
  }
  std::vector<int> idx;
  for (auto& [rel, i] : hits) idx.push_back(i);
  std::sort(idx.begin(), idx.end());
  return detail::episode_from_indices(c, idx, "denergy-variable");
}

inline std::optional<Episode> select_episode(const ChainRecord& deduped,
                                             const StrategyConfig& cfg) {
  using K = StrategyConfig::Kind;
  switch (cfg.kind) {
    case K::kFirstBest: return select_first_best(deduped);
    case K::kThinFixed: return select_thin_fixed(deduped, cfg.n);
    case K::kThinVariable: return select_thin_variable(deduped, cfg.k, cfg.cap);
    case K::kDenergyFixed: return select_denergy_fixed(deduped, cfg.n);
    case K::kDenergyVariable:
      return select_denergy_variable(deduped, cfg.theta, cfg.cap);
  }
  throw ContractError("select_episode: bad strategy kind");
}

struct SelectionCounts {
  long kept = 0;
  long discarded = 0;
  long clamped_scores = 0;
};

inline std::vector<Episode> select_episodes(std::span<const ChainRecord> chains,
                                            const StrategyConfig& cfg,
                                            SelectionCounts* counts = nullptr) {
  std::vector<Episode> eps;
  for (const auto& chain : chains) {
    auto ep = select_episode(dedup_chain(chain), cfg);
    if (ep) {
      eps.push_back(std::move(*ep));
      if (counts) ++counts->kept;
    } else if (counts) {
      ++counts->discarded;
    }
  }
  return eps;
}

struct EncodedTrainingSet {
  std::vector<std::vector<int>> encoded;
  std::vector<Episode> episodes;
  SelectionCounts counts;
};

// dedup + strategy per chain, drop discards, encode what remains.
inline EncodedTrainingSet build_training_set(std::span<const ChainRecord> chains,
                                             const StrategyConfig& strategy,
                                             const Vocabulary& vocab,
                                             const ScoreBinner& binner,
                                             RewardMode mode) {
  if (chains.empty()) throw ContractError("build_training_set: no chains");
  EncodedTrainingSet set;
  set.episodes = select_episodes(chains, strategy, &set.counts);
  if (set.episodes.empty()) {
    throw TrainingError("build_training_set: every chain was discarded");
  }
  EncodeStats stats;
  for (const auto& ep : set.episodes) {
    set.encoded.push_back(encode_episode(ep, vocab, binner, mode, &stats));
  }
  set.counts.clamped_scores = stats.clamped_scores;
  return set;
}

}  // namespace extrap

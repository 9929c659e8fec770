#pragma once

#include <optional>
#include <vector>

#include "extrap/chain.hpp"
#include "extrap/score_binner.hpp"
#include "extrap/vocab.hpp"

namespace extrap {

// Whether intermediate scores are omitted, supplied by the guide, or
// predicted by the model. The encoded layout is identical for real and
// predicted; they differ in the training loss mask and at inference.
enum class RewardMode { kNone, kReal, kPredicted };

inline const char* to_string(RewardMode m) {
  switch (m) {
    case RewardMode::kNone: return "none";
    case RewardMode::kReal: return "real";
    case RewardMode::kPredicted: return "predicted";
  }
  return "?";
}

inline RewardMode reward_mode_from(const std::string& s) {
  if (s == "none") return RewardMode::kNone;
  if (s == "real") return RewardMode::kReal;
  if (s == "predicted") return RewardMode::kPredicted;
  throw ConfigError("unknown reward mode: " + s);
}

struct EncodeStats {
  long clamped_scores = 0;
};

// Token stream layout, n revised states:
//
//   x0 <seq0> x1 <seq1> s1 x2 <seq2> s2 ... x_n s_n <stop>
//
// The final state's score follows its tokens directly (no separator), and
// in mode none all score tokens are dropped while separators and <stop>
// remain. Scores are emitted as one bin token each.
std::vector<int> encode_episode(const Episode& ep, const Vocabulary& vocab,
                                const ScoreBinner& binner, RewardMode mode,
                                EncodeStats* stats = nullptr);

struct DecodedEpisode {
  Episode episode;
  bool truncated = false;   // input ended before a well-formed <stop>
  int dropped_tokens = 0;   // tokens past the last complete state
};

// Inverse of encode_episode; scores come back as bin midpoints. States
// cut off mid-stream are dropped and counted, a missing x0 is an error.
DecodedEpisode decode_episode(const std::vector<int>& tokens,
                              const Vocabulary& vocab,
                              const ScoreBinner& binner);

// Role of each token in an encoded episode, used for the training mask.
enum class TokenRole { kX0, kContent, kSeparator, kScore, kStop };

std::vector<TokenRole> token_roles(const std::vector<int>& tokens,
                                   const Vocabulary& vocab);

// -------------------------------------------------------------------------

inline std::vector<int> encode_episode(const Episode& ep,
                                       const Vocabulary& vocab,
                                       const ScoreBinner& binner,
                                       RewardMode mode, EncodeStats* stats) {
  ep.validate();
  const int n = ep.revised();
  if (n > vocab.max_states()) {
    throw ContractError("encode_episode: episode longer than vocabulary allows");
  }
  const bool scored = mode != RewardMode::kNone;
  std::vector<int> out;
  out.reserve(ep.states.size() * (ep.states[0].size() + 2) + 2);
  for (int t : ep.states[0]) out.push_back(t);
  out.push_back(vocab.seq_token(0));
  for (int i = 1; i <= n; ++i) {
    for (int t : ep.states[i]) out.push_back(t);
    if (i < n) out.push_back(vocab.seq_token(i));
    if (scored) {
      bool clamped = false;
      out.push_back(vocab.score_token(binner.bin(ep.scores[i - 1], &clamped)));
      if (clamped && stats) ++stats->clamped_scores;
    }
  }
  out.push_back(vocab.stop_token());
  return out;
}

inline DecodedEpisode decode_episode(const std::vector<int>& tokens,
                                     const Vocabulary& vocab,
                                     const ScoreBinner& binner) {
  if (tokens.empty()) throw StructuralError("decode_episode: empty token list");

  DecodedEpisode out;
  std::size_t pos = 0;

  // x0: content run closed by <seq0>
  TokenSeq x0;
  while (pos < tokens.size() && vocab.is_content(tokens[pos])) {
    x0.push_back(tokens[pos++]);
  }
  if (x0.empty() || pos == tokens.size() || !vocab.is_seq(tokens[pos])) {
    throw StructuralError("decode_episode: no complete x0 segment at position " +
                          std::to_string(pos));
  }
  ++pos;
  out.episode.states.push_back(std::move(x0));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  TokenSeq cur;
  bool done = false;
  while (pos < tokens.size() && !done) {
    int t = tokens[pos];
    if (vocab.is_content(t)) {
      cur.push_back(t);
      ++pos;
      continue;
    }
    if (cur.empty()) break;  // boundary with no state: malformed tail
    if (vocab.is_seq(t)) {
      // state complete; optional score token follows the separator
      out.episode.states.push_back(std::move(cur));
      cur.clear();
      ++pos;
      if (pos < tokens.size() && vocab.is_score(tokens[pos])) {
        out.episode.scores.push_back(binner.midpoint(vocab.score_bin(tokens[pos])));
        ++pos;
      } else {
        out.episode.scores.push_back(nan);
      }
    } else if (vocab.is_score(t)) {
      // final state: score directly after its tokens, then <stop>
      out.episode.states.push_back(std::move(cur));
      cur.clear();
      out.episode.scores.push_back(binner.midpoint(vocab.score_bin(t)));
      ++pos;
      if (pos < tokens.size() && vocab.is_stop(tokens[pos])) {
        ++pos;
        done = true;
      } else {
        out.truncated = true;
        done = true;
      }
    } else {  // <stop> after a bare state (mode none)
      out.episode.states.push_back(std::move(cur));
      cur.clear();
      out.episode.scores.push_back(nan);
      ++pos;
      done = true;
    }
  }
  if (!done) out.truncated = true;
  out.dropped_tokens = static_cast<int>(tokens.size() - pos) +
                       static_cast<int>(cur.size());
  if (out.episode.states.size() < 2) {
    throw StructuralError("decode_episode: no complete revised state");
  }
  return out;
}

inline std::vector<TokenRole> token_roles(const std::vector<int>& tokens,
                                          const Vocabulary& vocab) {
  std::vector<TokenRole> roles;
  roles.reserve(tokens.size());
  bool past_x0 = false;
  for (int t : tokens) {
    if (vocab.is_content(t)) {
      roles.push_back(past_x0 ? TokenRole::kContent : TokenRole::kX0);
    } else if (vocab.is_seq(t)) {
      past_x0 = true;
      roles.push_back(TokenRole::kSeparator);
    } else if (vocab.is_score(t)) {
      roles.push_back(TokenRole::kScore);
    } else {
      roles.push_back(TokenRole::kStop);
    }
  }
  return roles;
}

}  // namespace extrap

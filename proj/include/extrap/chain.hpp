#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "extrap/vocab.hpp"
#include "json.hpp"

namespace extrap {

// One Markov chain: states in visit order (index 0 = x0), cached guide
// scores, and per-proposal acceptance flags. len(scores) == len(states),
// len(accepted) == len(states) - 1.
struct ChainRecord {
  std::string task;
  std::uint64_t seed = 0;
  std::vector<TokenSeq> states;
  std::vector<double> scores;
  std::vector<bool> accepted;
  nlohmann::json proposal;  // kernel settings + run stats, for provenance

  std::size_t length() const { return states.size(); }
  void validate() const;
};

inline void ChainRecord::validate() const {
  if (states.empty()) throw StructuralError("chain: empty state list");
  if (scores.size() != states.size()) {
    throw StructuralError("chain: scores/states length mismatch");
  }
  if (accepted.size() + 1 != states.size()) {
    throw StructuralError("chain: accepted/states length mismatch");
  }
}

// A training episode: states[0] = x0 plus n revised states with their guide
// scores (x0 carries no score).
struct Episode {
  std::vector<TokenSeq> states;
  std::vector<double> scores;  // size == states.size() - 1
  std::string strategy;

  int revised() const { return static_cast<int>(states.size()) - 1; }
  void validate() const {
    if (states.size() < 2) throw StructuralError("episode: needs >= 2 states");
    if (scores.size() + 1 != states.size()) {
      throw StructuralError("episode: scores/states length mismatch");
    }
  }
};

}  // namespace extrap

#pragma once

#include <cstddef>

#include "extrap/errors.hpp"
#include "extrap/vocab.hpp"

namespace extrap {

// Count of positions where a and b differ. Lengths must match.
inline int hamming(const TokenSeq& a, const TokenSeq& b) {
  if (a.size() != b.size()) {
    throw ContractError("hamming: length mismatch");
  }
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

}  // namespace extrap

#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "extrap/errors.hpp"

namespace extrap {

// Equal-width quantizer over the score range seen in training episodes.
// One vocabulary token per bin; midpoints recover approximate scores when
// decoding. Out-of-range scores clamp to the extreme bins.
class ScoreBinner {
 public:
  ScoreBinner() = default;
  ScoreBinner(double lo, double hi, int bins) : lo_(lo), hi_(hi), bins_(bins) {
    if (bins < 1) throw ContractError("ScoreBinner: bins must be >= 1");
    if (!(hi > lo)) hi_ = lo_ + 1.0;  // degenerate range
  }

  static ScoreBinner fit(std::span<const double> scores, int bins) {
    if (scores.empty()) throw ContractError("ScoreBinner: no scores to fit");
    double lo = scores[0], hi = scores[0];
    for (double s : scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return ScoreBinner(lo, hi, bins);
  }

  int bin(double s, bool* clamped = nullptr) const {
    if (clamped) *clamped = (s < lo_ || s > hi_);
    double t = (s - lo_) / width();
    int b = static_cast<int>(std::floor(t));
    return std::clamp(b, 0, bins_ - 1);
  }

  double midpoint(int b) const {
    if (b < 0 || b >= bins_) throw ContractError("ScoreBinner: bin out of range");
    return lo_ + (b + 0.5) * width();
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int bins() const { return bins_; }
  double width() const { return (hi_ - lo_) / bins_; }

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  int bins_ = 32;
};

}  // namespace extrap

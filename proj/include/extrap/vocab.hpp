#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "extrap/errors.hpp"

namespace extrap {

// A state: content-token ids over a small fixed vocabulary.
using TokenSeq = std::vector<std::int32_t>;

// Content tokens occupy ids [0, V); control tokens follow in a fixed order:
// <seq0>..<seqK>, then <stop>, then score-bin tokens <s0>..<sB-1>.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(std::vector<std::string> content_labels,
                          int max_states, int score_bins);

  int content_size() const { return content_size_; }
  int size() const { return static_cast<int>(labels_.size()); }
  int max_states() const { return max_states_; }
  int num_bins() const { return score_bins_; }

  int seq_token(int i) const;
  int stop_token() const { return content_size_ + max_states_ + 1; }
  int score_token(int bin) const;

  bool is_content(int id) const { return id >= 0 && id < content_size_; }
  bool is_seq(int id) const {
    return id >= content_size_ && id <= content_size_ + max_states_;
  }
  bool is_stop(int id) const { return id == stop_token(); }
  bool is_score(int id) const {
    return id > stop_token() && id < size();
  }
  int seq_index(int id) const { return id - content_size_; }
  int score_bin(int id) const { return id - stop_token() - 1; }

  const std::string& label(int id) const;
  int id(const std::string& label) const;

  const std::vector<std::string>& labels() const { return labels_; }
  std::vector<std::string> content_labels() const {
    return {labels_.begin(), labels_.begin() + content_size_};
  }

  bool operator==(const Vocabulary& o) const {
    return labels_ == o.labels_ && content_size_ == o.content_size_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
  int content_size_ = 0;
  int max_states_ = 0;
  int score_bins_ = 0;
};

inline Vocabulary Vocabulary::build(std::vector<std::string> content_labels,
                                    int max_states, int score_bins) {
  if (content_labels.size() < 2) {
    throw ContractError("Vocabulary: need at least 2 content tokens");
  }
  if (max_states < 1 || score_bins < 1) {
    throw ContractError("Vocabulary: max_states and score_bins must be >= 1");
  }
  Vocabulary v;
  v.content_size_ = static_cast<int>(content_labels.size());
  v.max_states_ = max_states;
  v.score_bins_ = score_bins;
  v.labels_ = std::move(content_labels);
  for (int i = 0; i <= max_states; ++i) {
    v.labels_.push_back("<seq" + std::to_string(i) + ">");
  }
  v.labels_.push_back("<stop>");
  for (int b = 0; b < score_bins; ++b) {
    v.labels_.push_back("<s" + std::to_string(b) + ">");
  }
  for (int i = 0; i < static_cast<int>(v.labels_.size()); ++i) {
    if (!v.index_.emplace(v.labels_[i], i).second) {
      throw ContractError("Vocabulary: duplicate label " + v.labels_[i]);
    }
  }
  return v;
}

inline int Vocabulary::seq_token(int i) const {
  if (i < 0 || i > max_states_) {
    throw ContractError("Vocabulary: separator index out of range");
  }
  return content_size_ + i;
}

inline int Vocabulary::score_token(int bin) const {
  if (bin < 0 || bin >= score_bins_) {
    throw ContractError("Vocabulary: score bin out of range");
  }
  return stop_token() + 1 + bin;
}

inline const std::string& Vocabulary::label(int id) const {
  if (id < 0 || id >= size()) throw ContractError("Vocabulary: bad token id");
  return labels_[id];
}

inline int Vocabulary::id(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw ContractError("Vocabulary: unknown label " + label);
  return it->second;
}

}  // namespace extrap

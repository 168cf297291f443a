#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace spanner {

// Half-open word-index interval [start, end). Empty type = untyped region.
struct Span {
  int start = 0;
  int end = 0;
  std::string type;

  int length() const { return end - start; }
  bool same_region(const Span& o) const { return start == o.start && end == o.end; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  int intersection(const Span& o) const;
  double iou(const Span& o) const;

  friend bool operator==(const Span& a, const Span& b) {
    return a.start == b.start && a.end == b.end && a.type == b.type;
  }
  friend bool operator<(const Span& a, const Span& b) {
    return std::tie(a.start, a.end, a.type) < std::tie(b.start, b.end, b.type);
  }
};

struct Sentence {
  std::vector<std::string> words;
  std::vector<std::string> subtokens;
  std::vector<int> word_starts;          // index of first subtoken per word
  std::vector<bool> first_subtoken_mask; // true exactly at word_starts
  std::vector<Span> gold;                // typed, may overlap/nest

  int n_words() const { return static_cast<int>(words.size()); }
  int n_subtokens() const { return static_cast<int>(subtokens.size()); }
};

struct Dataset {
  std::vector<Sentence> sentences;
  std::vector<std::string> type_inventory;  // ordered, unique

  int type_index(const std::string& type) const;
  std::size_t total_gold() const;
};

}  // namespace spanner

#pragma once

#include <cstdint>
#include <vector>

#include "spanner/corpus.hpp"
#include "spanner/encoder.hpp"
#include "spanner/nn.hpp"

namespace spanner {

struct Stage1Config {
  double negative_weight = 0.5;  // cross-entropy weight on label 0
  double positive_weight = 0.5;  // cross-entropy weight on label 1
  double decode_threshold = 0.5;
  int length_limit = 6;          // L; 12 for ACE-like, 8 for Genia-like corpora
};

// Per-word start probabilities and per-slot end probabilities. End slots run
// over word positions plus one sentinel slot past the last word. Predictions
// exist only at first-subtoken positions.
struct BoundaryScores {
  std::vector<double> start_prob;
  std::vector<double> end_prob;
};

struct RegionCandidate {
  Span span;  // untyped
  double start_prob = 0.0;
  double end_prob = 0.0;
};

// One linear layer over the encoder output. Start and end heads have
// disjoint parameters.
class Stage1Head {
 public:
  Stage1Head(int hidden_dim, std::uint64_t seed);

  struct Logits {
    nn::Var start;  // n_words x 2
    nn::Var end;    // (n_words + 1) x 2
  };
  Logits score(nn::Tape& tape, nn::Var encoded, const Sentence& sentence) const;

  BoundaryScores score_values(const Encoder& encoder, const Sentence& sentence) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  mutable nn::ParamStore params_;
  int w_start_, b_start_, w_end_, b_end_;
};

// Rows of the encoder output holding boundary predictions: the first
// subtoken of each word, plus the sentinel row for the end head.
std::vector<int> start_slot_rows(const Sentence& sentence);
std::vector<int> end_slot_rows(const Sentence& sentence);

// Class-weighted two-class cross-entropy, mean over slots, start and end
// terms summed. Probabilities are clamped to [1e-7, 1 - 1e-7] before log.
nn::Var stage1_loss(nn::Tape& tape, const Stage1Head::Logits& logits,
                    const BoundaryLabels& labels, const Stage1Config& cfg);

// All (start, end) pairs above threshold with 0 < end - start <= L,
// ordered by span.
std::vector<RegionCandidate> decode_and_pair(const BoundaryScores& scores,
                                             const Stage1Config& cfg);

// Type-blind exact-region precision/recall. Gold regions are distinct
// (start, end) pairs regardless of type.
struct RegionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t matched_candidates = 0;
  std::size_t total_candidates = 0;
  std::size_t matched_gold = 0;
  std::size_t total_gold = 0;
};
RegionMetrics region_metrics(const std::vector<std::vector<RegionCandidate>>& candidates,
                             const Dataset& dataset);

}  // namespace spanner

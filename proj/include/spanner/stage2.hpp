#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spanner/corpus.hpp"
#include "spanner/encoder.hpp"
#include "spanner/nn.hpp"

namespace spanner {

struct Stage2Config {
  double alpha = 0.5;  // weight on start + end losses
  double beta = 1.0;   // weight on entityness loss
  int n_heads = 32;
  int feat_dim = 64;
  int boundary_head_dim = 16;  // per-head projection width
  double entityness_threshold = 0.5;
  int random_negatives_per_sentence = 1;
  double overlap_type_loss_weight = 0.0;  // 0.2 reproduces the reported experiment
  double overlap_min_iou = 0.5;
  double channel_scale = 1.0;  // 0.25 / 0.5 / 1.0 / 2.0 ablations
  bool disable_boundary_heads = false;  // drop start/end units, losses and concat
  bool disable_max_pool = false;        // first-row feature instead of max pooling
  bool aux_probabilities = false;       // concat softmaxed boundary probs, not raw logits
  bool inject_gold = true;              // add gold spans as guaranteed positives

  int scaled_heads() const { return scaled(n_heads); }
  int scaled_feat() const { return scaled(feat_dim); }
  int scaled_head_dim() const { return scaled(boundary_head_dim); }

 private:
  int scaled(int n) const {
    const int v = static_cast<int>(n * channel_scale + 0.5);
    return v < 1 ? 1 : v;
  }
};

// One judged region with the four training labels.
struct Stage2Example {
  int sentence_index = -1;
  Span span;  // untyped
  bool label_start_correct = false;
  bool label_end_correct = false;
  bool label_is_entity = false;
  int label_type = -1;    // type inventory index, -1 when not an entity
  int overlap_type = -1;  // target of the optional overlap type loss
  std::string source;     // "stage1" | "random" | "gold"
};

struct Stage2Scores {
  std::array<double, 2> start_logits{};
  std::array<double, 2> end_logits{};
  std::array<double, 2> entityness_logits{};
  std::vector<double> type_logits;
  double entityness_prob = 0.0;
  int type = -1;
  double type_prob = 0.0;
};

enum class BoundarySide { Start, End };
enum class SpanHeadKind { Entityness, Type };

// Second-stage model: two multi-head dot-product boundary units, an
// entityness head fed the pooled span feature concatenated with the four
// boundary logits, and a type head of the same shape with separate weights.
class Stage2Model {
 public:
  Stage2Model(int hidden_dim, int n_types, const Stage2Config& cfg, std::uint64_t seed);

  struct Outputs {
    nn::Var start_logits;       // 1x2, invalid when boundary heads disabled
    nn::Var end_logits;         // 1x2, invalid when boundary heads disabled
    nn::Var entityness_logits;  // 1x2
    nn::Var type_logits;        // 1xC
  };

  Outputs forward(nn::Tape& tape, nn::Var encoded, const Sentence& sentence,
                  const Span& span) const;
  Stage2Scores score(const Encoder& encoder, const Sentence& sentence,
                     const Span& span) const;

  // Building blocks, exposed so they can be pinned down in isolation.
  nn::Var boundary_unit(nn::Tape& tape, nn::Var encoded, const Sentence& sentence,
                        const Span& span, BoundarySide side) const;
  nn::Var span_head_from_rows(nn::Tape& tape, nn::Var rows, SpanHeadKind kind,
                              nn::Var aux_logits) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const Stage2Config& config() const { return cfg_; }
  int n_types() const { return n_types_; }

 private:
  struct BoundaryUnit {
    int proj_left, proj_right, w, b;
  };
  struct SpanHead {
    int w1, b1, w2, b2;
  };

  nn::Var unit_logits(nn::Tape& tape, const BoundaryUnit& u, nn::Var left,
                      nn::Var right) const;

  Stage2Config cfg_;
  int n_types_;
  mutable nn::ParamStore params_;
  int bos_embedding_ = -1;
  BoundaryUnit start_unit_{}, end_unit_{};
  SpanHead entityness_head_{}, type_head_{};
};

// Composite loss of the four tasks:
//   L = alpha (L_start + L_end) + beta L_entityness + L_type
// with batch-mean two-class cross-entropies for the three binary tasks and a
// type term that only entities (plus optional overlap targets) contribute to,
// divided by the full batch size.
nn::Var stage2_loss(nn::Tape& tape, const std::vector<Stage2Example>& examples,
                    const std::vector<Stage2Model::Outputs>& outputs,
                    const Stage2Config& cfg);

// Eq. 1 combination alone, for checking the arithmetic.
double combine_losses(double l_start, double l_end, double l_entityness, double l_type,
                      const Stage2Config& cfg);

// Labels for one judged span against the sentence's gold set.
Stage2Example label_example(const Span& span, const Sentence& sentence,
                            const Dataset& dataset);

// Target for the overlap-weighted type loss: the maximally overlapping gold
// span (ties to the leftmost start, then shortest), required to meet the IoU
// threshold; nullopt for exact matches and poor overlaps.
std::optional<std::string> overlap_type_target(const Span& span, const Sentence& sentence,
                                               double min_iou);

// Up to `count` spans of length 1..max_len drawn uniformly (seeded) from the
// spans not already present as candidates or gold regions. Exact-span
// exclusion only; overlap with gold is permitted.
std::vector<Span> sample_random_negatives(const Sentence& sentence,
                                          const std::vector<Span>& existing,
                                          int max_len, int count,
                                          std::mt19937_64& rng);

}  // namespace spanner

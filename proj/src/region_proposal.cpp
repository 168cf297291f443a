#include "spanner/region_proposal.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace spanner {

namespace {
constexpr double kProbClamp = 1e-7;

// Weighted negative log-likelihood over two classes, mean over slots.
nn::Var weighted_ce(nn::Tape& tape, nn::Var logits, const std::vector<bool>& labels,
                    const Stage1Config& cfg) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  std::vector<int> target(labels.size());
  nn::Matrix weights(n, 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    target[i] = labels[i] ? 1 : 0;
    weights(static_cast<Eigen::Index>(i), 0) =
        labels[i] ? cfg.positive_weight : cfg.negative_weight;
  }
  nn::Var probs = tape.clamp(tape.softmax_rows(logits), kProbClamp, 1.0 - kProbClamp);
  nn::Var picked = tape.select_per_row(tape.log(probs), target);
  nn::Var weighted = tape.mul(picked, tape.leaf(std::move(weights)));
  return tape.scale(tape.sum(weighted), -1.0 / static_cast<double>(n));
}
}  // namespace

Stage1Head::Stage1Head(int hidden_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  w_start_ = params_.add("stage1.w_start", nn::glorot_uniform(hidden_dim, 2, rng));
  b_start_ = params_.add("stage1.b_start", nn::Matrix::Zero(1, 2));
  w_end_ = params_.add("stage1.w_end", nn::glorot_uniform(hidden_dim, 2, rng));
  b_end_ = params_.add("stage1.b_end", nn::Matrix::Zero(1, 2));
}

std::vector<int> start_slot_rows(const Sentence& sentence) {
  return sentence.word_starts;
}

std::vector<int> end_slot_rows(const Sentence& sentence) {
  std::vector<int> rows = sentence.word_starts;
  rows.push_back(sentence.n_subtokens());  // sentinel
  return rows;
}

Stage1Head::Logits Stage1Head::score(nn::Tape& tape, nn::Var encoded,
                                     const Sentence& sentence) const {
  nn::Var starts = tape.gather_rows(encoded, start_slot_rows(sentence));
  nn::Var ends = tape.gather_rows(encoded, end_slot_rows(sentence));
  Logits out;
  out.start = tape.add_row(tape.matmul(starts, tape.param(params_, w_start_)),
                           tape.param(params_, b_start_));
  out.end = tape.add_row(tape.matmul(ends, tape.param(params_, w_end_)),
                         tape.param(params_, b_end_));
  return out;
}

BoundaryScores Stage1Head::score_values(const Encoder& encoder,
                                        const Sentence& sentence) const {
  nn::Tape tape;
  nn::Var h = encoder.encode(tape, sentence, /*training=*/false, nullptr);
  Logits logits = score(tape, h, sentence);
  nn::Var sp = tape.softmax_rows(logits.start);
  nn::Var ep = tape.softmax_rows(logits.end);
  BoundaryScores scores;
  const nn::Matrix& s = tape.value(sp);
  const nn::Matrix& e = tape.value(ep);
  for (Eigen::Index r = 0; r < s.rows(); ++r) scores.start_prob.push_back(s(r, 1));
  for (Eigen::Index r = 0; r < e.rows(); ++r) scores.end_prob.push_back(e(r, 1));
  return scores;
}

nn::Var stage1_loss(nn::Tape& tape, const Stage1Head::Logits& logits,
                    const BoundaryLabels& labels, const Stage1Config& cfg) {
  if (static_cast<std::size_t>(tape.value(logits.start).rows()) != labels.start_labels.size() ||
      static_cast<std::size_t>(tape.value(logits.end).rows()) != labels.end_labels.size())
    throw std::invalid_argument("stage1_loss: label/logit lengths disagree");
  nn::Var start_term = weighted_ce(tape, logits.start, labels.start_labels, cfg);
  nn::Var end_term = weighted_ce(tape, logits.end, labels.end_labels, cfg);
  return tape.add(start_term, end_term);
}

std::vector<RegionCandidate> decode_and_pair(const BoundaryScores& scores,
                                             const Stage1Config& cfg) {
  std::vector<RegionCandidate> out;
  for (std::size_t i = 0; i < scores.start_prob.size(); ++i) {
    if (scores.start_prob[i] < cfg.decode_threshold) continue;
    const std::size_t j_max =
        std::min(scores.end_prob.size(), i + 1 + static_cast<std::size_t>(cfg.length_limit));
    for (std::size_t j = i + 1; j < j_max; ++j) {
      if (scores.end_prob[j] < cfg.decode_threshold) continue;
      RegionCandidate c;
      c.span = Span{static_cast<int>(i), static_cast<int>(j), ""};
      c.start_prob = scores.start_prob[i];
      c.end_prob = scores.end_prob[j];
      out.push_back(c);
    }
  }
  return out;
}

RegionMetrics region_metrics(const std::vector<std::vector<RegionCandidate>>& candidates,
                             const Dataset& dataset) {
  if (candidates.size() != dataset.sentences.size())
    throw std::invalid_argument("region_metrics: candidate list and dataset sizes differ");
  RegionMetrics m;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    std::set<std::pair<int, int>> gold_regions;
    for (const auto& g : dataset.sentences[s].gold) gold_regions.insert({g.start, g.end});
    std::set<std::pair<int, int>> cand_regions;
    for (const auto& c : candidates[s]) cand_regions.insert({c.span.start, c.span.end});

    m.total_candidates += cand_regions.size();
    m.total_gold += gold_regions.size();
    for (const auto& r : cand_regions)
      if (gold_regions.count(r)) ++m.matched_candidates;
    for (const auto& r : gold_regions)
      if (cand_regions.count(r)) ++m.matched_gold;
  }
  m.precision = m.total_candidates == 0
                    ? (m.total_gold == 0 ? 1.0 : 0.0)
                    : static_cast<double>(m.matched_candidates) / m.total_candidates;
  m.recall = m.total_gold == 0 ? 1.0
                               : static_cast<double>(m.matched_gold) / m.total_gold;
  return m;
}

}  // namespace spanner

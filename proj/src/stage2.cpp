#include "spanner/stage2.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <stdexcept>

namespace spanner {

namespace {
constexpr double kProbClamp = 1e-7;

// -log of the clamped softmax probability of `target`, as a 1x1 node.
nn::Var ce_row(nn::Tape& tape, nn::Var logits, int target) {
  nn::Var probs = tape.clamp(tape.softmax_rows(logits), kProbClamp, 1.0 - kProbClamp);
  nn::Var picked = tape.select_per_row(tape.log(probs), {target});
  return tape.scale(picked, -1.0);
}

std::vector<int> span_first_subtoken_rows(const Sentence& sentence, const Span& span) {
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(span.length()));
  for (int w = span.start; w < span.end; ++w)
    rows.push_back(sentence.word_starts[static_cast<std::size_t>(w)]);
  return rows;
}
}  // namespace

Stage2Model::Stage2Model(int hidden_dim, int n_types, const Stage2Config& cfg,
                         std::uint64_t seed)
    : cfg_(cfg), n_types_(n_types) {
  if (n_types <= 0) throw std::invalid_argument("Stage2Model needs a non-empty type inventory");
  std::mt19937_64 rng(seed);
  const int d = hidden_dim;
  const int heads = cfg_.scaled_heads();
  const int head_dim = cfg_.scaled_head_dim();
  const int feat = cfg_.scaled_feat();

  bos_embedding_ = params_.add("stage2.bos", nn::uniform_init(1, d, -0.5, 0.5, rng));

  auto make_unit = [&](const std::string& name) {
    BoundaryUnit u;
    u.proj_left = params_.add(name + ".proj_left", nn::glorot_uniform(d, heads * head_dim, rng));
    u.proj_right = params_.add(name + ".proj_right", nn::glorot_uniform(d, heads * head_dim, rng));
    u.w = params_.add(name + ".w", nn::glorot_uniform(heads, 2, rng));
    u.b = params_.add(name + ".b", nn::Matrix::Zero(1, 2));
    return u;
  };
  if (!cfg_.disable_boundary_heads) {
    start_unit_ = make_unit("stage2.start_unit");
    end_unit_ = make_unit("stage2.end_unit");
  }

  auto make_head = [&](const std::string& name, int in_extra, int out) {
    SpanHead h;
    h.w1 = params_.add(name + ".w1", nn::glorot_uniform(d, feat, rng));
    h.b1 = params_.add(name + ".b1", nn::Matrix::Zero(1, feat));
    h.w2 = params_.add(name + ".w2", nn::glorot_uniform(feat + in_extra, out, rng));
    h.b2 = params_.add(name + ".b2", nn::Matrix::Zero(1, out));
    return h;
  };
  const int aux_width = cfg_.disable_boundary_heads ? 0 : 4;
  entityness_head_ = make_head("stage2.entityness", aux_width, 2);
  type_head_ = make_head("stage2.type", 0, n_types_);
}

nn::Var Stage2Model::unit_logits(nn::Tape& tape, const BoundaryUnit& u, nn::Var left,
                                 nn::Var right) const {
  nn::Var lp = tape.matmul(left, tape.param(params_, u.proj_left));
  nn::Var rp = tape.matmul(right, tape.param(params_, u.proj_right));
  nn::Var feat = tape.block_sum_cols(tape.mul(lp, rp), cfg_.scaled_head_dim());
  return tape.add_row(tape.matmul(feat, tape.param(params_, u.w)),
                      tape.param(params_, u.b));
}

nn::Var Stage2Model::boundary_unit(nn::Tape& tape, nn::Var encoded,
                                   const Sentence& sentence, const Span& span,
                                   BoundarySide side) const {
  if (cfg_.disable_boundary_heads)
    throw std::logic_error("boundary heads are disabled by configuration");
  if (span.start < 0 || span.start >= span.end || span.end > sentence.n_words())
    throw std::invalid_argument("boundary_unit: span outside sentence");

  if (side == BoundarySide::Start) {
    nn::Var left = span.start == 0
                       ? tape.param(params_, bos_embedding_)
                       : tape.gather_rows(encoded, {sentence.word_starts[static_cast<std::size_t>(span.start - 1)]});
    nn::Var right =
        tape.gather_rows(encoded, {sentence.word_starts[static_cast<std::size_t>(span.start)]});
    return unit_logits(tape, start_unit_, left, right);
  }
  nn::Var left =
      tape.gather_rows(encoded, {sentence.word_starts[static_cast<std::size_t>(span.end - 1)]});
  const int right_row = span.end == sentence.n_words()
                            ? sentence.n_subtokens()  // sentinel row
                            : sentence.word_starts[static_cast<std::size_t>(span.end)];
  nn::Var right = tape.gather_rows(encoded, {right_row});
  return unit_logits(tape, end_unit_, left, right);
}

nn::Var Stage2Model::span_head_from_rows(nn::Tape& tape, nn::Var rows, SpanHeadKind kind,
                                         nn::Var aux_logits) const {
  const SpanHead& head = kind == SpanHeadKind::Entityness ? entityness_head_ : type_head_;
  nn::Var z = tape.relu(tape.add_row(tape.matmul(rows, tape.param(params_, head.w1)),
                                     tape.param(params_, head.b1)));
  nn::Var pooled = cfg_.disable_max_pool ? tape.gather_rows(z, {0}) : tape.colwise_max(z);
  nn::Var in = pooled;
  if (kind == SpanHeadKind::Entityness && aux_logits.valid())
    in = tape.concat_cols(pooled, aux_logits);
  return tape.add_row(tape.matmul(in, tape.param(params_, head.w2)),
                      tape.param(params_, head.b2));
}

Stage2Model::Outputs Stage2Model::forward(nn::Tape& tape, nn::Var encoded,
                                          const Sentence& sentence, const Span& span) const {
  Outputs out;
  nn::Var aux;
  if (!cfg_.disable_boundary_heads) {
    out.start_logits = boundary_unit(tape, encoded, sentence, span, BoundarySide::Start);
    out.end_logits = boundary_unit(tape, encoded, sentence, span, BoundarySide::End);
    nn::Var s = cfg_.aux_probabilities ? tape.softmax_rows(out.start_logits) : out.start_logits;
    nn::Var e = cfg_.aux_probabilities ? tape.softmax_rows(out.end_logits) : out.end_logits;
    aux = tape.concat_cols(s, e);
  }
  nn::Var rows = tape.gather_rows(encoded, span_first_subtoken_rows(sentence, span));
  out.entityness_logits = span_head_from_rows(tape, rows, SpanHeadKind::Entityness, aux);
  out.type_logits = span_head_from_rows(tape, rows, SpanHeadKind::Type, nn::Var{});
  return out;
}

Stage2Scores Stage2Model::score(const Encoder& encoder, const Sentence& sentence,
                                const Span& span) const {
  nn::Tape tape;
  nn::Var h = encoder.encode(tape, sentence, /*training=*/false, nullptr);
  Outputs out = forward(tape, h, sentence, span);

  Stage2Scores scores;
  if (out.start_logits.valid()) {
    const nn::Matrix& s = tape.value(out.start_logits);
    const nn::Matrix& e = tape.value(out.end_logits);
    scores.start_logits = {s(0, 0), s(0, 1)};
    scores.end_logits = {e(0, 0), e(0, 1)};
  }
  const nn::Matrix& ent = tape.value(out.entityness_logits);
  scores.entityness_logits = {ent(0, 0), ent(0, 1)};
  {
    nn::Tape t2;
    nn::Var p = t2.softmax_rows(t2.leaf(ent));
    scores.entityness_prob = t2.value(p)(0, 1);
  }
  const nn::Matrix& ty = tape.value(out.type_logits);
  scores.type_logits.assign(ty.data(), ty.data() + ty.cols());
  int best = 0;
  for (int c = 1; c < static_cast<int>(ty.cols()); ++c)
    if (ty(0, c) > ty(0, best)) best = c;
  scores.type = best;
  {
    nn::Tape t2;
    nn::Var p = t2.softmax_rows(t2.leaf(ty));
    scores.type_prob = t2.value(p)(0, best);
  }
  return scores;
}

nn::Var stage2_loss(nn::Tape& tape, const std::vector<Stage2Example>& examples,
                    const std::vector<Stage2Model::Outputs>& outputs,
                    const Stage2Config& cfg) {
  if (examples.size() != outputs.size() || examples.empty())
    throw std::invalid_argument("stage2_loss: example/output mismatch or empty batch");
  const double inv_n = 1.0 / static_cast<double>(examples.size());

  nn::Var l_start, l_end, l_ent, l_type;
  auto accumulate = [&tape](nn::Var& acc, nn::Var term) {
    acc = acc.valid() ? tape.add(acc, term) : term;
  };

  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Stage2Example& ex = examples[i];
    const Stage2Model::Outputs& out = outputs[i];
    if (!cfg.disable_boundary_heads) {
      accumulate(l_start, ce_row(tape, out.start_logits, ex.label_start_correct ? 1 : 0));
      accumulate(l_end, ce_row(tape, out.end_logits, ex.label_end_correct ? 1 : 0));
    }
    accumulate(l_ent, ce_row(tape, out.entityness_logits, ex.label_is_entity ? 1 : 0));
    if (ex.label_is_entity) {
      if (ex.label_type < 0)
        throw std::invalid_argument("stage2_loss: entity example without a type label");
      accumulate(l_type, ce_row(tape, out.type_logits, ex.label_type));
    } else if (cfg.overlap_type_loss_weight > 0.0 && ex.overlap_type >= 0) {
      accumulate(l_type, tape.scale(ce_row(tape, out.type_logits, ex.overlap_type),
                                    cfg.overlap_type_loss_weight));
    }
  }

  nn::Var total;
  if (l_start.valid()) {
    nn::Var boundary = tape.scale(tape.add(l_start, l_end), cfg.alpha * inv_n);
    total = boundary;
  }
  nn::Var ent_term = tape.scale(l_ent, cfg.beta * inv_n);
  total = total.valid() ? tape.add(total, ent_term) : ent_term;
  if (l_type.valid()) total = tape.add(total, tape.scale(l_type, inv_n));
  return total;
}

double combine_losses(double l_start, double l_end, double l_entityness, double l_type,
                      const Stage2Config& cfg) {
  return cfg.alpha * (l_start + l_end) + cfg.beta * l_entityness + l_type;
}

Stage2Example label_example(const Span& span, const Sentence& sentence,
                            const Dataset& dataset) {
  Stage2Example ex;
  ex.span = Span{span.start, span.end, ""};
  for (const auto& g : sentence.gold) {
    if (g.start == span.start) ex.label_start_correct = true;
    if (g.end == span.end) ex.label_end_correct = true;
    if (g.same_region(span)) {
      ex.label_is_entity = true;
      ex.label_type = dataset.type_index(g.type);
    }
  }
  return ex;
}

std::optional<std::string> overlap_type_target(const Span& span, const Sentence& sentence,
                                               double min_iou) {
  const Span* best = nullptr;
  int best_inter = 0;
  for (const auto& g : sentence.gold) {
    const int inter = span.intersection(g);
    if (inter == 0) continue;
    if (best == nullptr || inter > best_inter ||
        (inter == best_inter && std::tie(g.start, g.end) < std::tie(best->start, best->end))) {
      best = &g;
      best_inter = inter;
    }
  }
  if (best == nullptr) return std::nullopt;
  if (best->same_region(span)) return std::nullopt;  // exact matches use the full loss
  if (span.iou(*best) < min_iou) return std::nullopt;
  return best->type;
}

std::vector<Span> sample_random_negatives(const Sentence& sentence,
                                          const std::vector<Span>& existing,
                                          int max_len, int count,
                                          std::mt19937_64& rng) {
  std::set<std::pair<int, int>> taken;
  for (const auto& sp : existing) taken.insert({sp.start, sp.end});
  std::vector<Span> allowed;
  const int n = sentence.n_words();
  for (int s = 0; s < n; ++s) {
    for (int e = s + 1; e <= n && e - s <= max_len; ++e) {
      if (!taken.count({s, e})) allowed.push_back(Span{s, e, ""});
    }
  }
  std::vector<Span> out;
  for (int k = 0; k < count && !allowed.empty(); ++k) {
    const std::size_t pick = static_cast<std::size_t>(rng() % allowed.size());
    out.push_back(allowed[pick]);
    allowed.erase(allowed.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

}  // namespace spanner

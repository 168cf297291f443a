#include "spanner/encoder.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace spanner {

Vocab::Vocab() {
  add("<unk>");
  add("<eos>");
}

Vocab Vocab::build(const Dataset& dataset) {
  Vocab v;
  for (const auto& s : dataset.sentences)
    for (const auto& tok : s.subtokens) v.add(tok);
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

int Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

nn::Matrix Encoder::encode_values(const Sentence& sentence) const {
  nn::Tape tape;
  nn::Var h = encode(tape, sentence, /*training=*/false, nullptr);
  return tape.value(h);
}

ToyEncoder::ToyEncoder(EncoderConfig cfg, Vocab vocab, std::uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  std::mt19937_64 rng(seed);
  const int d = cfg_.hidden_dim;
  embedding_ = params_.add("encoder.embedding",
                           nn::uniform_init(vocab_.size(), d, -0.5, 0.5, rng));
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    Layer layer;
    layer.wq = params_.add(p + "wq", nn::glorot_uniform(d, d, rng));
    layer.wk = params_.add(p + "wk", nn::glorot_uniform(d, d, rng));
    layer.wv = params_.add(p + "wv", nn::glorot_uniform(d, d, rng));
    layer.wf = params_.add(p + "wf", nn::glorot_uniform(d, d, rng));
    layer.bf = params_.add(p + "bf", nn::Matrix::Zero(1, d));
    layers_.push_back(layer);
  }
}

nn::Var ToyEncoder::encode(nn::Tape& tape, const Sentence& sentence, bool training,
                           std::mt19937_64* dropout_rng) const {
  if (sentence.n_subtokens() > cfg_.max_subtokens)
    throw std::invalid_argument("sentence exceeds encoder limit of " +
                                std::to_string(cfg_.max_subtokens) + " subtokens");
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(sentence.n_subtokens()) + 1);
  for (const auto& tok : sentence.subtokens) ids.push_back(vocab_.id(tok));
  ids.push_back(Vocab::kEos);  // sentinel row, transformed like any token

  auto maybe_dropout = [&](nn::Var x) {
    if (!training || cfg_.dropout <= 0.0 || dropout_rng == nullptr) return x;
    std::bernoulli_distribution keep(1.0 - cfg_.dropout);
    const nn::Matrix& v = tape.value(x);
    nn::Matrix mask(v.rows(), v.cols());
    const double scale = 1.0 / (1.0 - cfg_.dropout);
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c)
        mask(r, c) = keep(*dropout_rng) ? scale : 0.0;
    return tape.mul(x, tape.leaf(std::move(mask)));
  };

  nn::Var emb = cfg_.trainable ? tape.param(params_, embedding_)
                               : tape.leaf(params_.value(embedding_));
  nn::Var x = maybe_dropout(tape.gather_rows(emb, ids));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim));

  auto weight = [&](int id) {
    return cfg_.trainable ? tape.param(params_, id) : tape.leaf(params_.value(id));
  };
  for (const auto& layer : layers_) {
    nn::Var q = tape.matmul(x, weight(layer.wq));
    nn::Var k = tape.matmul(x, weight(layer.wk));
    nn::Var v = tape.matmul(x, weight(layer.wv));
    nn::Var attn = tape.softmax_rows(tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_d));
    x = tape.add(x, tape.matmul(attn, v));
    nn::Var ff = tape.tanh(tape.add_row(tape.matmul(x, weight(layer.wf)), weight(layer.bf)));
    x = maybe_dropout(tape.add(x, ff));
  }
  return x;
}

PrecomputedEncoder::PrecomputedEncoder(const std::string& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) throw std::runtime_error("cannot open precomputed encoder file: " + jsonl_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    const auto tokens = rec.at("tokens").get<std::vector<std::string>>();
    const auto rows = rec.at("hidden").get<std::vector<std::vector<double>>>();
    if (rows.empty())
      throw std::runtime_error("precomputed record " + std::to_string(line_no) +
                               " has no hidden rows");
    nn::Matrix m(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size())
        throw std::runtime_error("precomputed record " + std::to_string(line_no) +
                                 " has ragged hidden rows");
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    if (hidden_dim_ == 0) hidden_dim_ = static_cast<int>(m.cols());
    if (m.cols() != hidden_dim_)
      throw std::runtime_error("precomputed hidden dims disagree across records");
    std::string key;
    for (const auto& t : tokens) {
      key += t;
      key += '\x1f';
    }
    hidden_[key] = std::move(m);
  }
}

std::string PrecomputedEncoder::key_of(const Sentence& sentence) {
  std::string key;
  for (const auto& w : sentence.words) {
    key += w;
    key += '\x1f';
  }
  return key;
}

nn::Var PrecomputedEncoder::encode(nn::Tape& tape, const Sentence& sentence, bool,
                                   std::mt19937_64*) const {
  auto it = hidden_.find(key_of(sentence));
  if (it == hidden_.end())
    throw std::runtime_error("no precomputed hidden states for sentence");
  if (it->second.rows() != sentence.n_subtokens() + 1)
    throw std::runtime_error("precomputed hidden states have wrong row count");
  return tape.leaf(it->second);
}

}  // namespace spanner

#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "spanner/nn.hpp"
#include "spanner/span.hpp"

namespace spanner {

struct EncoderConfig {
  int hidden_dim = 32;
  int n_layers = 2;
  double dropout = 0.1;
  int max_subtokens = 128;
  bool trainable = true;
};

// Subtoken vocabulary built from the training corpus. Id 0 is <unk>,
// id 1 the <eos> sentinel token appended to every sentence.
class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kEos = 1;

  Vocab();
  static Vocab build(const Dataset& dataset);

  int id(const std::string& token) const;
  int add(const std::string& token);
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

// Contextual embedding contract shared by both stages: one hidden row per
// subtoken plus an appended sentinel row (aligned with the end-label
// sentinel slot).
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual nn::Var encode(nn::Tape& tape, const Sentence& sentence, bool training,
                         std::mt19937_64* dropout_rng) const = 0;
  virtual int hidden_dim() const = 0;
  virtual nn::ParamStore& params() = 0;
  virtual const nn::ParamStore& params() const = 0;

  nn::Matrix encode_values(const Sentence& sentence) const;
};

// Learned token embedding plus two blocks of self-attention mixing with a
// tanh feed-forward residual. Small enough to overfit a toy corpus in
// minutes while still exercising subword masking and context mixing.
class ToyEncoder : public Encoder {
 public:
  ToyEncoder(EncoderConfig cfg, Vocab vocab, std::uint64_t seed);

  nn::Var encode(nn::Tape& tape, const Sentence& sentence, bool training,
                 std::mt19937_64* dropout_rng) const override;
  int hidden_dim() const override { return cfg_.hidden_dim; }
  nn::ParamStore& params() override { return params_; }
  const nn::ParamStore& params() const override { return params_; }

  const Vocab& vocab() const { return vocab_; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Layer {
    int wq, wk, wv, wf, bf;
  };

  EncoderConfig cfg_;
  Vocab vocab_;
  mutable nn::ParamStore params_;
  int embedding_ = -1;
  std::vector<Layer> layers_;
};

// Adapter for hidden states produced offline by an external pretrained
// encoder. Matrices are keyed by the sentence's word sequence and must
// already include the sentinel row. Never trainable.
class PrecomputedEncoder : public Encoder {
 public:
  explicit PrecomputedEncoder(const std::string& jsonl_path);

  nn::Var encode(nn::Tape& tape, const Sentence& sentence, bool training,
                 std::mt19937_64* dropout_rng) const override;
  int hidden_dim() const override { return hidden_dim_; }
  nn::ParamStore& params() override { return params_; }
  const nn::ParamStore& params() const override { return params_; }

 private:
  static std::string key_of(const Sentence& sentence);

  std::map<std::string, nn::Matrix> hidden_;
  int hidden_dim_ = 0;
  nn::ParamStore params_;  // stays empty
};

}  // namespace spanner

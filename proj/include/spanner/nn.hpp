#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace spanner::nn {

using Matrix = Eigen::MatrixXd;

// Named parameter storage. Models register their weights here; a Tape binds
// them as leaves for one forward/backward pass and flushes gradients back.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
  };

  int add(const std::string& name, Matrix init);
  void zero_grad();

  Entry& entry(int id) { return entries_.at(id); }
  const Entry& entry(int id) const { return entries_.at(id); }
  Matrix& value(int id) { return entries_.at(id).value; }
  const Matrix& value(int id) const { return entries_.at(id).value; }
  const Matrix& grad(int id) const { return entries_.at(id).grad; }
  std::size_t size() const { return entries_.size(); }
  double grad_norm() const;

 private:
  std::vector<Entry> entries_;
};

// AdamW with decoupled weight decay.
struct AdamWConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}
  void step(ParamStore& store);
  int steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  int t_ = 0;
};

// Handle into a Tape. Invalid (idx -1) until assigned.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode autodiff tape over dense double matrices. Nodes are created
// eagerly (forward value computed at build time); backward() walks the tape
// in reverse. Row vectors are 1xC matrices.
class Tape {
 public:
  Var leaf(Matrix value);
  Var param(ParamStore& store, int param_id);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var add_row(Var a, Var bias);  // bias 1xC broadcast over rows of a
  Var mul(Var a, Var b);         // elementwise
  Var scale(Var a, double s);
  Var relu(Var a);
  Var tanh(Var a);
  Var softmax_rows(Var a);
  Var clamp(Var a, double lo, double hi);
  Var log(Var a);
  Var sum(Var a);  // 1x1
  Var gather_rows(Var a, std::vector<int> rows);
  Var select_per_row(Var a, std::vector<int> col_of_row);  // nx1
  Var concat_cols(Var a, Var b);
  Var colwise_max(Var a);                 // 1xC, grad routed to first argmax
  Var block_sum_cols(Var a, int block);   // 1x(H*k) -> 1xH

  const Matrix& value(Var v) const { return nodes_.at(v.idx).val; }
  double value_scalar(Var v) const;
  const Matrix& grad(Var v) const { return nodes_.at(v.idx).grad; }

  void backward(Var loss);
  void flush_param_grads();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Var emit(Matrix value, std::function<void(Tape&)> back);
  Matrix& grad_mut(Var v) { return nodes_.at(v.idx).grad; }

  std::vector<Node> nodes_;
  struct ParamBinding {
    ParamStore* store;
    int param_id;
    int node_idx;
  };
  std::vector<ParamBinding> bindings_;
};

// Seeded initializers.
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                    std::mt19937_64& rng);

}  // namespace spanner::nn

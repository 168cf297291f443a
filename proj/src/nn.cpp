#include "spanner/nn.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace spanner::nn {

int ParamStore::add(const std::string& name, Matrix init) {
  Entry e;
  e.name = name;
  e.grad = Matrix::Zero(init.rows(), init.cols());
  e.adam_m = Matrix::Zero(init.rows(), init.cols());
  e.adam_v = Matrix::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) sq += e.grad.squaredNorm();
  return std::sqrt(sq);
}

void AdamW::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(static_cast<int>(i));
    e.adam_m = cfg_.beta1 * e.adam_m + (1.0 - cfg_.beta1) * e.grad;
    e.adam_v = cfg_.beta2 * e.adam_v.array().matrix() +
               (1.0 - cfg_.beta2) * e.grad.array().square().matrix();
    const Matrix m_hat = e.adam_m / bc1;
    const Matrix v_hat = e.adam_v / bc2;
    e.value -= cfg_.lr * (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
    if (cfg_.weight_decay > 0.0) {
      e.value -= cfg_.lr * cfg_.weight_decay * e.value;
    }
  }
}

Var Tape::emit(Matrix value, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.val = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) { return emit(std::move(value), nullptr); }

Var Tape::param(ParamStore& store, int param_id) {
  for (const auto& b : bindings_) {
    if (b.store == &store && b.param_id == param_id) return Var{b.node_idx};
  }
  Var v = leaf(store.value(param_id));
  bindings_.push_back(ParamBinding{&store, param_id, v.idx});
  return v;
}

Var Tape::matmul(Var a, Var b) {
  Matrix out = value(a) * value(b);
  return emit(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_mut(a) += g * t.value(b).transpose();
    t.grad_mut(b) += t.value(a).transpose() * g;
  });
}

Var Tape::transpose(Var a) {
  Matrix out = value(a).transpose();
  return emit(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    t.grad_mut(a) += t.nodes_[self].grad.transpose();
  });
}

Var Tape::add(Var a, Var b) {
  Matrix out = value(a) + value(b);
  return emit(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_mut(a) += g;
    t.grad_mut(b) += g;
  });
}

Var Tape::add_row(Var a, Var bias) {
  assert(value(bias).rows() == 1);
  Matrix out = value(a).rowwise() + value(bias).row(0);
  return emit(std::move(out), [a, bias, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_mut(a) += g;
    t.grad_mut(bias).row(0) += g.colwise().sum();
  });
}

Var Tape::mul(Var a, Var b) {
  Matrix out = value(a).cwiseProduct(value(b));
  return emit(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_mut(a) += g.cwiseProduct(t.value(b));
    t.grad_mut(b) += g.cwiseProduct(t.value(a));
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a) * s;
  return emit(std::move(out), [a, s, self = static_cast<int>(nodes_.size())](Tape& t) {
    t.grad_mut(a) += t.nodes_[self].grad * s;
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a).cwiseMax(0.0);
  return emit(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_mut(a) += (t.value(a).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a).array().tanh().matrix();
  return emit(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& y = t.nodes_[self].val;
    t.grad_mut(a) += (1.0 - y.array().square()).matrix().cwiseProduct(g);
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::ArrayXd e = (x.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return emit(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& y = t.nodes_[self].val;
    Matrix& ga = t.grad_mut(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r) += (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Matrix out = value(a).cwiseMax(lo).cwiseMin(hi);
  return emit(std::move(out), [a, lo, hi, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const auto& x = t.value(a).array();
    Matrix pass = ((x >= lo) && (x <= hi)).cast<double>().matrix();
    t.grad_mut(a) += pass.cwiseProduct(g);
  });
}

Var Tape::log(Var a) {
  Matrix out = value(a).array().log().matrix();
  return emit(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_mut(a) += g.cwiseQuotient(t.value(a));
  });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return emit(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    t.grad_mut(a).array() += g;
  });
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Matrix& x = value(a);
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return emit(std::move(out),
              [a, rows = std::move(rows), self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[self].grad;
                Matrix& ga = t.grad_mut(a);
                for (std::size_t i = 0; i < rows.size(); ++i)
                  ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
              });
}

Var Tape::select_per_row(Var a, std::vector<int> col_of_row) {
  const Matrix& x = value(a);
  assert(static_cast<std::size_t>(x.rows()) == col_of_row.size());
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, 0) = x(r, col_of_row[r]);
  return emit(std::move(out),
              [a, cols = std::move(col_of_row), self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[self].grad;
                Matrix& ga = t.grad_mut(a);
                for (Eigen::Index r = 0; r < g.rows(); ++r) ga(r, cols[r]) += g(r, 0);
              });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  assert(x.rows() == y.rows());
  Matrix out(x.rows(), x.cols() + y.cols());
  out << x, y;
  return emit(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Eigen::Index ca = t.value(a).cols();
    t.grad_mut(a) += g.leftCols(ca);
    t.grad_mut(b) += g.rightCols(g.cols() - ca);
  });
}

Var Tape::colwise_max(Var a) {
  const Matrix& x = value(a);
  Matrix out(1, x.cols());
  std::vector<int> argmax(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < x.rows(); ++r)
      if (x(r, c) > x(best, c)) best = r;
    argmax[static_cast<std::size_t>(c)] = static_cast<int>(best);
    out(0, c) = x(best, c);
  }
  return emit(std::move(out),
              [a, argmax = std::move(argmax), self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[self].grad;
                Matrix& ga = t.grad_mut(a);
                for (Eigen::Index c = 0; c < g.cols(); ++c)
                  ga(argmax[static_cast<std::size_t>(c)], c) += g(0, c);
              });
}

Var Tape::block_sum_cols(Var a, int block) {
  const Matrix& x = value(a);
  if (block <= 0 || x.cols() % block != 0)
    throw std::invalid_argument("block_sum_cols: column count not divisible by block");
  const Eigen::Index groups = x.cols() / block;
  Matrix out = Matrix::Zero(x.rows(), groups);
  for (Eigen::Index g = 0; g < groups; ++g)
    out.col(g) = x.middleCols(g * block, block).rowwise().sum();
  return emit(std::move(out), [a, block, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_mut(a);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      ga.middleCols(c * block, block).colwise() += g.col(c);
  });
}

double Tape::value_scalar(Var v) const {
  const Matrix& m = value(v);
  assert(m.rows() == 1 && m.cols() == 1);
  return m(0, 0);
}

void Tape::backward(Var loss) {
  Matrix& g = grad_mut(loss);
  if (g.rows() != 1 || g.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 node");
  g(0, 0) = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    if (nodes_[static_cast<std::size_t>(i)].back)
      nodes_[static_cast<std::size_t>(i)].back(*this);
  }
}

void Tape::flush_param_grads() {
  for (const auto& b : bindings_) {
    b.store->entry(b.param_id).grad += nodes_[static_cast<std::size_t>(b.node_idx)].grad;
  }
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_init(rows, cols, -a, a, rng);
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace spanner::nn

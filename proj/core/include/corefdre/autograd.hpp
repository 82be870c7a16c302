// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass. Each recorded node owns
// its value and (after backward) its gradient. Parameters live outside the
// tape and receive accumulated gradients when backward() finishes, so a tape
// is cheap to create per document and discard afterwards.
//
// All values are float64; row vectors are 1 x d matrices and batches are
// stacked as rows.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace corefdre {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Parameter;
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  // A tape created with record=false computes values only; backward() is
  // unavailable. Used for evaluation.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  // Records a node computed from `inputs`. `backward` is kept only if some
  // input requires a gradient.
  Var push(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var push(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to parameters.
  void backward(Var root);

  void accumulate(const Var& v, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(const Var& v, const Expr& g) {
    Node& n = nodes_[static_cast<size_t>(v.id())];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad.array() += g.array();
    }
  }

  // Adds g into the block of v's gradient starting at (row, col).
  template <typename Expr>
  void accumulate_block(const Var& v, Eigen::Index row, Eigen::Index col, const Expr& g) {
    Node& n = nodes_[static_cast<size_t>(v.id())];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.block(row, col, g.rows(), g.cols()) += g;
  }
  // Adds g.row(i) into row rows[i] of v's gradient.
  void scatter_rows(const Var& v, std::span<const int> rows, const Matrix& g);

  bool requires_grad(const Var& v) const { return nodes_[static_cast<size_t>(v.id())].requires_grad; }
  bool recording() const { return record_; }
  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool record_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var add_row(Var a, Var row);  // broadcasts a 1 x d row over every row of a
Var scale(Var a, double s);
Var mul_const(Var a, const Matrix& mask);  // elementwise by a constant
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var abs(Var a);
Var square(Var a);

Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::span<const int> rows);
Var repeat_rows(Var row, Eigen::Index n);

Var mean_rows(Var a);  // -> 1 x d
Var sum(Var a);        // -> 1 x 1
Var row_sum(Var a);    // -> n x 1

// Constant sparse operator applied on the left: A * x.
Var spmm(const SparseMatrix& a, Var x);

// Softmax within groups of a column vector; segment[i] names the group of row
// i. Groups need not be contiguous.
Var segment_softmax(Var scores, std::span<const int> segment);
// out.row(i) = weights(i) * a.row(i); weights is n x 1.
Var scale_rows(Var a, Var weights);

// Sum of binary cross-entropy terms between probabilities and 0/1 targets.
// Probabilities are clamped to [eps, 1 - eps] before the logarithm.
Var bce_sum(Var probs, const Matrix& targets, double eps);

// Inverted dropout: zeroes each entry with probability `rate` and rescales the
// survivors. `uniform01` yields numbers in [0, 1).
Var dropout(Var a, double rate, const std::function<double()>& uniform01);

}  // namespace corefdre

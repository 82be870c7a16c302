#include "corefdre/autograd.hpp"

#include "corefdre/parameters.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace corefdre {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value();
  n.param = &p;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : inputs) {
      assert(v.tape() == this);
      if (nodes_[static_cast<size_t>(v.id())].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) { accumulate_expr(v, g); }

void Tape::scatter_rows(const Var& v, std::span<const int> rows, const Matrix& g) {
  Node& n = nodes_[static_cast<size_t>(v.id())];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  for (size_t i = 0; i < rows.size(); ++i) n.grad.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
}

void Tape::backward(Var root) {
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward() root must be 1x1");
  Node& r = nodes_[static_cast<size_t>(root.id())];
  if (!r.requires_grad) return;
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.size() == 0) continue;
    // Callbacks only write to earlier nodes, so n.grad stays put.
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad() += n.grad;
  }
}

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate_expr(a, g * b.value().transpose());
    if (tp.requires_grad(b)) tp.accumulate_expr(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  return t.push(a.value().transpose(), {a}, [a](Tape& tp, const Matrix& g) { tp.accumulate_expr(a, g.transpose()); });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("add: shape mismatch");
  return t.push(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("sub: shape mismatch");
  return t.push(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate_expr(b, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("mul: shape mismatch");
  return t.push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate_expr(a, g.cwiseProduct(b.value()));
    if (tp.requires_grad(b)) tp.accumulate_expr(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(Var a, Var row) {
  Tape& t = *a.tape();
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), {a, row}, [a, row](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(row)) tp.accumulate_expr(row, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.push(a.value() * s, {a}, [a, s](Tape& tp, const Matrix& g) { tp.accumulate_expr(a, g * s); });
}

Var mul_const(Var a, const Matrix& mask) {
  Tape& t = *a.tape();
  if (a.rows() != mask.rows() || a.cols() != mask.cols()) throw std::invalid_argument("mul_const: shape mismatch");
  return t.push(a.value().cwiseProduct(mask), {a},
                [a, mask](Tape& tp, const Matrix& g) { tp.accumulate_expr(a, g.cwiseProduct(mask)); });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().cwiseMax(0.0);
  return t.push(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate_expr(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return t.push(out, {a}, [a, out](Tape& tp, const Matrix& g) {
    tp.accumulate_expr(a, g.array() * out.array() * (1.0 - out.array()));
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().tanh().matrix();
  return t.push(out, {a}, [a, out](Tape& tp, const Matrix& g) {
    tp.accumulate_expr(a, g.array() * (1.0 - out.array().square()));
  });
}

Var abs(Var a) {
  Tape& t = *a.tape();
  return t.push(a.value().cwiseAbs(), {a}, [a](Tape& tp, const Matrix& g) {
    Matrix sign = a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    tp.accumulate_expr(a, g.cwiseProduct(sign));
  });
}

Var square(Var a) {
  Tape& t = *a.tape();
  return t.push(a.value().array().square().matrix(), {a},
                [a](Tape& tp, const Matrix& g) { tp.accumulate_expr(a, 2.0 * g.cwiseProduct(a.value())); });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [inputs](Tape& tp, const Matrix& g) {
    Eigen::Index offset = 0;
    for (const Var& p : inputs) {
      tp.accumulate_block(p, 0, 0, g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [inputs](Tape& tp, const Matrix& g) {
    Eigen::Index offset = 0;
    for (const Var& p : inputs) {
      tp.accumulate_block(p, 0, 0, g.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows: out of range");
  return t.push(a.value().middleRows(start, count), {a},
                [a, start](Tape& tp, const Matrix& g) { tp.accumulate_block(a, start, 0, g); });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols: out of range");
  return t.push(a.value().middleCols(start, count), {a},
                [a, start](Tape& tp, const Matrix& g) { tp.accumulate_block(a, 0, start, g); });
}

Var gather_rows(Var a, std::span<const int> rows) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return t.push(std::move(out), {a},
                [a, idx = std::move(idx)](Tape& tp, const Matrix& g) { tp.scatter_rows(a, idx, g); });
}

Var repeat_rows(Var row, Eigen::Index n) {
  Tape& t = *row.tape();
  if (row.rows() != 1) throw std::invalid_argument("repeat_rows: expects a row vector");
  Matrix out = row.value().replicate(n, 1);
  return t.push(std::move(out), {row},
                [row](Tape& tp, const Matrix& g) { tp.accumulate_expr(row, g.colwise().sum()); });
}

Var mean_rows(Var a) {
  Tape& t = *a.tape();
  if (a.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return t.push(std::move(out), {a}, [a, inv](Tape& tp, const Matrix& g) {
    tp.accumulate_expr(a, g.replicate(a.rows(), 1) * inv);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate_expr(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var row_sum(Var a) {
  Tape& t = *a.tape();
  return t.push(a.value().rowwise().sum(), {a},
                [a](Tape& tp, const Matrix& g) { tp.accumulate_expr(a, g.replicate(1, a.cols())); });
}

Var spmm(const SparseMatrix& a, Var x) {
  Tape& t = *x.tape();
  if (a.cols() != x.rows()) throw std::invalid_argument("spmm: inner dimensions differ");
  Matrix out = a * x.value();
  return t.push(std::move(out), {x}, [a, x](Tape& tp, const Matrix& g) {
    tp.accumulate_expr(x, a.transpose() * g);
  });
}

Var segment_softmax(Var scores, std::span<const int> segment) {
  Tape& t = *scores.tape();
  if (scores.cols() != 1 || static_cast<size_t>(scores.rows()) != segment.size())
    throw std::invalid_argument("segment_softmax: expects an n x 1 column matching the segment ids");
  const Matrix& s = scores.value();
  std::unordered_map<int, double> max_of;
  for (size_t i = 0; i < segment.size(); ++i) {
    auto [it, inserted] = max_of.emplace(segment[i], s(static_cast<Eigen::Index>(i), 0));
    if (!inserted) it->second = std::max(it->second, s(static_cast<Eigen::Index>(i), 0));
  }
  Matrix out(s.rows(), 1);
  std::unordered_map<int, double> denom;
  for (size_t i = 0; i < segment.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out(r, 0) = std::exp(s(r, 0) - max_of[segment[i]]);
    denom[segment[i]] += out(r, 0);
  }
  for (size_t i = 0; i < segment.size(); ++i) out(static_cast<Eigen::Index>(i), 0) /= denom[segment[i]];
  std::vector<int> seg(segment.begin(), segment.end());
  return t.push(out, {scores}, [scores, out, seg = std::move(seg)](Tape& tp, const Matrix& g) {
    std::unordered_map<int, double> dot;
    for (size_t i = 0; i < seg.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      dot[seg[i]] += g(r, 0) * out(r, 0);
    }
    Matrix ds(out.rows(), 1);
    for (size_t i = 0; i < seg.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      ds(r, 0) = out(r, 0) * (g(r, 0) - dot[seg[i]]);
    }
    tp.accumulate(scores, ds);
  });
}

Var scale_rows(Var a, Var weights) {
  Tape& t = *a.tape();
  if (weights.cols() != 1 || weights.rows() != a.rows()) throw std::invalid_argument("scale_rows: shape mismatch");
  Matrix out = a.value().array().colwise() * weights.value().col(0).array();
  return t.push(std::move(out), {a, weights}, [a, weights](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate_expr(a, (g.array().colwise() * weights.value().col(0).array()).matrix());
    if (tp.requires_grad(weights)) tp.accumulate_expr(weights, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var bce_sum(Var probs, const Matrix& targets, double eps) {
  Tape& t = *probs.tape();
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
    throw std::invalid_argument("bce_sum: shape mismatch");
  const Matrix& p = probs.value();
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double q = std::clamp(p(i, j), eps, 1.0 - eps);
      const double y = targets(i, j);
      total -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  return t.push(std::move(out), {probs}, [probs, targets, eps](Tape& tp, const Matrix& g) {
    const Matrix& pv = probs.value();
    Matrix d(pv.rows(), pv.cols());
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      for (Eigen::Index j = 0; j < pv.cols(); ++j) {
        const double q = pv(i, j);
        if (q < eps || q > 1.0 - eps) {
          d(i, j) = 0.0;  // clamped region is flat
        } else {
          const double y = targets(i, j);
          d(i, j) = -y / q + (1.0 - y) / (1.0 - q);
        }
      }
    }
    tp.accumulate_expr(probs, d * g(0, 0));
  });
}

Var dropout(Var a, double rate, const std::function<double()>& uniform01) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) return mul_const(a, Matrix::Zero(a.rows(), a.cols()));
  Matrix mask(a.rows(), a.cols());
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01() < keep ? 1.0 / keep : 0.0;
  return mul_const(a, mask);
}

}  // namespace corefdre

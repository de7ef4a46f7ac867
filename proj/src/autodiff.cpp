#include "hhgr/autodiff.hpp"

#include <cmath>

#include "hhgr/error.hpp"

namespace hhgr::ad {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string("autodiff: ") + op + " shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

// ---------------------------------------------------------------------------

Var Tape::constant(Matrix value, std::string label) {
  return push(std::move(value), std::move(label), {}, nullptr);
}

Var Tape::parameter(Matrix value, std::string label) {
  Var v = push(std::move(value), std::move(label), {}, nullptr);
  nodes_[v.index].requires_grad = true;
  return v;
}

double Tape::scalar(Var v) const {
  const auto& m = value(v);
  if (m.size() != 1) throw ContractError("autodiff: '" + label(v) + "' is not a scalar (" + shape(m) + ")");
  return m(0, 0);
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[v.index];
  if (node.has_grad) return node.grad;
  return Matrix::Zero(node.value.rows(), node.value.cols());
}

Var Tape::push(Matrix value, std::string label, std::initializer_list<Var> parents, Backward backward) {
  if (!value.allFinite()) throw NumericalError("autodiff: non-finite value produced by '" + label + "'");
  Node node;
  node.value = std::move(value);
  node.label = std::move(label);
  for (Var p : parents) node.requires_grad = node.requires_grad || nodes_[p.index].requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& node = nodes_[v.index];
  if (!node.requires_grad) return;
  if (node.has_grad) {
    node.grad += g;
  } else {
    node.grad = g;
    node.has_grad = true;
  }
}

void Tape::backward(Var output) {
  if (value(output).size() != 1) throw ContractError("autodiff: backward needs a scalar output");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(output, Matrix::Ones(1, 1));
  for (std::size_t i = output.index + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    if (!node.grad.allFinite()) {
      throw NumericalError("autodiff: non-finite gradient at '" + node.label + "'");
    }
    // Callbacks only accumulate into parents (lower indices), so these
    // references stay valid while they run.
    node.backward(*this, node.grad, node.value);
  }
}

// ---------------------------------------------------------------------------
// Dense algebra

Var matmul(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols() != bv.rows()) {
    throw ContractError("autodiff: matmul " + shape(av) + " by " + shape(bv));
  }
  return t.push(av * bv, "matmul", {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  return t.push(t.value(a) + t.value(b), "add", {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "sub");
  return t.push(t.value(a) - t.value(b), "sub", {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var scale(Tape& t, Var a, double c) {
  return t.push(c * t.value(a), "scale", {a}, [a, c](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, c * g); });
}

Var add_scalar(Tape& t, Var a, double c) {
  Matrix out = t.value(a).array() + c;
  return t.push(std::move(out), "add_scalar", {a}, [a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g); });
}

Var square(Tape& t, Var a) {
  Matrix out = t.value(a).array().square();
  return t.push(std::move(out), "square", {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, (2.0 * t.value(a).array() * g.array()).matrix());
  });
}

Var sum(Tape& t, Var a) {
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.push(std::move(out), "sum", {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    const auto& av = t.value(a);
    t.accumulate(a, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var sigmoid(Tape& t, Var a) {
  Matrix out = t.value(a).unaryExpr([](double x) { return stable_sigmoid(x); });
  return t.push(std::move(out), "sigmoid", {a}, [a](Tape& t, const Matrix& g, const Matrix& s) {
    t.accumulate(a, (g.array() * s.array() * (1.0 - s.array())).matrix());
  });
}

Var log_sigmoid(Tape& t, Var a) {
  Matrix out = t.value(a).unaryExpr([](double x) { return stable_log_sigmoid(x); });
  return t.push(std::move(out), "log_sigmoid", {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    // d/dx log sigmoid(x) = sigmoid(-x)
    Matrix d = t.value(a).unaryExpr([](double x) { return stable_sigmoid(-x); });
    t.accumulate(a, (g.array() * d.array()).matrix());
  });
}

// ---------------------------------------------------------------------------
// Sparse structure

Var propagate(Tape& t, const PropagationOperator& op, Var x) {
  return t.push(op.apply(t.value(x)), "propagate", {x},
                [&op, x](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, op.apply_transposed(g)); });
}

Var sparse_matmul(Tape& t, const SparseMatrix& s, Var x) {
  const auto& xv = t.value(x);
  if (s.cols() != xv.rows()) {
    throw ContractError("autodiff: sparse_matmul " + std::to_string(s.rows()) + "x" +
                        std::to_string(s.cols()) + " by " + shape(xv));
  }
  return t.push(Matrix(s * xv), "sparse_matmul", {x},
                [&s, x](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, Matrix(s.transpose() * g)); });
}

Var gather_rows(Tape& t, Var x, std::vector<Id> rows) {
  const auto& xv = t.value(x);
  Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= xv.rows()) {
      throw ContractError("autodiff: gather row " + std::to_string(rows[k]) + " of " + shape(xv));
    }
    out.row(static_cast<Eigen::Index>(k)) = xv.row(rows[k]);
  }
  return t.push(std::move(out), "gather_rows", {x}, [x, rows = std::move(rows)](Tape& t, const Matrix& g, const Matrix&) {
    const auto& xv = t.value(x);
    Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) dx.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(x, dx);
  });
}

Var rowwise_dot(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "rowwise_dot");
  Matrix out = t.value(a).cwiseProduct(t.value(b)).rowwise().sum();
  return t.push(std::move(out), "rowwise_dot", {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.accumulate(a, t.value(b).array().colwise() * g.col(0).array());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).array().colwise() * g.col(0).array());
  });
}

Var segment_softmax(Tape& t, Var logits, std::vector<std::size_t> offsets) {
  const auto& z = t.value(logits);
  if (z.cols() != 1 || offsets.empty() || offsets.back() != static_cast<std::size_t>(z.rows())) {
    throw ContractError("autodiff: segment_softmax expects a column matching the segment offsets");
  }
  Matrix out(z.rows(), 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto begin = static_cast<Eigen::Index>(offsets[s]);
    const auto len = static_cast<Eigen::Index>(offsets[s + 1] - offsets[s]);
    if (len == 0) continue;
    auto seg = z.col(0).segment(begin, len);
    Eigen::ArrayXd e = (seg.array() - seg.maxCoeff()).exp();
    out.col(0).segment(begin, len) = (e / e.sum()).matrix();
  }
  return t.push(std::move(out), "segment_softmax", {logits},
                [logits, offsets = std::move(offsets)](Tape& t, const Matrix& g, const Matrix& a) {
                  Matrix dz(a.rows(), 1);
                  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                    const auto begin = static_cast<Eigen::Index>(offsets[s]);
                    const auto len = static_cast<Eigen::Index>(offsets[s + 1] - offsets[s]);
                    auto as = a.col(0).segment(begin, len).array();
                    auto gs = g.col(0).segment(begin, len).array();
                    const double dot = (as * gs).sum();
                    dz.col(0).segment(begin, len) = (as * (gs - dot)).matrix();
                  }
                  t.accumulate(logits, dz);
                });
}

Var segment_weighted_sum(Tape& t, Var rows, Var weights, std::vector<std::size_t> offsets) {
  const auto& x = t.value(rows);
  const auto& w = t.value(weights);
  if (w.cols() != 1 || w.rows() != x.rows() || offsets.empty() ||
      offsets.back() != static_cast<std::size_t>(x.rows())) {
    throw ContractError("autodiff: segment_weighted_sum shape mismatch " + shape(x) + " / " + shape(w));
  }
  const auto segments = static_cast<Eigen::Index>(offsets.size() - 1);
  Matrix out = Matrix::Zero(segments, x.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    for (auto k = offsets[s]; k < offsets[s + 1]; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      out.row(s) += w(kk, 0) * x.row(kk);
    }
  }
  return t.push(std::move(out), "segment_weighted_sum", {rows, weights},
                [rows, weights, offsets = std::move(offsets)](Tape& t, const Matrix& g, const Matrix&) {
                  const auto& x = t.value(rows);
                  const auto& w = t.value(weights);
                  Matrix dx(x.rows(), x.cols());
                  Matrix dw(w.rows(), 1);
                  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                    const auto gs = g.row(static_cast<Eigen::Index>(s));
                    for (auto k = offsets[s]; k < offsets[s + 1]; ++k) {
                      const auto kk = static_cast<Eigen::Index>(k);
                      dx.row(kk) = w(kk, 0) * gs;
                      dw(kk, 0) = x.row(kk).dot(gs);
                    }
                  }
                  t.accumulate(rows, dx);
                  t.accumulate(weights, dw);
                });
}

}  // namespace hhgr::ad

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "hhgr/data.hpp"
#include "hhgr/hypergraph.hpp"

// Matrix-valued reverse-mode differentiation.
//
// Every op evaluates eagerly and appends a node to the tape. backward() walks
// the nodes in reverse and accumulates gradients into the parents of each node
// that (transitively) depends on a parameter. Forward values and gradients are
// checked for NaN/Inf; a failure raises NumericalError naming the node.
namespace hhgr::ad {

struct Var {
  std::size_t index = 0;
};

class Tape {
 public:
  /// Receives the node's upstream gradient and its own forward value.
  using Backward = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;

  Var constant(Matrix value, std::string label = "constant");
  Var parameter(Matrix value, std::string label);

  const Matrix& value(Var v) const { return nodes_[v.index].value; }
  double scalar(Var v) const;
  /// Gradient of the last backward() output with respect to `v` (zeros if unreached).
  Matrix grad(Var v) const;
  const std::string& label(Var v) const { return nodes_[v.index].label; }
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// `output` must be 1x1.
  void backward(Var output);

  Var push(Matrix value, std::string label, std::initializer_list<Var> parents, Backward backward);
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::string label;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var square(Tape& t, Var a);
Var sum(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
/// log(sigmoid(a)) without overflow for large |a|.
Var log_sigmoid(Tape& t, Var a);

/// op * x for a constant propagation operator. `op` must outlive the tape.
Var propagate(Tape& t, const PropagationOperator& op, Var x);
/// s * x for a constant sparse matrix. `s` must outlive the tape.
Var sparse_matmul(Tape& t, const SparseMatrix& s, Var x);

/// out.row(k) = x.row(rows[k]).
Var gather_rows(Tape& t, Var x, std::vector<Id> rows);
/// out(k) = a.row(k) . b.row(k), shape n x 1.
Var rowwise_dot(Tape& t, Var a, Var b);

/// Softmax within consecutive segments [offsets[s], offsets[s+1]) of a column vector.
Var segment_softmax(Tape& t, Var logits, std::vector<std::size_t> offsets);
/// out.row(s) = sum over the segment of weights(k) * rows.row(k).
Var segment_weighted_sum(Tape& t, Var rows, Var weights, std::vector<std::size_t> offsets);

}  // namespace hhgr::ad

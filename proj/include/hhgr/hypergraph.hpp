#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hhgr/data.hpp"

namespace hhgr {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using CountMatrix = Eigen::SparseMatrix<std::int64_t, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;

/// Binary vertex-by-hyperedge incidence matrix H (unit hyperedge weights).
class IncidenceMatrix {
 public:
  enum class EmptyEdges { Reject, Allow };

  IncidenceMatrix() = default;
  /// Throws ValidationError for out-of-range pairs, and for empty hyperedge
  /// columns unless `empty_edges == Allow` (augmented views keep them).
  IncidenceMatrix(std::size_t vertices, std::size_t edges, std::vector<std::pair<Id, Id>> entries,
                  EmptyEdges empty_edges = EmptyEdges::Reject);

  std::size_t vertices() const noexcept { return by_vertex_.rows(); }
  std::size_t edges() const noexcept { return by_vertex_.cols(); }
  std::size_t nnz() const noexcept { return by_vertex_.nnz(); }

  std::span<const Id> edges_of(Id vertex) const { return by_vertex_.row(vertex); }
  std::span<const Id> members_of(Id edge) const { return by_edge_.row(edge); }
  bool contains(Id vertex, Id edge) const { return by_vertex_.contains(vertex, edge); }
  std::vector<std::pair<Id, Id>> entries() const { return by_vertex_.entries(); }

  SparseMatrix to_sparse() const;

  friend bool operator==(const IncidenceMatrix& a, const IncidenceMatrix& b) {
    return a.by_vertex_ == b.by_vertex_;
  }

 private:
  BinaryMatrix by_vertex_;
  BinaryMatrix by_edge_;
};

struct DegreeVectors {
  std::vector<std::size_t> vertex;  // d_v
  std::vector<std::size_t> edge;    // b_e
  std::vector<Id> isolated;         // vertices with d_v == 0
};

/// Row-normalized propagation matrix. Rows of zero-degree nodes are all zero.
struct PropagationOperator {
  SparseMatrix matrix;
  std::vector<Id> zero_degree;
  /// Dense copy, kept when the operator is small enough to benefit.
  std::optional<Matrix> dense;

  std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
  Matrix apply(const Matrix& x) const;
  Matrix apply_transposed(const Matrix& x) const;
  Matrix to_dense() const { return dense ? *dense : Matrix(matrix); }
};

inline constexpr std::size_t kDefaultDensifyThreshold = 4'000'000;

/// Column g holds the members of group g.
IncidenceMatrix build_user_level(const std::vector<std::vector<Id>>& membership,
                                 std::size_t num_users);

DegreeVectors degrees(const IncidenceMatrix& h);

/// D^-1 H B^-1 H^T.
PropagationOperator propagation_operator(const IncidenceMatrix& h,
                                         std::size_t densify_threshold = kDefaultDensifyThreshold);

/// Clique projection over hyperedges: C_ij = 1 iff i != j share a vertex.
CountMatrix project_groups(const IncidenceMatrix& h);

struct MotifAdjacency {
  /// T = (C C) .* C; T_ij counts triangles through edge (i, j).
  CountMatrix triangles;
  std::vector<std::int64_t> degree;
};

/// Throws ContractError unless `c` is symmetric, binary and has a zero diagonal.
MotifAdjacency motif_adjacency(const CountMatrix& c);

/// D_gl^-1 T.
PropagationOperator group_propagation_operator(const MotifAdjacency& motif,
                                               std::size_t densify_threshold = kDefaultDensifyThreshold);

/// `row<TAB>col<TAB>value` lines, one per nonzero.
void write_coordinate_list(const std::filesystem::path& path, const CountMatrix& m);
void write_coordinate_list(const std::filesystem::path& path, const IncidenceMatrix& h);

}  // namespace hhgr

#include "hhgr/hypergraph.hpp"

#include <fstream>

#include "hhgr/error.hpp"

namespace hhgr {

IncidenceMatrix::IncidenceMatrix(std::size_t vertices, std::size_t edges,
                                 std::vector<std::pair<Id, Id>> entries, EmptyEdges empty_edges)
    : by_vertex_(vertices, edges, std::move(entries)), by_edge_(by_vertex_.transposed()) {
  if (empty_edges == EmptyEdges::Reject) {
    for (std::size_t e = 0; e < edges; ++e) {
      if (by_edge_.row(static_cast<Id>(e)).empty()) {
        throw ValidationError("hypergraph: hyperedge " + std::to_string(e) + " has no vertices");
      }
    }
  }
}

SparseMatrix IncidenceMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(nnz());
  for (auto [v, e] : entries()) triplets.emplace_back(v, e, 1.0);
  SparseMatrix m(static_cast<Eigen::Index>(vertices()), static_cast<Eigen::Index>(edges()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Matrix PropagationOperator::apply(const Matrix& x) const {
  if (static_cast<std::size_t>(x.rows()) != size()) {
    throw ContractError("propagation: operator is " + std::to_string(size()) + "x" +
                        std::to_string(size()) + " but input has " + std::to_string(x.rows()) + " rows");
  }
  if (dense) return *dense * x;
  return matrix * x;
}

Matrix PropagationOperator::apply_transposed(const Matrix& x) const {
  if (static_cast<std::size_t>(x.rows()) != size()) {
    throw ContractError("propagation: transposed apply with " + std::to_string(x.rows()) + " rows");
  }
  if (dense) return dense->transpose() * x;
  return matrix.transpose() * x;
}

IncidenceMatrix build_user_level(const std::vector<std::vector<Id>>& membership,
                                 std::size_t num_users) {
  std::vector<std::pair<Id, Id>> entries;
  for (std::size_t g = 0; g < membership.size(); ++g) {
    if (membership[g].empty()) {
      throw ValidationError("hypergraph: group " + std::to_string(g) + " has no members");
    }
    for (Id u : membership[g]) {
      if (u < 0 || static_cast<std::size_t>(u) >= num_users) {
        throw ValidationError("hypergraph: group " + std::to_string(g) + " references user " +
                              std::to_string(u) + " but only " + std::to_string(num_users) +
                              " users exist");
      }
      entries.emplace_back(u, static_cast<Id>(g));
    }
  }
  return IncidenceMatrix(num_users, membership.size(), std::move(entries));
}

DegreeVectors degrees(const IncidenceMatrix& h) {
  DegreeVectors d;
  d.vertex.resize(h.vertices());
  d.edge.resize(h.edges());
  for (std::size_t v = 0; v < h.vertices(); ++v) {
    d.vertex[v] = h.edges_of(static_cast<Id>(v)).size();
    if (d.vertex[v] == 0) d.isolated.push_back(static_cast<Id>(v));
  }
  for (std::size_t e = 0; e < h.edges(); ++e) d.edge[e] = h.members_of(static_cast<Id>(e)).size();
  return d;
}

namespace {

void maybe_densify(PropagationOperator& op, std::size_t threshold) {
  if (op.size() * op.size() <= threshold) op.dense = Matrix(op.matrix);
}

Eigen::VectorXd safe_inverse(const std::vector<std::size_t>& values) {
  Eigen::VectorXd inv(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    inv[static_cast<Eigen::Index>(i)] = values[i] == 0 ? 0.0 : 1.0 / static_cast<double>(values[i]);
  }
  return inv;
}

}  // namespace

PropagationOperator propagation_operator(const IncidenceMatrix& h, std::size_t densify_threshold) {
  auto deg = degrees(h);
  SparseMatrix hs = h.to_sparse();
  SparseMatrix left = safe_inverse(deg.vertex).asDiagonal() * hs;
  SparseMatrix right = safe_inverse(deg.edge).asDiagonal() * SparseMatrix(hs.transpose());
  PropagationOperator op;
  op.matrix = (left * right).pruned();
  op.matrix.makeCompressed();
  op.zero_degree = std::move(deg.isolated);
  maybe_densify(op, densify_threshold);
  return op;
}

CountMatrix project_groups(const IncidenceMatrix& h) {
  std::vector<Eigen::Triplet<std::int64_t>> triplets;
  const auto n = h.edges();
  std::vector<char> seen(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Id> touched;
    for (Id v : h.members_of(static_cast<Id>(i))) {
      for (Id j : h.edges_of(v)) {
        if (static_cast<std::size_t>(j) != i && !seen[j]) {
          seen[j] = 1;
          touched.push_back(j);
        }
      }
    }
    for (Id j : touched) {
      triplets.emplace_back(static_cast<Eigen::Index>(i), j, 1);
      seen[j] = 0;
    }
  }
  CountMatrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  c.setFromTriplets(triplets.begin(), triplets.end());
  return c;
}

MotifAdjacency motif_adjacency(const CountMatrix& c) {
  if (c.rows() != c.cols()) throw ContractError("motif: adjacency must be square");
  for (Eigen::Index r = 0; r < c.outerSize(); ++r) {
    for (CountMatrix::InnerIterator it(c, r); it; ++it) {
      if (it.value() == 0) continue;
      if (it.value() != 1) throw ContractError("motif: adjacency must be binary");
      if (it.col() == r) {
        throw ContractError("motif: adjacency has nonzero diagonal at " + std::to_string(r));
      }
      if (c.coeff(it.col(), r) != 1) {
        throw ContractError("motif: adjacency is not symmetric at (" + std::to_string(r) + ", " +
                            std::to_string(it.col()) + ")");
      }
    }
  }
  MotifAdjacency motif;
  CountMatrix paths = c * c;
  motif.triangles = paths.cwiseProduct(c).pruned();
  motif.triangles.makeCompressed();
  motif.degree.assign(static_cast<std::size_t>(c.rows()), 0);
  for (Eigen::Index r = 0; r < motif.triangles.outerSize(); ++r) {
    for (CountMatrix::InnerIterator it(motif.triangles, r); it; ++it) motif.degree[r] += it.value();
  }
  return motif;
}

PropagationOperator group_propagation_operator(const MotifAdjacency& motif,
                                               std::size_t densify_threshold) {
  const auto n = motif.triangles.rows();
  std::vector<Eigen::Triplet<double>> triplets;
  PropagationOperator op;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto deg = motif.degree[static_cast<std::size_t>(r)];
    if (deg == 0) {
      op.zero_degree.push_back(static_cast<Id>(r));
      continue;
    }
    for (CountMatrix::InnerIterator it(motif.triangles, r); it; ++it) {
      triplets.emplace_back(r, it.col(), static_cast<double>(it.value()) / static_cast<double>(deg));
    }
  }
  op.matrix = SparseMatrix(n, n);
  op.matrix.setFromTriplets(triplets.begin(), triplets.end());
  maybe_densify(op, densify_threshold);
  return op;
}

void write_coordinate_list(const std::filesystem::path& path, const CountMatrix& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("hypergraph: cannot write " + path.string());
  out << "# rows=" << m.rows() << " cols=" << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (CountMatrix::InnerIterator it(m, r); it; ++it) {
      out << r << '\t' << it.col() << '\t' << it.value() << '\n';
    }
  }
}

void write_coordinate_list(const std::filesystem::path& path, const IncidenceMatrix& h) {
  std::ofstream out(path);
  if (!out) throw ValidationError("hypergraph: cannot write " + path.string());
  out << "# rows=" << h.vertices() << " cols=" << h.edges() << '\n';
  for (auto [v, e] : h.entries()) out << v << '\t' << e << "\t1\n";
}

}  // namespace hhgr

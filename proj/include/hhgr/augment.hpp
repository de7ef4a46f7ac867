#pragma once

#include <cstdint>
#include <vector>

#include "hhgr/hypergraph.hpp"

namespace hhgr {

enum class DropKind { Coarse, Fine };

/// Record of which vertices (coarse) or incidences (fine) were kept.
struct DropoutMask {
  DropKind kind = DropKind::Coarse;
  double rate = 0.0;
  std::uint64_t seed = 0;
  /// Coarse: one entry per vertex, applied to every hyperedge column.
  std::vector<std::uint8_t> keep_vertex;
  /// Fine: one entry per incidence of the source matrix, in row-major entry order.
  std::vector<std::uint8_t> keep_incidence;
};

struct DroppedView {
  IncidenceMatrix incidence;
  DropoutMask mask;
};

/// Each vertex is removed from every hyperedge it belongs to with probability `rate`.
/// Emptied hyperedges stay in the matrix as zero-degree columns.
DroppedView coarse_drop(const IncidenceMatrix& h, double rate, std::uint64_t seed);

/// Each (vertex, hyperedge) incidence is removed independently with probability `rate`.
DroppedView fine_drop(const IncidenceMatrix& h, double rate, std::uint64_t seed);

}  // namespace hhgr

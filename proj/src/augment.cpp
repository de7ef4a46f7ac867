#include "hhgr/augment.hpp"

#include <random>
#include <string>

#include "hhgr/error.hpp"

namespace hhgr {
namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("augment: drop rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

}  // namespace

DroppedView coarse_drop(const IncidenceMatrix& h, double rate, std::uint64_t seed) {
  check_rate(rate);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(rate);
  DropoutMask mask{DropKind::Coarse, rate, seed, std::vector<std::uint8_t>(h.vertices(), 1), {}};
  for (auto& keep : mask.keep_vertex) keep = drop(rng) ? 0 : 1;

  std::vector<std::pair<Id, Id>> kept;
  kept.reserve(h.nnz());
  for (auto [v, e] : h.entries()) {
    if (mask.keep_vertex[v]) kept.emplace_back(v, e);
  }
  return {IncidenceMatrix(h.vertices(), h.edges(), std::move(kept), IncidenceMatrix::EmptyEdges::Allow),
          std::move(mask)};
}

DroppedView fine_drop(const IncidenceMatrix& h, double rate, std::uint64_t seed) {
  check_rate(rate);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(rate);
  DropoutMask mask{DropKind::Fine, rate, seed, {}, {}};
  auto entries = h.entries();
  mask.keep_incidence.resize(entries.size());

  std::vector<std::pair<Id, Id>> kept;
  kept.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    mask.keep_incidence[k] = drop(rng) ? 0 : 1;
    if (mask.keep_incidence[k]) kept.push_back(entries[k]);
  }
  return {IncidenceMatrix(h.vertices(), h.edges(), std::move(kept), IncidenceMatrix::EmptyEdges::Allow),
          std::move(mask)};
}

}  // namespace hhgr

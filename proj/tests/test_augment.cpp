#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hhgr/augment.hpp"
#include "hhgr/error.hpp"

using namespace hhgr;

namespace {

IncidenceMatrix sample() { return build_user_level({{0, 1, 2}, {1, 3}, {0, 3, 4}, {1, 2, 4}}, 6); }

}  // namespace

TEST_CASE("zero rate leaves the incidence matrix unchanged") {
  const auto h = sample();
  CHECK(coarse_drop(h, 0.0, 1).incidence == h);
  CHECK(fine_drop(h, 0.0, 1).incidence == h);
}

TEST_CASE("rates outside [0, 1) are rejected") {
  const auto h = sample();
  CHECK_THROWS_AS(coarse_drop(h, 1.0, 1), ParameterError);
  CHECK_THROWS_AS(fine_drop(h, 1.0, 1), ParameterError);
  CHECK_THROWS_AS(fine_drop(h, -0.1, 1), ParameterError);
}

TEST_CASE("coarse drop removes a vertex from every hyperedge") {
  const auto h = sample();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto view = coarse_drop(h, 0.4, seed);
    CHECK(view.incidence.edges() == h.edges());
    for (Id v = 0; v < static_cast<Id>(h.vertices()); ++v) {
      const auto kept = view.incidence.edges_of(v).size();
      if (view.mask.keep_vertex[v]) CHECK(kept == h.edges_of(v).size());
      else CHECK(kept == 0);
    }
  }
}

TEST_CASE("fine drop is local to one incidence") {
  const auto h = sample();
  bool saw_partial = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto view = fine_drop(h, 0.5, seed);
    const auto entries = h.entries();
    REQUIRE(view.mask.keep_incidence.size() == entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      CHECK(view.incidence.contains(entries[k].first, entries[k].second) == bool(view.mask.keep_incidence[k]));
    }
    for (Id v = 0; v < static_cast<Id>(h.vertices()); ++v) {
      const auto kept = view.incidence.edges_of(v).size();
      saw_partial |= kept > 0 && kept < h.edges_of(v).size();
    }
  }
  CHECK(saw_partial);
}

TEST_CASE("empty hyperedges survive dropout") {
  const auto h = build_user_level({{0}, {1}}, 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(coarse_drop(h, 0.9, seed).incidence.edges() == 2);
}

TEST_CASE("empirical drop rates match the configured rates") {
  std::vector<std::vector<Id>> membership;
  for (Id g = 0; g < 40; ++g) membership.push_back({g, static_cast<Id>((g + 1) % 50), static_cast<Id>((g + 7) % 50)});
  const auto h = build_user_level(membership, 50);
  const int draws = 400;
  double coarse = 0, fine = 0;
  for (int s = 0; s < draws; ++s) {
    const auto c = coarse_drop(h, 0.2, static_cast<std::uint64_t>(s));
    for (auto k : c.mask.keep_vertex) coarse += !k;
    const auto f = fine_drop(h, 0.3, static_cast<std::uint64_t>(s));
    for (auto k : f.mask.keep_incidence) fine += !k;
  }
  const double nc = draws * 50.0, nf = draws * static_cast<double>(h.nnz());
  CHECK(std::abs(coarse / nc - 0.2) < 3 * std::sqrt(0.2 * 0.8 / nc));
  CHECK(std::abs(fine / nf - 0.3) < 3 * std::sqrt(0.3 * 0.7 / nf));
}

TEST_CASE("dropout is deterministic per seed") {
  const auto h = sample();
  CHECK(coarse_drop(h, 0.3, 9).incidence == coarse_drop(h, 0.3, 9).incidence);
  CHECK(fine_drop(h, 0.3, 9).mask.keep_incidence == fine_drop(h, 0.3, 9).mask.keep_incidence);
}

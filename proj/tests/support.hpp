#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hhgr/data.hpp"
#include "hhgr/hypergraph.hpp"

namespace hhgr::testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hhgr-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Symmetric 0/1 adjacency with empty diagonal, each pair present with probability p.
inline CountMatrix random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Eigen::Triplet<std::int64_t>> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) {
        t.emplace_back(static_cast<int>(i), static_cast<int>(j), 1);
        t.emplace_back(static_cast<int>(j), static_cast<int>(i), 1);
      }
    }
  }
  CountMatrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  c.setFromTriplets(t.begin(), t.end());
  return c;
}

/// Random incidence matrix; some vertices and hyperedges may be empty.
inline IncidenceMatrix random_hypergraph(std::size_t vertices, std::size_t edges, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<Id, Id>> entries;
  for (std::size_t v = 0; v < vertices; ++v) {
    for (std::size_t e = 0; e < edges; ++e) {
      if (coin(rng)) entries.emplace_back(static_cast<Id>(v), static_cast<Id>(e));
    }
  }
  return IncidenceMatrix(vertices, edges, std::move(entries), IncidenceMatrix::EmptyEdges::Allow);
}

/// Dataset with explicit membership and random interactions at the given density.
inline InteractionDataset dataset_with_membership(std::size_t users, std::size_t items,
                                                  std::vector<std::vector<Id>> membership, double density,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(density);
  std::uniform_int_distribution<Id> any_item(0, static_cast<Id>(items) - 1);
  auto draw = [&](std::size_t rows) {
    std::vector<std::pair<Id, Id>> e;
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < items; ++i) {
        // keep one item unobserved so every row has negatives
        if (i + 1 < items && coin(rng)) {
          e.emplace_back(static_cast<Id>(r), static_cast<Id>(i));
          ++count;
        }
      }
      if (count == 0) e.emplace_back(static_cast<Id>(r), any_item(rng) % static_cast<Id>(items - 1));
    }
    return BinaryMatrix(rows, items, std::move(e));
  };
  InteractionDataset ds;
  ds.num_users = users;
  ds.num_items = items;
  ds.num_groups = membership.size();
  ds.user_item = draw(users);
  ds.group_item = draw(membership.size());
  ds.membership = std::move(membership);
  ds.validate();
  return ds;
}

/// Every group in the training partition; no validation or test groups.
inline SplitDataset all_groups_for_training(const InteractionDataset& ds) {
  SplitDataset split;
  split.train = ds;
  for (std::size_t g = 0; g < ds.num_groups; ++g) {
    split.train_groups.push_back(static_cast<Id>(g));
    split.group_interaction_counts.push_back(ds.group_item.row(static_cast<Id>(g)).size());
  }
  return split;
}

}  // namespace hhgr::testing

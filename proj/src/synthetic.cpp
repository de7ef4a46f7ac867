#include <algorithm>
#include <iterator>
#include <numeric>
#include <random>
#include <set>

#include "hhgr/data.hpp"
#include "hhgr/error.hpp"

namespace hhgr {
namespace {

constexpr double kBackgroundFactor = 1.0 / 20.0;
constexpr double kInClusterRecruitment = 0.8;

std::vector<std::size_t> round_robin_labels(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % k;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

// Bernoulli row over all items with elevated probability inside `clusters`.
// Guarantees at least one positive and at least one unobserved item.
std::vector<Id> draw_row(const std::vector<std::size_t>& item_cluster, const std::set<std::size_t>& clusters,
                         double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Id> row;
  std::vector<Id> inside, outside_positive;
  for (std::size_t i = 0; i < item_cluster.size(); ++i) {
    bool in = clusters.count(item_cluster[i]) > 0;
    double p = in ? density : density * kBackgroundFactor;
    if (in) inside.push_back(static_cast<Id>(i));
    if (unit(rng) < p) {
      row.push_back(static_cast<Id>(i));
      if (!in) outside_positive.push_back(static_cast<Id>(i));
    }
  }
  if (row.empty()) {
    const auto& pool = inside.empty() ? row : inside;
    Id pick = pool.empty() ? 0 : pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    row.push_back(pick);
  }
  if (row.size() == item_cluster.size() && row.size() > 1) {
    // Full row: drop a background item if any, else an arbitrary one.
    const auto& pool = outside_positive.empty() ? row : outside_positive;
    Id victim = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    row.erase(std::find(row.begin(), row.end(), victim));
  }
  return row;
}

}  // namespace

InteractionDataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.num_users < 1 || cfg.num_items < 2 || cfg.num_groups < 1) {
    throw ParameterError("synth: need >= 1 user, >= 2 items and >= 1 group");
  }
  auto check_density = [](double d, const char* name) {
    if (!(d > 0.0 && d <= 1.0)) {
      throw ParameterError(std::string("synth: ") + name + " must lie in (0, 1], got " + std::to_string(d));
    }
  };
  check_density(cfg.density, "density");
  const double group_density = cfg.group_density.value_or(cfg.density);
  check_density(group_density, "group density");
  if (!(cfg.member_adoption >= 0.0 && cfg.member_adoption <= 1.0)) {
    throw ParameterError("synth: member adoption must lie in [0, 1], got " + std::to_string(cfg.member_adoption));
  }
  if (cfg.min_group_size < 1 || cfg.min_group_size > cfg.max_group_size) {
    throw GenerationError("synth: invalid group size range " + std::to_string(cfg.min_group_size) +
                          ".." + std::to_string(cfg.max_group_size));
  }
  if (cfg.max_group_size > cfg.num_users) {
    throw GenerationError("synth: group size up to " + std::to_string(cfg.max_group_size) +
                          " exceeds " + std::to_string(cfg.num_users) + " users");
  }

  std::mt19937_64 rng(cfg.seed);
  const std::size_t clusters =
      std::clamp<std::size_t>((cfg.num_groups + 3) / 4, 2, cfg.num_items);
  auto item_cluster = round_robin_labels(cfg.num_items, clusters, rng);
  auto user_home = round_robin_labels(cfg.num_users, clusters, rng);
  auto group_cluster = round_robin_labels(cfg.num_groups, clusters, rng);

  std::vector<std::vector<Id>> users_by_cluster(clusters);
  for (std::size_t u = 0; u < cfg.num_users; ++u) users_by_cluster[user_home[u]].push_back(static_cast<Id>(u));

  InteractionDataset ds;
  ds.num_users = cfg.num_users;
  ds.num_items = cfg.num_items;
  ds.num_groups = cfg.num_groups;
  ds.membership.resize(cfg.num_groups);

  std::vector<std::set<std::size_t>> user_clusters(cfg.num_users);
  for (std::size_t u = 0; u < cfg.num_users; ++u) user_clusters[u].insert(user_home[u]);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t g = 0; g < cfg.num_groups; ++g) {
    auto size = std::uniform_int_distribution<std::size_t>(cfg.min_group_size, cfg.max_group_size)(rng);
    std::set<Id> members;
    const auto& local = users_by_cluster[group_cluster[g]];
    while (members.size() < size) {
      std::vector<Id> candidates;
      if (unit(rng) < kInClusterRecruitment) {
        for (Id u : local) if (!members.count(u)) candidates.push_back(u);
      }
      if (candidates.empty()) {
        for (std::size_t u = 0; u < cfg.num_users; ++u) {
          if (!members.count(static_cast<Id>(u))) candidates.push_back(static_cast<Id>(u));
        }
      }
      members.insert(candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)]);
    }
    ds.membership[g].assign(members.begin(), members.end());
    for (Id u : members) user_clusters[u].insert(group_cluster[g]);
  }

  std::vector<std::set<Id>> user_rows(cfg.num_users);
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    for (Id i : draw_row(item_cluster, user_clusters[u], cfg.density, rng)) user_rows[u].insert(i);
  }
  std::vector<std::pair<Id, Id>> ui, gi;
  for (std::size_t g = 0; g < cfg.num_groups; ++g) {
    for (Id i : draw_row(item_cluster, {group_cluster[g]}, group_density, rng)) {
      gi.emplace_back(static_cast<Id>(g), i);
      for (Id u : ds.membership[g]) {
        if (unit(rng) < cfg.member_adoption) user_rows[u].insert(i);
      }
    }
  }
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    auto& row = user_rows[u];
    if (row.size() == cfg.num_items) row.erase(std::prev(row.end()));  // keep one negative available
    for (Id i : row) ui.emplace_back(static_cast<Id>(u), i);
  }
  ds.user_item = BinaryMatrix(ds.num_users, ds.num_items, std::move(ui));
  ds.group_item = BinaryMatrix(ds.num_groups, ds.num_items, std::move(gi));
  ds.validate();
  return ds;
}

}  // namespace hhgr

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hhgr {

using Id = std::int32_t;

/// Sparse {0,1} matrix in compressed-row form. Entries are unique and sorted
/// within each row; values are implicitly 1.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  /// Duplicate (row, col) pairs collapse to one entry. Out-of-range pairs throw ValidationError.
  BinaryMatrix(std::size_t rows, std::size_t cols, std::vector<std::pair<Id, Id>> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return indices_.size(); }

  std::span<const Id> row(Id r) const {
    return {indices_.data() + offsets_[r], indices_.data() + offsets_[r + 1]};
  }
  bool contains(Id r, Id c) const;
  /// Row-major (row, col) list.
  std::vector<std::pair<Id, Id>> entries() const;
  BinaryMatrix transposed() const;

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Id> indices_;
};

/// User-item matrix R, group-item matrix S and group membership.
struct InteractionDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_groups = 0;
  BinaryMatrix user_item;
  BinaryMatrix group_item;
  /// membership[g] is the sorted, duplicate-free member list of group g.
  std::vector<std::vector<Id>> membership;

  /// Throws ValidationError on the first broken invariant.
  void validate() const;
  friend bool operator==(const InteractionDataset&, const InteractionDataset&) = default;
};

/// Held-out group-item interactions for a subset of groups.
struct Holdout {
  std::vector<Id> groups;             // sorted
  std::vector<std::vector<Id>> items;  // items[k] belongs to groups[k]
  std::size_t interactions() const;
};

struct SplitDataset {
  /// Group-item rows only for training groups; membership and R are complete.
  InteractionDataset train;
  Holdout validation;
  Holdout test;
  std::vector<Id> train_groups;
  std::uint64_t split_seed = 0;
  /// Observed group-item count per group across all partitions.
  std::vector<std::size_t> group_interaction_counts;
};

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

enum class SubjectKind { User, Group };

struct TrainingTriple {
  Id subject = 0;
  Id positive = 0;
  std::vector<Id> negatives;
};

struct DatasetPaths {
  std::filesystem::path user_item;
  std::filesystem::path group_item;
  std::filesystem::path membership;

  /// `users.tsv`, `groups_items.tsv` and `membership.tsv` inside `dir`.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

/// Dense-id tables produced when external ids are compacted on load.
struct IdMaps {
  std::vector<std::int64_t> users;
  std::vector<std::int64_t> items;
  std::vector<std::int64_t> groups;
};

struct LoadOptions {
  /// Remap arbitrary non-negative external ids to dense 0-based ids.
  bool compact_ids = false;
};

InteractionDataset load_dataset(const DatasetPaths& paths, const LoadOptions& options = {},
                                IdMaps* id_maps = nullptr);
void save_dataset(const InteractionDataset& ds, const DatasetPaths& paths);
void save_id_maps(const IdMaps& maps, const std::filesystem::path& dir);

/// Counts in the column layout of the usual dataset-statistics table.
std::string format_stats(const InteractionDataset& ds, const std::string& name);

/// Random group-level partition. Sizes are round(ratio * |G|) for validation
/// and test, with the remainder going to training.
SplitDataset split_groups(const InteractionDataset& ds, const SplitRatios& ratios,
                          std::uint64_t seed);

/// Produces (subject, positive, negatives) triples; every positive of every
/// subject appears exactly once per epoch and negatives are drawn uniformly
/// (with replacement) from the subject's unobserved items. Holds its own RNG,
/// so use one sampler per worker.
class TripleSampler {
 public:
  TripleSampler(BinaryMatrix interactions, std::size_t negatives_per_triple, std::uint64_t seed);

  std::vector<TrainingTriple> next_epoch();
  Id sample_negative(Id subject);
  std::size_t negatives_per_triple() const noexcept { return n_neg_; }

 private:
  BinaryMatrix interactions_;
  std::size_t n_neg_;
  std::mt19937_64 rng_;
};

TripleSampler sample_triples(const InteractionDataset& ds, SubjectKind kind,
                             std::size_t negatives_per_triple, std::uint64_t seed);

struct SyntheticConfig {
  std::size_t num_users = 200;
  std::size_t num_items = 500;
  std::size_t num_groups = 80;
  std::size_t min_group_size = 2;
  std::size_t max_group_size = 6;
  /// In-cluster interaction probability for user rows.
  double density = 0.3;
  /// In-cluster probability for group rows; defaults to `density`.
  std::optional<double> group_density;
  /// Probability that a member's user row also records each item of the group
  /// (group interactions are member interactions, as in check-in data).
  double member_adoption = 1.0;
  std::uint64_t seed = 7;
};

/// Planted-preference generator: items are split into latent clusters, every
/// group is assigned one cluster and recruits most members from users whose
/// home cluster matches. Rows are Bernoulli(density) inside the relevant
/// clusters and Bernoulli(density / 20) outside; members then adopt the items
/// of their groups with probability `member_adoption`.
InteractionDataset generate_synthetic(const SyntheticConfig& config);

/// Deterministic child seed for a named stream, e.g. derive_seed(seed, "mask", epoch).
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0);

}  // namespace hhgr

#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hhgr/data.hpp"
#include "hhgr/model.hpp"

namespace hhgr {

/// Recall@K denominator: min(|relevant|, K) or |relevant|.
enum class RecallDenominator { Min, Full };

RecallDenominator parse_recall_denominator(std::string_view text);
std::string_view recall_denominator_name(RecallDenominator d);

/// Candidate items of one group ordered by descending score, ties broken by
/// lower item id. Excluded (training-positive) items never appear.
struct RankedList {
  Id group = 0;
  std::vector<Id> items;
  std::vector<Id> relevant;  // sorted
};

RankedList rank_items(Id group, std::span<const double> scores, std::span<const Id> exclude,
                      std::vector<Id> relevant,
                      std::size_t limit = std::numeric_limits<std::size_t>::max());

double recall_at_k(const RankedList& ranked, std::size_t k,
                   RecallDenominator denominator = RecallDenominator::Min);
/// Binary gains, 1/log2(rank+1) discount, normalised by the ideal DCG@K.
double ndcg_at_k(const RankedList& ranked, std::size_t k);

struct MetricAtK {
  std::size_t k = 0;
  double ndcg = 0.0;
  double recall = 0.0;
};

struct MetricsReport {
  std::vector<MetricAtK> at_k;
  std::size_t groups = 0;   // groups that contributed
  std::size_t skipped = 0;  // groups without relevant items
  std::vector<std::string> warnings;

  const MetricAtK& at(std::size_t k) const;
};

struct BucketReport {
  std::size_t bucket = 0;
  std::size_t min_interactions = 0;
  std::size_t max_interactions = 0;
  MetricsReport metrics;
};

struct EvalOptions {
  std::vector<std::size_t> ks{20, 50};
  RecallDenominator denominator = RecallDenominator::Min;
  std::size_t threads = 1;
};

/// Mean NDCG@K / Recall@K over the groups of `target`. `scores` is |G| x |I|;
/// row g of `exclude` lists the items removed from group g's candidates.
MetricsReport evaluate_scores(const Matrix& scores, const Holdout& target, const BinaryMatrix& exclude,
                              const EvalOptions& options);

/// Ranks every item for the test groups (training positives excluded).
MetricsReport evaluate(const ModelParams& params, const GroupStructure& structure, Mode mode,
                       const SplitDataset& split, const EvalOptions& options);

/// Test groups split into `num_buckets` quantile buckets by their observed
/// group-item interaction count; groups with equal counts share a bucket.
std::vector<BucketReport> sparsity_buckets(const Matrix& scores, const SplitDataset& split,
                                           std::size_t num_buckets, const EvalOptions& options,
                                           std::vector<std::string>* warnings = nullptr);
std::vector<BucketReport> sparsity_buckets(const ModelParams& params, const GroupStructure& structure,
                                           Mode mode, const SplitDataset& split, std::size_t num_buckets,
                                           const EvalOptions& options,
                                           std::vector<std::string>* warnings = nullptr);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const std::vector<BucketReport>& buckets);

/// One row per run, columns N@K... then R@K... for the report's Ks.
std::string format_metrics_table(const std::string& dataset,
                                 const std::vector<std::pair<std::string, MetricsReport>>& rows);
/// Method | N@K | R@K for a single K.
std::string format_ablation_table(const std::string& dataset, std::size_t k,
                                  const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace hhgr

#include "hhgr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "hhgr/error.hpp"

namespace hhgr {

RecallDenominator parse_recall_denominator(std::string_view text) {
  if (text == "min") return RecallDenominator::Min;
  if (text == "full") return RecallDenominator::Full;
  throw ConfigError("eval.recall_denominator must be 'min' or 'full', got '" + std::string(text) + "'");
}

std::string_view recall_denominator_name(RecallDenominator d) {
  return d == RecallDenominator::Min ? "min" : "full";
}

RankedList rank_items(Id group, std::span<const double> scores, std::span<const Id> exclude,
                      std::vector<Id> relevant, std::size_t limit) {
  std::vector<char> excluded(scores.size(), 0);
  for (Id i : exclude) excluded[i] = 1;
  RankedList out{group, {}, std::move(relevant)};
  std::sort(out.relevant.begin(), out.relevant.end());
  out.items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!excluded[i]) out.items.push_back(static_cast<Id>(i));
  }
  auto before = [&](Id a, Id b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  if (limit < out.items.size()) {
    std::partial_sort(out.items.begin(), out.items.begin() + static_cast<std::ptrdiff_t>(limit), out.items.end(),
                      before);
    out.items.resize(limit);
  } else {
    std::sort(out.items.begin(), out.items.end(), before);
  }
  return out;
}

namespace {

std::size_t hits_in_top(const RankedList& ranked, std::size_t k) {
  const auto n = std::min(k, ranked.items.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    hits += std::binary_search(ranked.relevant.begin(), ranked.relevant.end(), ranked.items[r]);
  }
  return hits;
}

void require_k(std::size_t k) {
  if (k < 1) throw ParameterError("eval: K must be >= 1");
}

}  // namespace

double recall_at_k(const RankedList& ranked, std::size_t k, RecallDenominator denominator) {
  require_k(k);
  if (ranked.relevant.empty()) return 0.0;
  const auto denom = denominator == RecallDenominator::Min ? std::min(ranked.relevant.size(), k)
                                                           : ranked.relevant.size();
  return static_cast<double>(hits_in_top(ranked, k)) / static_cast<double>(denom);
}

double ndcg_at_k(const RankedList& ranked, std::size_t k) {
  require_k(k);
  if (ranked.relevant.empty()) return 0.0;
  double dcg = 0.0;
  const auto n = std::min(k, ranked.items.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (std::binary_search(ranked.relevant.begin(), ranked.relevant.end(), ranked.items[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.relevant.size()); ++r) {
    ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / ideal;
}

const MetricAtK& MetricsReport::at(std::size_t k) const {
  for (const auto& m : at_k) {
    if (m.k == k) return m;
  }
  throw ContractError("eval: report has no K=" + std::to_string(k));
}

MetricsReport evaluate_scores(const Matrix& scores, const Holdout& target, const BinaryMatrix& exclude,
                              const EvalOptions& options) {
  if (options.ks.empty()) throw ParameterError("eval: no K values requested");
  for (auto k : options.ks) require_k(k);
  if (static_cast<std::size_t>(scores.rows()) != exclude.rows() ||
      static_cast<std::size_t>(scores.cols()) != exclude.cols()) {
    throw ContractError("eval: score matrix does not match the exclusion matrix");
  }
  const auto max_k = *std::max_element(options.ks.begin(), options.ks.end());
  const auto n = target.groups.size();
  const auto nk = options.ks.size();

  // per-group [ndcg_k..., recall_k...]; NaN marks a skipped group
  std::vector<double> rows(n * 2 * nk, 0.0);
  std::vector<char> skipped(n, 0);
  const Matrix scores_rm = scores;  // column-major copy, rows gathered below
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> row_scores(static_cast<std::size_t>(scores.cols()));
    for (std::size_t idx = begin; idx < end; ++idx) {
      if (target.items[idx].empty()) {
        skipped[idx] = 1;
        continue;
      }
      const Id g = target.groups[idx];
      for (Eigen::Index i = 0; i < scores.cols(); ++i) row_scores[static_cast<std::size_t>(i)] = scores_rm(g, i);
      auto ranked = rank_items(g, row_scores, exclude.row(g), target.items[idx], max_k);
      for (std::size_t j = 0; j < nk; ++j) {
        rows[idx * 2 * nk + j] = ndcg_at_k(ranked, options.ks[j]);
        rows[idx * 2 * nk + nk + j] = recall_at_k(ranked, options.ks[j], options.denominator);
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const auto chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(work, std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
    }
  }

  MetricsReport report;
  report.at_k.resize(nk);
  for (std::size_t j = 0; j < nk; ++j) report.at_k[j].k = options.ks[j];
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (skipped[idx]) {
      ++report.skipped;
      report.warnings.push_back("group " + std::to_string(target.groups[idx]) +
                                " has no held-out items; skipped");
      continue;
    }
    ++report.groups;
    for (std::size_t j = 0; j < nk; ++j) {
      report.at_k[j].ndcg += rows[idx * 2 * nk + j];
      report.at_k[j].recall += rows[idx * 2 * nk + nk + j];
    }
  }
  if (report.groups > 0) {
    for (auto& m : report.at_k) {
      m.ndcg /= static_cast<double>(report.groups);
      m.recall /= static_cast<double>(report.groups);
    }
  }
  return report;
}

namespace {

Matrix test_logits(const ModelParams& params, const GroupStructure& structure, Mode mode) {
  return group_item_logits(forward_ssl(params, structure, full_views(structure), mode));
}

}  // namespace

MetricsReport evaluate(const ModelParams& params, const GroupStructure& structure, Mode mode,
                       const SplitDataset& split, const EvalOptions& options) {
  return evaluate_scores(test_logits(params, structure, mode), split.test, split.train.group_item, options);
}

std::vector<BucketReport> sparsity_buckets(const Matrix& scores, const SplitDataset& split,
                                           std::size_t num_buckets, const EvalOptions& options,
                                           std::vector<std::string>* warnings) {
  if (num_buckets < 1) throw ParameterError("eval: need at least one bucket");
  const auto& test = split.test;
  const auto n = test.groups.size();
  if (n == 0) throw ContractError("eval: test set is empty");
  auto count_of = [&](std::size_t idx) { return split.group_interaction_counts.at(test.groups[idx]); };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return count_of(a) < count_of(b); });

  // Bucket of a group = bucket of the first group (in sorted order) sharing its count.
  std::vector<std::size_t> bucket_of(n);
  std::size_t first_rank = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && count_of(order[r]) != count_of(order[r - 1])) first_rank = r;
    bucket_of[order[r]] = first_rank * num_buckets / n;
  }

  std::vector<BucketReport> out;
  for (std::size_t b = 0; b < num_buckets; ++b) {
    Holdout part;
    std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto idx = order[r];
      if (bucket_of[idx] != b) continue;
      part.groups.push_back(test.groups[idx]);
      part.items.push_back(test.items[idx]);
      lo = std::min(lo, count_of(idx));
      hi = std::max(hi, count_of(idx));
    }
    if (part.groups.empty()) continue;
    out.push_back({out.size(), lo, hi, evaluate_scores(scores, part, split.train.group_item, options)});
  }
  if (out.size() < num_buckets && warnings) {
    warnings->push_back("sparsity buckets: requested " + std::to_string(num_buckets) + ", formed " +
                        std::to_string(out.size()) + " (too few groups or tied interaction counts)");
  }
  return out;
}

std::vector<BucketReport> sparsity_buckets(const ModelParams& params, const GroupStructure& structure, Mode mode,
                                           const SplitDataset& split, std::size_t num_buckets,
                                           const EvalOptions& options, std::vector<std::string>* warnings) {
  return sparsity_buckets(test_logits(params, structure, mode), split, num_buckets, options, warnings);
}

// ---------------------------------------------------------------------------
// Reporting

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["groups"] = report.groups;
  j["skipped"] = report.skipped;
  auto& metrics = j["metrics"] = nlohmann::json::object();
  for (const auto& m : report.at_k) {
    metrics["NDCG@" + std::to_string(m.k)] = m.ndcg;
    metrics["Recall@" + std::to_string(m.k)] = m.recall;
  }
  return j;
}

nlohmann::json to_json(const std::vector<BucketReport>& buckets) {
  auto arr = nlohmann::json::array();
  for (const auto& b : buckets) {
    auto j = to_json(b.metrics);
    j["bucket"] = b.bucket;
    j["min_interactions"] = b.min_interactions;
    j["max_interactions"] = b.max_interactions;
    arr.push_back(std::move(j));
  }
  return arr;
}

namespace {

std::size_t name_width(const std::vector<std::pair<std::string, MetricsReport>>& rows, std::size_t at_least) {
  std::size_t w = at_least;
  for (const auto& [name, _] : rows) w = std::max(w, name.size());
  return w + 2;
}

}  // namespace

std::string format_metrics_table(const std::string& dataset,
                                 const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream os;
  if (rows.empty()) return {};
  const auto w = name_width(rows, 7);
  const auto& ks = rows.front().second.at_k;
  os << std::left << std::setw(static_cast<int>(w)) << "Dataset" << dataset << '\n';
  os << std::left << std::setw(static_cast<int>(w)) << "Metric" << std::right;
  for (const auto& m : ks) os << std::setw(8) << ("N@" + std::to_string(m.k));
  for (const auto& m : ks) os << std::setw(8) << ("R@" + std::to_string(m.k));
  os << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& [name, report] : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << name << std::right;
    for (const auto& m : report.at_k) os << std::setw(8) << m.ndcg;
    for (const auto& m : report.at_k) os << std::setw(8) << m.recall;
    os << '\n';
  }
  return os.str();
}

std::string format_ablation_table(const std::string& dataset, std::size_t k,
                                  const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream os;
  const auto w = name_width(rows, 6);
  os << std::left << std::setw(static_cast<int>(w)) << "Method" << "| " << dataset << '\n';
  os << std::left << std::setw(static_cast<int>(w)) << "Metric" << "| " << std::setw(8)
     << ("N@" + std::to_string(k)) << ("R@" + std::to_string(k)) << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& [name, report] : rows) {
    const auto& m = report.at(k);
    os << std::left << std::setw(static_cast<int>(w)) << name << "| " << std::setw(8) << m.ndcg << m.recall
       << '\n';
  }
  return os.str();
}

}  // namespace hhgr

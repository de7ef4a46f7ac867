// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hhgr/augment.hpp"
#include "hhgr/checkpoint.hpp"
#include "hhgr/eval.hpp"
#include "hhgr/hypergraph.hpp"
#include "hhgr/model.hpp"
#include "hhgr/train.hpp"
#include "support.hpp"

using namespace hhgr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome motif_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> size(1, 50);
  std::uniform_real_distribution<double> prob(0.1, 0.5);
  std::size_t mismatches = 0, triangles = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = size(rng);
    const auto c = testing::random_graph(n, prob(rng), rng);
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> adj(c);
    const auto motif = motif_adjacency(c);
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> got(motif.triangles);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        std::int64_t expected = 0;
        if (adj(i, j)) {
          for (std::size_t k = 0; k < n; ++k) expected += adj(i, k) && adj(j, k);
        }
        triangles += static_cast<std::size_t>(expected);
        mismatches += got(i, j) != expected;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          fmt("200 graphs, %zu triangles, %zu mismatching entries, %.2fs (limit 5s)", triangles / 6,
              mismatches, secs)};
}

Outcome propagation_rows() {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> vertices(1, 50), edges(1, 20);
  std::uniform_real_distribution<double> prob(0.02, 0.4);
  double worst = 0.0;
  std::size_t bad_isolated = 0, isolated = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto h = testing::random_hypergraph(vertices(rng), edges(rng), prob(rng), rng);
    const Matrix a = propagation_operator(h).to_dense();
    for (Eigen::Index v = 0; v < a.rows(); ++v) {
      if (h.edges_of(static_cast<Id>(v)).empty()) {
        ++isolated;
        bad_isolated += (a.row(v).array() != 0.0).any();
      } else {
        worst = std::max(worst, std::abs(a.row(v).sum() - 1.0));
      }
    }
  }
  return {worst <= 1e-9 && bad_isolated == 0,
          fmt("200 hypergraphs, max |row sum - 1| = %.2e (limit 1e-9), %zu/%zu isolated rows nonzero", worst,
              bad_isolated, isolated)};
}

// ---------------------------------------------------------------------------

struct GradCheckInstance {
  InteractionDataset ds;
  GroupStructure structure;
  PropagationOperator coarse, fine;
  StepBatch batch;
};

GradCheckInstance gradient_instance() {
  GradCheckInstance inst;
  inst.ds = testing::dataset_with_membership(8, 10, {{0, 1, 2, 3}, {2, 3, 4, 5}, {0, 4, 5, 6, 7}}, 0.3, 5);
  inst.structure = build_structure(inst.ds);
  inst.coarse = propagation_operator(coarse_drop(inst.structure.user_level, 0.2, 1).incidence);
  inst.fine = propagation_operator(fine_drop(inst.structure.user_level, 0.3, 2).incidence);
  inst.batch.user_triples = TripleSampler(inst.ds.user_item, 2, 3).next_epoch();
  inst.batch.group_triples = TripleSampler(inst.ds.group_item, 2, 4).next_epoch();
  inst.batch.contrast_users = {0, 1, 2, 3, 4, 5, 6, 7};
  std::mt19937_64 rng(6);
  inst.batch.contrast_negatives = sample_contrast_negatives(8, 3, rng);
  return inst;
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  auto inst = gradient_instance();
  const AugmentedViews views{&inst.coarse, &inst.fine};
  const double h = 1e-4;
  ModelShape shape{4, 2, 1, 8, 10, 3};
  std::vector<std::string> names;
  std::vector<double> worst;
  std::size_t checked = 0;
  for (Mode mode : {Mode::HHGR, Mode::S2, Mode::WithoutUser, Mode::WithoutGroup, Mode::FineOnly, Mode::CoarseOnly}) {
    auto params = ModelParams::initialize(shape, 42);
    // larger embeddings keep the sigmoids away from their flat centre
    params.user_embed *= 3.0;
    params.item_embed *= 3.0;
    names = params.tensor_names();
    worst.resize(names.size(), 0.0);
    std::vector<Matrix> grads;
    evaluate_objective(params, inst.structure, views, mode, Stage::Main, 0.7, inst.batch, &grads);
    auto tensors = params.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      Matrix& t = *tensors[k];
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double saved = t.data()[i];
        t.data()[i] = saved + h;
        const double up = evaluate_objective(params, inst.structure, views, mode, Stage::Main, 0.7, inst.batch).total;
        t.data()[i] = saved - h;
        const double down =
            evaluate_objective(params, inst.structure, views, mode, Stage::Main, 0.7, inst.batch).total;
        t.data()[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = grads[k].data()[i];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst[k] = std::max(worst[k], std::abs(numeric - analytic) / scale);
        ++checked;
      }
    }
  }
  const double secs = seconds_since(t0);
  const double max_err = *std::max_element(worst.begin(), worst.end());
  std::string per;
  for (std::size_t k = 0; k < names.size(); ++k) per += fmt(" %s=%.1e", names[k].c_str(), worst[k]);
  return {max_err < 1e-4 && secs < 30.0,
          fmt("%zu partials over 6 modes, max rel err %.2e (limit 1e-4), %.2fs;", checked, max_err, secs) + per};
}

// ---------------------------------------------------------------------------

Outcome dropout_semantics() {
  std::mt19937_64 rng(13);
  const auto h = testing::random_hypergraph(40, 12, 0.3, rng);
  std::size_t partial = 0;
  const double rates[] = {0.1, 0.3, 0.5, 0.7};
  for (std::uint64_t draw = 0; draw < 1000; ++draw) {
    const auto view = coarse_drop(h, rates[draw % 4], draw);
    for (std::size_t v = 0; v < h.vertices(); ++v) {
      const auto kept = view.incidence.edges_of(static_cast<Id>(v)).size();
      partial += kept != 0 && kept != h.edges_of(static_cast<Id>(v)).size();
    }
  }

  // fine: Pearson correlation between the keep indicators of every pair of
  // hyperedges sharing a vertex
  const auto g = testing::random_hypergraph(10, 6, 0.6, rng);
  const auto entries = g.entries();
  const std::size_t draws = 10'000;
  std::vector<std::vector<std::uint8_t>> kept(entries.size(), std::vector<std::uint8_t>(draws));
  double kept_total = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto view = fine_drop(g, 0.3, 1'000'000 + d);
    for (std::size_t e = 0; e < entries.size(); ++e) {
      kept[e][d] = view.incidence.contains(entries[e].first, entries[e].second);
      kept_total += kept[e][d];
    }
  }
  double worst_r = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < entries.size(); ++a) {
    for (std::size_t b = a + 1; b < entries.size(); ++b) {
      if (entries[a].first != entries[b].first) continue;
      double ma = 0, mb = 0;
      for (std::size_t d = 0; d < draws; ++d) ma += kept[a][d], mb += kept[b][d];
      ma /= draws;
      mb /= draws;
      double cov = 0, va = 0, vb = 0;
      for (std::size_t d = 0; d < draws; ++d) {
        cov += (kept[a][d] - ma) * (kept[b][d] - mb);
        va += (kept[a][d] - ma) * (kept[a][d] - ma);
        vb += (kept[b][d] - mb) * (kept[b][d] - mb);
      }
      worst_r = std::max(worst_r, std::abs(cov / std::sqrt(va * vb)));
      ++pairs;
    }
  }
  const double keep_rate = kept_total / static_cast<double>(entries.size() * draws);
  return {partial == 0 && pairs > 0 && worst_r < 0.05,
          fmt("coarse: %zu partially dropped rows in 1000 draws; fine: max |r| = %.4f over %zu column pairs "
              "(limit 0.05), keep rate %.4f",
              partial, worst_r, pairs, keep_rate)};
}

// ---------------------------------------------------------------------------

InteractionDataset desk_dataset(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.num_users = 60;
  cfg.num_items = 120;
  cfg.num_groups = 30;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

TrainConfig small_config(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.dim = 16;
  c.batch_size = 128;
  c.pretrain_epochs = 3;
  c.epochs = 6;
  c.patience = 0;
  c.contrast_negatives = 5;
  return c;
}

Outcome loss_decomposition() {
  const auto split = split_groups(desk_dataset(21), {}, 1);
  std::size_t steps = 0;
  double worst = 0.0;
  for (Mode mode : {Mode::HHGR, Mode::S2, Mode::FineOnly, Mode::CoarseOnly}) {
    for (double beta : {0.0, 0.5, 1.0, 2.5}) {
      auto cfg = small_config(mode);
      cfg.beta = beta;
      const auto result = train(split, cfg);
      for (const auto& s : result.log.steps) {
        worst = std::max(worst, std::abs(s.total - (s.beta * s.l_uu + s.l_ui + s.l_gi)));
        ++steps;
      }
    }
  }
  return {steps > 0 && worst <= 1e-9, fmt("%zu logged steps over 4 modes x 4 betas, max |total - sum| = %.2e",
                                          steps, worst)};
}

double training_recall_at(const ModelParams& params, const GroupStructure& structure, Mode mode,
                          const InteractionDataset& ds, std::size_t k) {
  const auto logits = group_item_logits(forward_ssl(params, structure, full_views(structure), mode));
  Holdout seen;
  for (std::size_t g = 0; g < ds.num_groups; ++g) {
    auto row = ds.group_item.row(static_cast<Id>(g));
    seen.groups.push_back(static_cast<Id>(g));
    seen.items.emplace_back(row.begin(), row.end());
  }
  const BinaryMatrix nothing(ds.num_groups, ds.num_items, {});
  return evaluate_scores(logits, seen, nothing, EvalOptions{{k}, RecallDenominator::Min, 1}).at(k).recall;
}

Outcome overfit() {
  SyntheticConfig sc;
  sc.num_users = 20;
  sc.num_items = 30;
  sc.num_groups = 8;
  sc.min_group_size = 2;
  sc.max_group_size = 4;
  sc.density = 0.3;
  sc.seed = 7;
  const auto ds = generate_synthetic(sc);
  const auto split = testing::all_groups_for_training(ds);
  const auto structure = build_structure(ds);
  auto cfg = small_config(Mode::HHGR);
  cfg.dim = 16;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.lr = 0.003;
  cfg.lr_group = 0.003;
  double best = 0.0;
  std::size_t best_epoch = 0;
  double probe_seconds = 0.0;
  cfg.on_epoch = [&](const EpochRecord& r, const ModelParams& p) {
    if (r.stage != Stage::Main) return;
    const auto t = Clock::now();
    const double recall = training_recall_at(p, structure, Mode::HHGR, ds, 5);
    probe_seconds += seconds_since(t);
    if (recall > best) {
      best = recall;
      best_epoch = r.epoch;
    }
  };
  const auto t0 = Clock::now();
  const auto result = train(split, structure, cfg);
  const double secs = seconds_since(t0) - probe_seconds;
  return {best >= 0.9 && secs < 60.0 && !result.log.diverged,
          fmt("20/30/8 sizes 2..4 seed 7, d=16, lr 0.003, batch 8: best training Recall@5 within 200 epochs = %.3f "
              "(epoch %zu, need >= 0.9), %.2fs (limit 60s)",
              best, best_epoch, secs)};
}

Outcome ssl_direction() {
  SyntheticConfig sc;
  sc.num_users = 200;
  sc.num_items = 500;
  sc.num_groups = 80;
  sc.group_density = 0.08;
  sc.seed = 17;
  const auto ds = generate_synthetic(sc);
  const double density =
      static_cast<double>(ds.group_item.nnz()) / static_cast<double>(ds.num_groups * ds.num_items);
  const auto split = split_groups(ds, {}, 17);
  const auto structure = build_structure(split.train);
  std::vector<double> base, ssl;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (Mode mode : {Mode::HHGR, Mode::S2}) {
      TrainConfig cfg;
      cfg.mode = mode;
      cfg.dim = 32;
      cfg.pretrain_epochs = 20;
      cfg.epochs = 60;
      cfg.patience = 10;
      cfg.lr = 5e-3;
      cfg.lr_group = 1e-3;
      cfg.seed = seed;
      const auto result = train(split, structure, cfg);
      const auto report = evaluate(result.params, structure, mode, split, EvalOptions{{20}, RecallDenominator::Min, 1});
      (mode == Mode::HHGR ? base : ssl).push_back(report.at(20).ndcg);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2.0;
  };
  const double m_base = median(base), m_ssl = median(ssl);
  std::size_t wins = 0;
  for (std::size_t k = 0; k < base.size(); ++k) wins += ssl[k] >= base[k];
  return {density <= 0.05 && m_ssl >= m_base,
          fmt("group-item density %.4f; median test NDCG@20 S2 %.4f vs HHGR %.4f (gap %+.4f), S2 >= HHGR on %zu/10 "
              "seeds, %.1fs",
              density, m_ssl, m_base, m_ssl - m_base, wins, seconds_since(t0))};
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(14);
  double worst = 0.0;
  std::size_t cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
    std::vector<double> scores(n);
    const bool coarse_scores = trial % 2 == 0;  // half the cases are tie-heavy
    for (auto& s : scores) {
      s = coarse_scores ? static_cast<double>(std::uniform_int_distribution<int>(0, 4)(rng))
                        : std::normal_distribution<double>()(rng);
    }
    std::vector<Id> excluded, relevant;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::uniform_real_distribution<double>()(rng);
      if (u < 0.2) excluded.push_back(static_cast<Id>(i));
      else if (u < 0.5) relevant.push_back(static_cast<Id>(i));
    }
    if (relevant.empty()) continue;
    ++cases;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n + 2)(rng);

    // oracle: repeated arg-max selection over the candidates
    std::vector<Id> pool;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::count(excluded.begin(), excluded.end(), static_cast<Id>(i))) pool.push_back(static_cast<Id>(i));
    }
    std::vector<Id> order;
    while (!pool.empty()) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < pool.size(); ++c) {
        if (scores[pool[c]] > scores[pool[best]]) best = c;  // strict: earlier (lower) id wins ties
      }
      order.push_back(pool[best]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    }
    double hits = 0, dcg = 0, idcg = 0;
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
      if (std::count(relevant.begin(), relevant.end(), order[r])) {
        hits += 1;
        dcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
      }
    }
    for (std::size_t r = 0; r < std::min(k, relevant.size()); ++r) idcg += std::log(2.0) / std::log(r + 2.0);
    const double oracle_recall = hits / static_cast<double>(std::min(k, relevant.size()));
    const double oracle_full = hits / static_cast<double>(relevant.size());
    const double oracle_ndcg = dcg / idcg;

    const auto ranked = rank_items(0, scores, excluded, relevant);
    worst = std::max({worst, std::abs(recall_at_k(ranked, k) - oracle_recall),
                      std::abs(recall_at_k(ranked, k, RecallDenominator::Full) - oracle_full),
                      std::abs(ndcg_at_k(ranked, k) - oracle_ndcg)});

    // the batch path must agree too
    Matrix m = Eigen::Map<const Eigen::RowVectorXd>(scores.data(), static_cast<Eigen::Index>(n));
    std::vector<std::pair<Id, Id>> ex;
    for (Id i : excluded) ex.emplace_back(0, i);
    const auto report = evaluate_scores(m, Holdout{{0}, {relevant}}, BinaryMatrix(1, n, ex),
                                        EvalOptions{{k}, RecallDenominator::Min, 1});
    worst = std::max({worst, std::abs(report.at(k).recall - oracle_recall), std::abs(report.at(k).ndcg - oracle_ndcg)});
  }
  return {worst <= 1e-12, fmt("%zu random instances, max deviation from brute force %.2e (limit 1e-12)", cases, worst)};
}

// ---------------------------------------------------------------------------

Outcome ablation_wiring() {
  // consecutive groups overlap in one user, so the projection is a path: no triangles
  std::vector<std::vector<Id>> membership;
  for (Id g = 0; g < 12; ++g) membership.push_back({static_cast<Id>(2 * g), static_cast<Id>(2 * g + 1),
                                                    static_cast<Id>(2 * g + 2)});
  const auto ds = testing::dataset_with_membership(25, 40, membership, 0.2, 9);
  const auto split = split_groups(ds, {}, 4);
  const auto structure = build_structure(split.train);
  const auto projection_edges = structure.projection.nonZeros();
  const auto motif_nnz = structure.motif.triangles.nonZeros();

  auto cfg = small_config(Mode::HHGR);
  cfg.epochs = 15;
  cfg.patience = 5;
  const auto full = train(split, structure, cfg);
  auto cfg_wg = cfg;
  cfg_wg.mode = Mode::WithoutGroup;
  cfg_wg.group_layers = 0;
  const auto wg = train(split, structure, cfg_wg);

  auto a = full.params.tensors();
  auto b = wg.params.tensors();
  auto an = full.params.tensor_names();
  auto bn = wg.params.tensor_names();
  std::size_t compared = 0, differing = 0;
  for (std::size_t i = 0; i < an.size(); ++i) {
    auto j = std::find(bn.begin(), bn.end(), an[i]);
    if (j == bn.end()) continue;
    ++compared;
    differing += !(*a[i] == *b[static_cast<std::size_t>(j - bn.begin())]);
  }
  const auto sa = forward_ssl(full.params, structure, full_views(structure), Mode::HHGR);
  const auto sb = forward_ssl(wg.params, structure, full_views(structure), Mode::WithoutGroup);
  const bool same_scores = group_item_logits(sa) == group_item_logits(sb);
  const EvalOptions opts{{20, 50}, RecallDenominator::Min, 1};
  const auto ma = evaluate(full.params, structure, Mode::HHGR, split, opts);
  const auto mb = evaluate(wg.params, structure, Mode::WithoutGroup, split, opts);
  bool same_metrics = true;
  for (std::size_t k : {20, 50}) {
    same_metrics = same_metrics && ma.at(k).ndcg == mb.at(k).ndcg && ma.at(k).recall == mb.at(k).recall;
  }
  bool same_log = full.log.steps.size() == wg.log.steps.size();
  for (std::size_t s = 0; same_log && s < full.log.steps.size(); ++s) {
    same_log = full.log.steps[s].total == wg.log.steps[s].total;
  }
  return {motif_nnz == 0 && projection_edges > 0 && differing == 0 && same_scores && same_metrics && same_log,
          fmt("projection edges %ld, motif nnz %ld; %zu shared tensors, %zu differ; scores %s, metrics %s, "
              "loss trace %s",
              static_cast<long>(projection_edges), static_cast<long>(motif_nnz), compared, differing,
              same_scores ? "identical" : "DIFFER", same_metrics ? "identical" : "DIFFER",
              same_log ? "identical" : "DIFFERS")};
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const auto ds = desk_dataset(23);
  const auto split = split_groups(ds, {}, 2);
  const auto dir = testing::scratch_dir("determinism");
  auto run = [&](std::uint64_t seed, const std::string& file) {
    auto cfg = small_config(Mode::S2);
    cfg.seed = seed;
    cfg.threads = 1;
    const auto result = train(split, cfg);
    auto shape = result.params.shape();
    shape.groups = ds.num_groups;
    save_checkpoint(dir / file, result.params, shape);
    return file_bytes(dir / file);
  };
  const auto first = run(5, "a.bin");
  const auto second = run(5, "b.bin");
  const auto other = run(6, "c.bin");
  std::filesystem::remove_all(dir);
  return {!first.empty() && first == second && first != other,
          fmt("two S2 runs with seed 5: %zu-byte checkpoints %s; seed 6 %s", first.size(),
              first == second ? "byte-identical" : "DIFFER", first != other ? "differs" : "is IDENTICAL")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"motif oracle", motif_oracle},
      {"propagation stochasticity", propagation_rows},
      {"gradient correctness", gradient_check},
      {"dropout semantics", dropout_semantics},
      {"loss decomposition", loss_decomposition},
      {"overfit sanity", overfit},
      {"ssl direction", ssl_direction},
      {"metric oracle", metric_oracle},
      {"ablation wiring", ablation_wiring},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    failures += !outcome.pass;
    std::printf("[%s] %s: %s\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

#include "hhgr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "hhgr/augment.hpp"
#include "hhgr/error.hpp"

namespace hhgr {

std::string_view stage_name(Stage stage) { return stage == Stage::Pretrain ? "pretrain" : "main"; }

// ---------------------------------------------------------------------------
// Scalar reference losses

namespace {

double pairwise(std::span<const double> pos, std::span<const double> neg) {
  if (pos.size() != neg.size()) throw ContractError("train: positive and negative score counts differ");
  double total = 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    const double deficit = pos[k] - neg[k] - 1.0;
    total += deficit * deficit;
  }
  return total;
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace

double loss_ui(std::span<const double> pos, std::span<const double> neg) { return pairwise(pos, neg); }
double loss_gi(std::span<const double> pos, std::span<const double> neg) { return pairwise(pos, neg); }

double discriminator(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                     const Matrix& weight) {
  if (a.size() != weight.rows() || b.size() != weight.cols()) {
    throw ContractError("train: discriminator dimensions do not conform");
  }
  return sigmoid(a.dot(weight * b));
}

std::vector<std::vector<std::size_t>> sample_contrast_negatives(std::size_t batch_size, std::size_t n,
                                                                std::mt19937_64& rng) {
  if (n < 1) throw SamplingError("sampling: contrastive negatives must be >= 1");
  if (batch_size <= n) {
    throw SamplingError("sampling: contrastive batch of " + std::to_string(batch_size) + " cannot supply " +
                        std::to_string(n) + " distinct negatives");
  }
  std::vector<std::vector<std::size_t>> out(batch_size);
  std::vector<std::size_t> pool(batch_size - 1);
  for (std::size_t i = 0; i < batch_size; ++i) {
    // partial Fisher-Yates over every index except i
    for (std::size_t k = 0, v = 0; v < batch_size; ++v) {
      if (v != i) pool[k++] = v;
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    out[i].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

double loss_uu(const Matrix& view_a, const Matrix& view_b, const Matrix& weight,
               const std::vector<std::vector<std::size_t>>& negatives) {
  if (view_a.rows() != view_b.rows() || static_cast<std::size_t>(view_a.rows()) != negatives.size()) {
    throw ContractError("train: contrastive views and negatives disagree in size");
  }
  const Matrix aw = view_a * weight;
  double total = 0.0;
  for (Eigen::Index i = 0; i < view_a.rows(); ++i) {
    total -= log_sigmoid(aw.row(i).dot(view_b.row(i)));
    for (auto j : negatives[static_cast<std::size_t>(i)]) {
      total -= log_sigmoid(-aw.row(static_cast<Eigen::Index>(j)).dot(view_b.row(i)));
    }
  }
  return total;
}

double loss_uu(const Matrix& view_a, const Matrix& view_b, const Matrix& weight, std::size_t n_neg,
               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return loss_uu(view_a, view_b, weight,
                 sample_contrast_negatives(static_cast<std::size_t>(view_a.rows()), n_neg, rng));
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const std::vector<const Matrix*>& params, AdamConstants constants) : c_(constants) {
  for (const auto* p : params) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                const std::vector<double>& learning_rates, const std::vector<std::string>& names) {
  if (params.size() != m_.size() || grads.size() != m_.size() || learning_rates.size() != m_.size()) {
    throw ContractError("adam: expected " + std::to_string(m_.size()) + " tensors");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].rows() != m_[k].rows() || grads[k].cols() != m_[k].cols() || params[k]->rows() != m_[k].rows() ||
        params[k]->cols() != m_[k].cols()) {
      throw ContractError("adam: shape mismatch for tensor " + (k < names.size() ? names[k] : std::to_string(k)));
    }
    if (!grads[k].allFinite()) {
      throw NumericalError("adam: non-finite gradient for " + (k < names.size() ? names[k] : std::to_string(k)) +
                           "; step rejected");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double correct1 = 1.0 - std::pow(c_.beta1, t);
  const double correct2 = 1.0 - std::pow(c_.beta2, t);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    m_[k] = c_.beta1 * m_[k] + (1.0 - c_.beta1) * grads[k];
    v_[k] = c_.beta2 * v_[k] + (1.0 - c_.beta2) * grads[k].cwiseAbs2();
    const double lr = learning_rates[k];
    const double eps = c_.epsilon;
    params[k]->array() -=
        lr * (m_[k].array() / correct1) / ((v_[k].array() / correct2).sqrt() + eps);
  }
}

// ---------------------------------------------------------------------------
// Objective

namespace {

ad::Var zero(ad::Tape& t, const char* label) { return t.constant(Matrix::Zero(1, 1), label); }

ad::Var pairwise_loss(ad::Tape& t, ad::Var subjects, ad::Var items, const std::vector<TrainingTriple>& triples,
                      const char* label) {
  std::vector<Id> who, pos, neg;
  for (const auto& tr : triples) {
    for (Id j : tr.negatives) {
      who.push_back(tr.subject);
      pos.push_back(tr.positive);
      neg.push_back(j);
    }
  }
  if (who.empty()) return zero(t, label);
  auto s = ad::gather_rows(t, subjects, who);
  auto sp = ad::sigmoid(t, ad::rowwise_dot(t, s, ad::gather_rows(t, items, pos)));
  auto sn = ad::sigmoid(t, ad::rowwise_dot(t, s, ad::gather_rows(t, items, neg)));
  return ad::sum(t, ad::square(t, ad::add_scalar(t, ad::sub(t, sp, sn), -1.0)));
}

ad::Var contrast_loss(ad::Tape& t, ad::Var a, ad::Var b, ad::Var w, const StepBatch& batch) {
  if (batch.contrast_users.empty()) return zero(t, "l_uu");
  if (batch.contrast_negatives.size() != batch.contrast_users.size()) {
    throw ContractError("train: contrastive negatives do not match the contrastive batch");
  }
  auto aw = ad::matmul(t, ad::gather_rows(t, a, batch.contrast_users), w);
  auto bb = ad::gather_rows(t, b, batch.contrast_users);
  auto pos = ad::rowwise_dot(t, aw, bb);
  std::vector<Id> neg_a, neg_b;
  for (std::size_t i = 0; i < batch.contrast_negatives.size(); ++i) {
    for (auto j : batch.contrast_negatives[i]) {
      neg_a.push_back(static_cast<Id>(j));
      neg_b.push_back(static_cast<Id>(i));
    }
  }
  auto log_pos = ad::sum(t, ad::log_sigmoid(t, pos));
  if (neg_a.empty()) return ad::scale(t, log_pos, -1.0);
  auto neg = ad::rowwise_dot(t, ad::gather_rows(t, aw, neg_a), ad::gather_rows(t, bb, neg_b));
  auto log_neg = ad::sum(t, ad::log_sigmoid(t, ad::scale(t, neg, -1.0)));
  return ad::scale(t, ad::add(t, log_pos, log_neg), -1.0);
}

}  // namespace

LossVars build_loss(ad::Tape& t, const ParamVars& p, const ForwardGraph& g, const StepBatch& batch, Mode mode,
                    Stage stage, double beta) {
  LossVars out;
  const bool contrast = uses_contrast(mode) && g.view_a && g.view_b;
  out.l_uu = contrast ? contrast_loss(t, *g.view_a, *g.view_b, p.disc_weight, batch) : zero(t, "l_uu");
  if (stage == Stage::Pretrain) {
    out.l_ui = zero(t, "l_ui");
    out.l_gi = zero(t, "l_gi");
    out.total = out.l_uu;
    return out;
  }
  out.l_ui = pairwise_loss(t, g.users, g.items, batch.user_triples, "l_ui");
  out.l_gi = pairwise_loss(t, g.groups, g.items, batch.group_triples, "l_gi");
  out.total = ad::add(t, ad::add(t, ad::scale(t, out.l_uu, beta), out.l_ui), out.l_gi);
  return out;
}

LossBreakdown evaluate_objective(const ModelParams& params, const GroupStructure& structure,
                                 const AugmentedViews& views, Mode mode, Stage stage, double beta,
                                 const StepBatch& batch, std::vector<Matrix>* grads) {
  ad::Tape tape;
  auto vars = bind_parameters(tape, params);
  auto graph = forward(tape, vars, structure, views, mode);
  auto loss = build_loss(tape, vars, graph, batch, mode, stage, beta);
  LossBreakdown out;
  out.l_ui = tape.scalar(loss.l_ui);
  out.l_gi = tape.scalar(loss.l_gi);
  out.l_uu = tape.scalar(loss.l_uu);
  out.total = tape.scalar(loss.total);
  // the pre-training objective is L_UU on its own
  out.beta = stage == Stage::Pretrain ? 1.0 : beta;
  if (grads) {
    tape.backward(loss.total);
    grads->clear();
    for (auto v : vars.all()) grads->push_back(tape.grad(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train: " + what); };
  auto positive_rate = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (dim < 1) fail("model.dim must be >= 1");
  if (batch_size < 1) fail("train.batch_size must be >= 1");
  if (negatives < 1) fail("train.negatives must be >= 1");
  if (contrast_negatives < 1) fail("ssl.negatives must be >= 1");
  if (!positive_rate(lr)) fail("train.lr must be a positive number");
  if (!positive_rate(lr_group)) fail("train.lr_group must be a positive number");
  if (!(coarse_rate >= 0.0 && coarse_rate < 1.0)) fail("ssl.coarse_rate must lie in [0, 1)");
  if (!(fine_rate >= 0.0 && fine_rate < 1.0)) fail("ssl.fine_rate must lie in [0, 1)");
  if (!(std::isfinite(beta) && beta >= 0.0)) fail("ssl.beta must be a non-negative number");
  if (validation_k < 1) fail("eval.validation_k must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
}

double TrainConfig::effective_beta() const { return uses_contrast(mode) ? beta : 0.0; }

TrainResult train(const SplitDataset& split, const TrainConfig& config) {
  config.validate();
  return train(split, build_structure(split.train, config.densify_threshold), config);
}

namespace {

template <typename T>
std::vector<T> chunk(const std::vector<T>& all, std::size_t index, std::size_t count) {
  const auto begin = index * all.size() / count;
  const auto end = (index + 1) * all.size() / count;
  return {all.begin() + static_cast<std::ptrdiff_t>(begin), all.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// Cycles through a reshuffled permutation of all users.
class ContrastCursor {
 public:
  ContrastCursor(std::size_t users, std::mt19937_64& rng) : order_(users), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = order_.size();
  }

  std::vector<Id> next(std::size_t count) {
    std::vector<Id> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<Id> order_;
  std::mt19937_64& rng_;
  std::size_t cursor_ = 0;
};

}  // namespace

TrainResult train(const SplitDataset& split, const GroupStructure& structure, const TrainConfig& config) {
  config.validate();
  const auto& ds = split.train;
  const Mode mode = config.mode;
  const bool contrast = uses_contrast(mode);
  const double beta = config.effective_beta();

  ModelShape shape{config.dim, config.user_layers, config.group_layers, ds.num_users, ds.num_items,
                   ds.num_groups};
  TrainResult result;
  result.params = ModelParams::initialize(shape, derive_seed(config.seed, "init"));
  ModelParams& params = result.params;
  const auto names = params.tensor_names();

  TripleSampler user_sampler(ds.user_item, config.negatives, derive_seed(config.seed, "user_triples"));
  TripleSampler group_sampler(ds.group_item, config.negatives, derive_seed(config.seed, "group_triples"));
  std::mt19937_64 contrast_rng(derive_seed(config.seed, "contrast"));
  ContrastCursor contrast_users(ds.num_users, contrast_rng);
  const std::size_t contrast_size = contrast ? std::min(config.batch_size, ds.num_users) : 0;

  const bool validate = !split.validation.groups.empty();
  EvalOptions eval_options{{config.validation_k}, config.recall_denominator, config.threads};
  ModelParams best = params;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t epoch_counter = 0;

  // Returns false once training must stop.
  auto run_epoch = [&](Stage stage, Adam& adam, const std::vector<double>& lrs) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t epoch = ++epoch_counter;

    std::optional<PropagationOperator> coarse_op, fine_op;
    AugmentedViews views;
    if (needs_coarse_view(mode)) {
      auto view = coarse_drop(structure.user_level, config.coarse_rate, derive_seed(config.seed, "coarse", epoch));
      coarse_op = propagation_operator(view.incidence, config.densify_threshold);
      views.coarse = &*coarse_op;
    }
    if (needs_fine_view(mode)) {
      auto view = fine_drop(structure.user_level, config.fine_rate, derive_seed(config.seed, "fine", epoch));
      fine_op = propagation_operator(view.incidence, config.densify_threshold);
      views.fine = &*fine_op;
    }

    std::vector<TrainingTriple> user_triples, group_triples;
    std::size_t steps = ceil_div(ds.num_users, config.batch_size);
    if (stage == Stage::Main) {
      user_triples = user_sampler.next_epoch();
      group_triples = group_sampler.next_epoch();
      steps = std::max<std::size_t>({ceil_div(user_triples.size(), config.batch_size),
                                     ceil_div(group_triples.size(), config.batch_size), 1});
    }

    EpochRecord record;
    record.epoch = epoch;
    record.stage = stage;
    record.loss.beta = stage == Stage::Pretrain ? 1.0 : beta;
    for (std::size_t s = 0; s < steps; ++s) {
      StepBatch batch;
      if (stage == Stage::Main) {
        batch.user_triples = chunk(user_triples, s, steps);
        batch.group_triples = chunk(group_triples, s, steps);
      }
      if (contrast) {
        batch.contrast_users = contrast_users.next(contrast_size);
        batch.contrast_negatives = sample_contrast_negatives(contrast_size, config.contrast_negatives, contrast_rng);
      }
      std::vector<Matrix> grads;
      try {
        auto loss = evaluate_objective(params, structure, views, mode, stage, beta, batch, &grads);
        if (!std::isfinite(loss.total)) throw NumericalError("train: total loss is not finite");
        adam.step(params.tensors(), grads, lrs, names);
        result.log.steps.push_back(loss);
        record.loss.l_ui += loss.l_ui;
        record.loss.l_gi += loss.l_gi;
        record.loss.l_uu += loss.l_uu;
        record.loss.total += loss.total;
        ++record.steps;
      } catch (const NumericalError& e) {
        result.log.diverged = true;
        result.log.diagnostic = "epoch " + std::to_string(epoch) + " step " + std::to_string(s + 1) + ": " + e.what();
        break;
      }
    }

    if (!result.log.diverged && stage == Stage::Main && validate) {
      auto logits = group_item_logits(forward_ssl(params, structure, full_views(structure), mode));
      record.validation = evaluate_scores(logits, split.validation, ds.group_item, eval_options);
      const double score = record.validation->at(config.validation_k).ndcg;
      if (score > best_score) {
        best_score = score;
        best = params;
        result.log.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(record);
    if (config.on_epoch) config.on_epoch(record, params);
    if (result.log.diverged) return false;
    return !(stage == Stage::Main && validate && config.patience > 0 && since_best >= config.patience);
  };

  bool running = true;
  if (contrast) {
    Adam adam(std::as_const(params).tensors());
    const std::vector<double> lrs(names.size(), config.lr);
    for (std::size_t e = 0; e < config.pretrain_epochs && running; ++e) running = run_epoch(Stage::Pretrain, adam, lrs);
  }
  if (running) {
    Adam adam(std::as_const(params).tensors());
    std::vector<double> lrs;
    for (const auto& n : names) lrs.push_back(is_group_level(n) ? config.lr_group : config.lr);
    for (std::size_t e = 0; e < config.epochs && running; ++e) running = run_epoch(Stage::Main, adam, lrs);
  }

  // Adam rejects the failing step before touching the parameters, so after a
  // divergence `params` still holds the last finite state.
  if (!result.log.diverged && validate && result.log.best_epoch) params = best;
  return result;
}

}  // namespace hhgr

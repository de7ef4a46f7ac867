#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hhgr/autodiff.hpp"
#include "hhgr/data.hpp"
#include "hhgr/eval.hpp"
#include "hhgr/model.hpp"

namespace hhgr {

struct LossBreakdown {
  double l_ui = 0.0;
  double l_gi = 0.0;
  double l_uu = 0.0;
  double total = 0.0;
  double beta = 0.0;
};

// ---------------------------------------------------------------------------
// Scalar reference losses

/// Sum over pairs k of (pos[k] - neg[k] - 1)^2. Each negative of a triple is
/// its own pair.
double loss_ui(std::span<const double> positive_scores, std::span<const double> negative_scores);
double loss_gi(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// sigmoid(a W b^T).
double discriminator(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                     const Matrix& weight);

/// `negatives[i]` holds `n` distinct batch indices different from i, drawn
/// uniformly. Throws SamplingError unless batch_size > n >= 1.
std::vector<std::vector<std::size_t>> sample_contrast_negatives(std::size_t batch_size, std::size_t n,
                                                                std::mt19937_64& rng);

/// -sum_i [log D(a_i, b_i) + sum_{j in negatives[i]} log(1 - D(a_j, b_i))] over the rows of `a`, `b`.
double loss_uu(const Matrix& view_a, const Matrix& view_b, const Matrix& weight,
               const std::vector<std::vector<std::size_t>>& negatives);
/// Same with negatives drawn by sample_contrast_negatives from `seed`.
double loss_uu(const Matrix& view_a, const Matrix& view_b, const Matrix& weight, std::size_t n_neg,
               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam with one step counter shared by all tensors.
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<const Matrix*>& params, AdamConstants constants = {});

  /// `learning_rates[k]` applies to `params[k]`. A non-finite gradient throws
  /// NumericalError naming the tensor before anything is updated.
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
            const std::vector<double>& learning_rates, const std::vector<std::string>& names = {});

  std::size_t steps() const noexcept { return step_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }
  const AdamConstants& constants() const noexcept { return c_; }

 private:
  AdamConstants c_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Differentiable objective

enum class Stage { Pretrain, Main };

/// Everything random about one optimisation step, fixed up front.
struct StepBatch {
  std::vector<TrainingTriple> user_triples;
  std::vector<TrainingTriple> group_triples;
  std::vector<Id> contrast_users;
  /// Indices into contrast_users.
  std::vector<std::vector<std::size_t>> contrast_negatives;
};

struct LossVars {
  ad::Var l_ui, l_gi, l_uu, total;
};

/// Records the losses of one step on `tape`. Terms that a stage or mode does not
/// use are recorded as zero constants.
LossVars build_loss(ad::Tape& tape, const ParamVars& params, const ForwardGraph& graph, const StepBatch& batch,
                    Mode mode, Stage stage, double beta);

/// Forward + loss for fixed views and batch. When `grads` is given it receives
/// the gradient of the total for every tensor in canonical order.
LossBreakdown evaluate_objective(const ModelParams& params, const GroupStructure& structure,
                                 const AugmentedViews& views, Mode mode, Stage stage, double beta,
                                 const StepBatch& batch, std::vector<Matrix>* grads = nullptr);

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based across both stages
  Stage stage = Stage::Main;
  std::size_t steps = 0;
  LossBreakdown loss;  // summed over the epoch's steps
  std::optional<MetricsReport> validation;
  double seconds = 0.0;
};

struct TrainConfig {
  Mode mode = Mode::S2;
  std::size_t dim = 64;
  std::size_t user_layers = 2;
  std::size_t group_layers = 1;
  std::size_t batch_size = 512;
  std::size_t negatives = 10;
  std::size_t contrast_negatives = 10;
  double lr = 5e-4;
  double lr_group = 1e-4;
  double coarse_rate = 0.2;
  double fine_rate = 0.3;
  double beta = 1.0;
  std::size_t pretrain_epochs = 20;
  std::size_t epochs = 100;
  /// Epochs without validation NDCG improvement before stopping; 0 disables.
  std::size_t patience = 10;
  std::size_t validation_k = 20;
  RecallDenominator recall_denominator = RecallDenominator::Min;
  std::size_t threads = 1;
  std::uint64_t seed = 2021;
  std::size_t densify_threshold = kDefaultDensifyThreshold;
  /// Called after every epoch with the current parameters (e.g. to append to
  /// a log file or probe the model).
  std::function<void(const EpochRecord&, const ModelParams&)> on_epoch;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
  /// beta actually used: 0 for modes without contrast.
  double effective_beta() const;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::vector<LossBreakdown> steps;
  std::optional<std::size_t> best_epoch;
  bool diverged = false;
  std::string diagnostic;
};

struct TrainResult {
  /// Best-validation parameters (or the final ones without validation). After
  /// divergence, the parameters left by the last accepted step.
  ModelParams params;
  TrainingLog log;
};

/// Two-stage schedule: contrastive pre-training (modes with contrast only),
/// then the joint objective with group-level tensors at `lr_group`.
TrainResult train(const SplitDataset& split, const TrainConfig& config);
TrainResult train(const SplitDataset& split, const GroupStructure& structure, const TrainConfig& config);

std::string_view stage_name(Stage stage);

}  // namespace hhgr

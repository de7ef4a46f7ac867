#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hhgr/autodiff.hpp"
#include "hhgr/data.hpp"
#include "hhgr/hypergraph.hpp"

namespace hhgr {

/// Run modes: the two full models plus the four ablations.
enum class Mode {
  HHGR,          // user-level tower on H, attention, motif group level
  S2,            // coarse + fine dropout towers with contrastive loss
  WithoutUser,   // HHGR-wu: group reps initialised from group-item interactions
  WithoutGroup,  // HHGR-wg: attention output is the final group rep
  FineOnly,      // HHGR-F: raw tower contrasted with the fine-dropout tower
  CoarseOnly,    // HHGR-C: coarse-dropout tower contrasted with the raw tower
};

std::string_view mode_name(Mode mode);
/// Accepts HHGR, S2, HHGR-wu, HHGR-wg, HHGR-F, HHGR-C. Throws ConfigError otherwise.
Mode parse_mode(std::string_view name);
bool uses_contrast(Mode mode);
bool needs_coarse_view(Mode mode);
bool needs_fine_view(Mode mode);

struct ModelShape {
  std::size_t dim = 64;
  std::size_t user_layers = 2;
  std::size_t group_layers = 1;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t groups = 0;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// All trainable tensors. Tower weights for every branch are always present so
/// one checkpoint layout serves every mode.
struct ModelParams {
  Matrix user_embed;            // |U| x d
  Matrix item_embed;            // |I| x d
  std::vector<Matrix> theta;    // raw user-level tower
  std::vector<Matrix> gamma;    // coarse-dropout tower
  std::vector<Matrix> phi;      // fine-dropout tower
  std::vector<Matrix> psi;      // group-level tower
  Matrix attn_weight;           // d x d
  Matrix attn_query;            // d x 1
  Matrix disc_weight;           // d x d

  /// Uniform(-1/sqrt(d), 1/sqrt(d)); each tensor draws from its own seeded
  /// stream so the values of one tensor do not depend on the layer counts.
  static ModelParams initialize(const ModelShape& shape, std::uint64_t seed);

  ModelShape shape() const;
  /// Canonical order: user_embed, item_embed, theta.*, gamma.*, phi.*, psi.*,
  /// attn_weight, attn_query, disc_weight.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::vector<std::string> tensor_names() const;
  bool all_finite() const;
};

/// Tensors trained at the group-level learning rate.
bool is_group_level(std::string_view tensor_name);

/// Fixed hypergraph structure derived from a training dataset.
struct GroupStructure {
  IncidenceMatrix user_level;
  PropagationOperator user_operator;
  CountMatrix projection;
  MotifAdjacency motif;
  PropagationOperator group_operator;
  /// Flattened membership: members of group g are member_users[member_offsets[g] ..
  /// member_offsets[g+1]).
  std::vector<std::size_t> member_offsets;
  std::vector<Id> member_users;
  /// Row-normalised training group-item matrix (group init for HHGR-wu).
  SparseMatrix group_item_mean;
};

GroupStructure build_structure(const InteractionDataset& train,
                               std::size_t densify_threshold = kDefaultDensifyThreshold);

/// Propagation operators of the augmented user-level views for one epoch.
struct AugmentedViews {
  const PropagationOperator* coarse = nullptr;
  const PropagationOperator* fine = nullptr;
};

/// Views for inference: zero drop rate, i.e. both views see the full H.
AugmentedViews full_views(const GroupStructure& structure);

/// Tape handles for each parameter tensor, in canonical order.
struct ParamVars {
  ad::Var user_embed, item_embed;
  std::vector<ad::Var> theta, gamma, phi, psi;
  ad::Var attn_weight, attn_query, disc_weight;

  std::vector<ad::Var> all() const;
};

ParamVars bind_parameters(ad::Tape& tape, const ModelParams& params);

/// Handles into a recorded forward pass.
struct ForwardGraph {
  ad::Var users;                   // P used for scoring
  std::optional<ad::Var> view_a;   // P' (contrast anchor)
  std::optional<ad::Var> view_b;   // P''
  std::optional<ad::Var> attention;
  ad::Var group_init;              // Z~ (attention output or interaction mean)
  ad::Var groups;                  // final group reps
  ad::Var items;
};

ForwardGraph forward(ad::Tape& tape, const ParamVars& params, const GroupStructure& structure,
                     const AugmentedViews& views, Mode mode);

/// Materialised forward values.
struct ForwardState {
  Matrix users;
  std::optional<Matrix> view_a;
  std::optional<Matrix> view_b;
  Eigen::VectorXd attention;  // flattened like GroupStructure::member_users; empty for HHGR-wu
  Matrix group_init;
  Matrix groups;
  Matrix items;
};

ForwardState forward_ssl(const ModelParams& params, const GroupStructure& structure,
                         const AugmentedViews& views, Mode mode);

/// Single user-level convolution A * P * W (no activation).
Matrix user_conv_layer(const PropagationOperator& op, const Matrix& input, const Matrix& weight);
/// Single group-level convolution A_g * Z * W.
Matrix group_conv_layer(const PropagationOperator& op, const Matrix& input, const Matrix& weight);

struct AttentionResult {
  Matrix groups;              // |G| x d
  Eigen::VectorXd weights;    // flattened per membership
};

AttentionResult attention_aggregate(const Matrix& users, const std::vector<std::vector<Id>>& membership,
                                    const Matrix& attn_weight, const Matrix& attn_query);

double sigmoid(double x);
double score_user_item(const Eigen::Ref<const Eigen::VectorXd>& user, const Eigen::Ref<const Eigen::VectorXd>& item);
double score_group_item(const Eigen::Ref<const Eigen::VectorXd>& group, const Eigen::Ref<const Eigen::VectorXd>& item);

/// Z Q^T; ranking by these logits equals ranking by the sigmoid scores
/// without saturation ties.
Matrix group_item_logits(const ForwardState& state);
/// sigmoid(Z Q^T) for every group and item.
Matrix group_item_scores(const ForwardState& state);

}  // namespace hhgr

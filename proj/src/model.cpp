#include "hhgr/model.hpp"

#include <cmath>
#include <random>

#include "hhgr/error.hpp"

namespace hhgr {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::HHGR: return "HHGR";
    case Mode::S2: return "S2";
    case Mode::WithoutUser: return "HHGR-wu";
    case Mode::WithoutGroup: return "HHGR-wg";
    case Mode::FineOnly: return "HHGR-F";
    case Mode::CoarseOnly: return "HHGR-C";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::HHGR, Mode::S2, Mode::WithoutUser, Mode::WithoutGroup, Mode::FineOnly,
                 Mode::CoarseOnly}) {
    if (mode_name(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected HHGR, S2, HHGR-wu, HHGR-wg, HHGR-F or HHGR-C)");
}

bool uses_contrast(Mode mode) {
  return mode == Mode::S2 || mode == Mode::FineOnly || mode == Mode::CoarseOnly;
}
bool needs_coarse_view(Mode mode) { return mode == Mode::S2 || mode == Mode::CoarseOnly; }
bool needs_fine_view(Mode mode) { return mode == Mode::S2 || mode == Mode::FineOnly; }

// ---------------------------------------------------------------------------
// Parameters

ModelParams ModelParams::initialize(const ModelShape& shape, std::uint64_t seed) {
  if (shape.dim == 0) throw ParameterError("model: embedding size must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.dim));
  auto draw = [&](std::size_t rows, std::size_t cols, const std::string& name) {
    std::mt19937_64 rng(derive_seed(seed, "init." + name));
    std::uniform_real_distribution<double> unit(-bound, bound);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = unit(rng);
    }
    return m;
  };
  const auto d = shape.dim;
  ModelParams p;
  p.user_embed = draw(shape.users, d, "user_embed");
  p.item_embed = draw(shape.items, d, "item_embed");
  for (std::size_t l = 0; l < shape.user_layers; ++l) {
    p.theta.push_back(draw(d, d, "theta." + std::to_string(l)));
    p.gamma.push_back(draw(d, d, "gamma." + std::to_string(l)));
    p.phi.push_back(draw(d, d, "phi." + std::to_string(l)));
  }
  for (std::size_t l = 0; l < shape.group_layers; ++l) p.psi.push_back(draw(d, d, "psi." + std::to_string(l)));
  p.attn_weight = draw(d, d, "attn_weight");
  p.attn_query = draw(d, 1, "attn_query");
  p.disc_weight = draw(d, d, "disc_weight");
  return p;
}

ModelShape ModelParams::shape() const {
  return {static_cast<std::size_t>(user_embed.cols()), theta.size(), psi.size(),
          static_cast<std::size_t>(user_embed.rows()), static_cast<std::size_t>(item_embed.rows()), 0};
}

std::vector<Matrix*> ModelParams::tensors() {
  std::vector<Matrix*> out{&user_embed, &item_embed};
  for (auto* tower : {&theta, &gamma, &phi, &psi}) {
    for (auto& w : *tower) out.push_back(&w);
  }
  out.insert(out.end(), {&attn_weight, &attn_query, &disc_weight});
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  auto mutable_view = const_cast<ModelParams*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> names{"user_embed", "item_embed"};
  auto add_tower = [&](const char* prefix, const std::vector<Matrix>& tower) {
    for (std::size_t l = 0; l < tower.size(); ++l) names.push_back(std::string(prefix) + "." + std::to_string(l));
  };
  add_tower("theta", theta);
  add_tower("gamma", gamma);
  add_tower("phi", phi);
  add_tower("psi", psi);
  names.insert(names.end(), {"attn_weight", "attn_query", "disc_weight"});
  return names;
}

bool ModelParams::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

bool is_group_level(std::string_view name) {
  return name.starts_with("psi.") || name == "attn_weight" || name == "attn_query";
}

// ---------------------------------------------------------------------------
// Structure

GroupStructure build_structure(const InteractionDataset& train, std::size_t densify_threshold) {
  GroupStructure s;
  s.user_level = build_user_level(train.membership, train.num_users);
  s.user_operator = propagation_operator(s.user_level, densify_threshold);
  s.projection = project_groups(s.user_level);
  s.motif = motif_adjacency(s.projection);
  s.group_operator = group_propagation_operator(s.motif, densify_threshold);

  s.member_offsets.push_back(0);
  for (const auto& members : train.membership) {
    s.member_users.insert(s.member_users.end(), members.begin(), members.end());
    s.member_offsets.push_back(s.member_users.size());
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t g = 0; g < train.num_groups; ++g) {
    auto row = train.group_item.row(static_cast<Id>(g));
    for (Id i : row) triplets.emplace_back(static_cast<Eigen::Index>(g), i, 1.0 / static_cast<double>(row.size()));
  }
  s.group_item_mean = SparseMatrix(static_cast<Eigen::Index>(train.num_groups),
                                   static_cast<Eigen::Index>(train.num_items));
  s.group_item_mean.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

AugmentedViews full_views(const GroupStructure& structure) {
  return {&structure.user_operator, &structure.user_operator};
}

// ---------------------------------------------------------------------------
// Forward

std::vector<ad::Var> ParamVars::all() const {
  std::vector<ad::Var> out{user_embed, item_embed};
  for (const auto* tower : {&theta, &gamma, &phi, &psi}) out.insert(out.end(), tower->begin(), tower->end());
  out.insert(out.end(), {attn_weight, attn_query, disc_weight});
  return out;
}

namespace {

ParamVars bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  auto names = params.tensor_names();
  auto tensors = params.tensors();
  std::vector<ad::Var> vars;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    vars.push_back(trainable ? tape.parameter(*tensors[k], names[k]) : tape.constant(*tensors[k], names[k]));
  }
  ParamVars p;
  std::size_t k = 0;
  p.user_embed = vars[k++];
  p.item_embed = vars[k++];
  for (auto [tower, n] : {std::pair{&p.theta, params.theta.size()}, {&p.gamma, params.gamma.size()},
                          {&p.phi, params.phi.size()}, {&p.psi, params.psi.size()}}) {
    for (std::size_t l = 0; l < n; ++l) tower->push_back(vars[k++]);
  }
  p.attn_weight = vars[k++];
  p.attn_query = vars[k++];
  p.disc_weight = vars[k++];
  return p;
}

ad::Var user_tower(ad::Tape& t, const PropagationOperator& op, ad::Var input,
                   const std::vector<ad::Var>& weights) {
  ad::Var x = input;
  for (ad::Var w : weights) x = ad::matmul(t, ad::propagate(t, op, x), w);
  return x;
}

const PropagationOperator& require_view(const PropagationOperator* view, const char* which, Mode mode) {
  if (!view) {
    throw ContractError(std::string("model: mode ") + std::string(mode_name(mode)) + " needs the " + which +
                        "-dropout view");
  }
  return *view;
}

}  // namespace

ParamVars bind_parameters(ad::Tape& tape, const ModelParams& params) { return bind(tape, params, true); }

ForwardGraph forward(ad::Tape& t, const ParamVars& p, const GroupStructure& s, const AugmentedViews& views,
                     Mode mode) {
  ForwardGraph out;
  out.items = p.item_embed;
  switch (mode) {
    case Mode::HHGR:
    case Mode::WithoutGroup:
      out.users = user_tower(t, s.user_operator, p.user_embed, p.theta);
      break;
    case Mode::WithoutUser:
      out.users = p.user_embed;
      break;
    case Mode::S2:
      out.view_a = user_tower(t, require_view(views.coarse, "coarse", mode), p.user_embed, p.gamma);
      out.view_b = user_tower(t, require_view(views.fine, "fine", mode), p.user_embed, p.phi);
      break;
    case Mode::FineOnly:
      out.view_a = user_tower(t, s.user_operator, p.user_embed, p.theta);
      out.view_b = user_tower(t, require_view(views.fine, "fine", mode), p.user_embed, p.phi);
      break;
    case Mode::CoarseOnly:
      out.view_a = user_tower(t, require_view(views.coarse, "coarse", mode), p.user_embed, p.gamma);
      out.view_b = user_tower(t, s.user_operator, p.user_embed, p.theta);
      break;
  }
  if (out.view_a) out.users = ad::add(t, *out.view_a, *out.view_b);

  if (mode == Mode::WithoutUser) {
    out.group_init = ad::sparse_matmul(t, s.group_item_mean, p.item_embed);
  } else {
    ad::Var members = ad::gather_rows(t, out.users, s.member_users);
    ad::Var logits = ad::matmul(t, ad::matmul(t, members, p.attn_weight), p.attn_query);
    ad::Var alpha = ad::segment_softmax(t, logits, s.member_offsets);
    out.attention = alpha;
    out.group_init = ad::segment_weighted_sum(t, members, alpha, s.member_offsets);
  }

  out.groups = out.group_init;
  if (mode != Mode::WithoutGroup && !p.psi.empty()) {
    ad::Var z = out.group_init;
    for (ad::Var w : p.psi) z = ad::matmul(t, ad::propagate(t, s.group_operator, z), w);
    out.groups = ad::add(t, z, out.group_init);
  }
  return out;
}

ForwardState forward_ssl(const ModelParams& params, const GroupStructure& structure,
                         const AugmentedViews& views, Mode mode) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  auto graph = forward(tape, vars, structure, views, mode);
  ForwardState state;
  state.users = tape.value(graph.users);
  if (graph.view_a) state.view_a = tape.value(*graph.view_a);
  if (graph.view_b) state.view_b = tape.value(*graph.view_b);
  if (graph.attention) state.attention = tape.value(*graph.attention).col(0);
  state.group_init = tape.value(graph.group_init);
  state.groups = tape.value(graph.groups);
  state.items = tape.value(graph.items);
  return state;
}

// ---------------------------------------------------------------------------
// Standalone pieces

namespace {

void require_conformant(const PropagationOperator& op, const Matrix& input, const Matrix& weight) {
  if (static_cast<std::size_t>(input.rows()) != op.size() || input.cols() != weight.rows()) {
    throw ContractError("model: convolution shapes do not conform (operator " + std::to_string(op.size()) +
                        ", input " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                        ", weight " + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) + ")");
  }
}

}  // namespace

Matrix user_conv_layer(const PropagationOperator& op, const Matrix& input, const Matrix& weight) {
  require_conformant(op, input, weight);
  return op.apply(input) * weight;
}

Matrix group_conv_layer(const PropagationOperator& op, const Matrix& input, const Matrix& weight) {
  require_conformant(op, input, weight);
  return op.apply(input) * weight;
}

AttentionResult attention_aggregate(const Matrix& users, const std::vector<std::vector<Id>>& membership,
                                    const Matrix& attn_weight, const Matrix& attn_query) {
  ad::Tape t;
  std::vector<std::size_t> offsets{0};
  std::vector<Id> flat;
  for (std::size_t g = 0; g < membership.size(); ++g) {
    if (membership[g].empty()) throw ContractError("model: group " + std::to_string(g) + " has no members");
    flat.insert(flat.end(), membership[g].begin(), membership[g].end());
    offsets.push_back(flat.size());
  }
  auto members = ad::gather_rows(t, t.constant(users), flat);
  auto logits = ad::matmul(t, ad::matmul(t, members, t.constant(attn_weight)), t.constant(attn_query));
  auto alpha = ad::segment_softmax(t, logits, offsets);
  auto z = ad::segment_weighted_sum(t, members, alpha, offsets);
  return {t.value(z), t.value(alpha).col(0)};
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double score_user_item(const Eigen::Ref<const Eigen::VectorXd>& user, const Eigen::Ref<const Eigen::VectorXd>& item) {
  if (user.size() != item.size()) throw ContractError("model: score vectors differ in dimension");
  return sigmoid(user.dot(item));
}

double score_group_item(const Eigen::Ref<const Eigen::VectorXd>& group, const Eigen::Ref<const Eigen::VectorXd>& item) {
  return score_user_item(group, item);
}

Matrix group_item_logits(const ForwardState& state) { return state.groups * state.items.transpose(); }

Matrix group_item_scores(const ForwardState& state) {
  return group_item_logits(state).unaryExpr([](double x) { return sigmoid(x); });
}

}  // namespace hhgr

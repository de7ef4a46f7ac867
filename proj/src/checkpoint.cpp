#include "hhgr/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "hhgr/error.hpp"

namespace hhgr {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <typename T>
void put(std::ostream& os, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw ValidationError("checkpoint: " + path.string() + " is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelShape& shape) {
  auto actual = params.shape();
  actual.groups = shape.groups;
  if (!(actual == shape)) {
    throw ContractError("checkpoint: parameters (" + describe_shape(actual) + ") do not match header (" +
                        describe_shape(shape) + ")");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot write " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  for (std::size_t v : {shape.dim, shape.user_layers, shape.group_layers, shape.users, shape.items, shape.groups}) {
    put<std::uint64_t>(os, v);
  }
  for (const Matrix* t : params.tensors()) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) put<float>(os, static_cast<float>((*t)(r, c)));
    }
  }
  if (!os) throw Error("checkpoint: failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("checkpoint: cannot open " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ValidationError("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: " + path.string() + " has unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  for (std::size_t* field : {&ck.shape.dim, &ck.shape.user_layers, &ck.shape.group_layers, &ck.shape.users,
                             &ck.shape.items, &ck.shape.groups}) {
    *field = static_cast<std::size_t>(get<std::uint64_t>(is, path));
  }
  if (ck.shape.dim == 0) throw ValidationError("checkpoint: " + path.string() + " declares d=0");
  const std::uint64_t d = ck.shape.dim;
  const std::uint64_t floats =
      (ck.shape.users + ck.shape.items) * d + (3 * ck.shape.user_layers + ck.shape.group_layers + 2) * d * d + d;
  const auto header_bytes = is.tellg();
  is.seekg(0, std::ios::end);
  const auto payload = static_cast<std::uint64_t>(is.tellg() - header_bytes);
  if (payload != floats * sizeof(float)) {
    throw ValidationError("checkpoint: " + path.string() + " holds " + std::to_string(payload) +
                          " payload bytes, header implies " + std::to_string(floats * sizeof(float)));
  }
  is.seekg(header_bytes);

  auto make = [&](std::size_t rows, std::size_t cols) {
    return Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  };
  auto& p = ck.params;
  p.user_embed = make(ck.shape.users, d);
  p.item_embed = make(ck.shape.items, d);
  p.theta.assign(ck.shape.user_layers, make(d, d));
  p.gamma.assign(ck.shape.user_layers, make(d, d));
  p.phi.assign(ck.shape.user_layers, make(d, d));
  p.psi.assign(ck.shape.group_layers, make(d, d));
  p.attn_weight = make(d, d);
  p.attn_query = make(d, 1);
  p.disc_weight = make(d, d);
  for (Matrix* t : p.tensors()) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) (*t)(r, c) = static_cast<double>(get<float>(is, path));
    }
  }
  if (!p.all_finite()) throw ValidationError("checkpoint: " + path.string() + " contains non-finite values");
  return ck;
}

std::string describe_shape(const ModelShape& s) {
  return "d=" + std::to_string(s.dim) + " L_u=" + std::to_string(s.user_layers) + " L_g=" +
         std::to_string(s.group_layers) + " users=" + std::to_string(s.users) + " items=" + std::to_string(s.items) +
         " groups=" + std::to_string(s.groups);
}

void require_compatible(const ModelShape& checkpoint, const InteractionDataset& ds) {
  if (checkpoint.users != ds.num_users || checkpoint.items != ds.num_items || checkpoint.groups != ds.num_groups) {
    throw ValidationError("checkpoint: dimension mismatch: checkpoint has " + describe_shape(checkpoint) +
                          ", dataset has users=" + std::to_string(ds.num_users) + " items=" +
                          std::to_string(ds.num_items) + " groups=" + std::to_string(ds.num_groups));
  }
}

nlohmann::json checkpoint_sidecar(const ModelParams& params, const ModelShape& shape,
                                  const nlohmann::json& hyperparameters) {
  nlohmann::json j;
  j["format"] = {{"magic", std::string(kCheckpointMagic, sizeof(kCheckpointMagic))},
                 {"version", kCheckpointVersion},
                 {"dtype", "float32"},
                 {"byte_order", "little"}};
  j["shape"] = {{"d", shape.dim},         {"L_u", shape.user_layers}, {"L_g", shape.group_layers},
                {"users", shape.users},   {"items", shape.items},     {"groups", shape.groups}};
  auto tensors = nlohmann::json::array();
  const auto names = params.tensor_names();
  const auto values = params.tensors();
  for (std::size_t k = 0; k < names.size(); ++k) {
    tensors.push_back({{"name", names[k]}, {"rows", values[k]->rows()}, {"cols", values[k]->cols()}});
  }
  j["tensors"] = tensors;
  j["hyperparameters"] = hyperparameters;
  return j;
}

}  // namespace hhgr

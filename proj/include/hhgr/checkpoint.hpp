#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "hhgr/data.hpp"
#include "hhgr/model.hpp"

namespace hhgr {

// Binary layout, all integers little-endian:
//   char[8]  magic "HHGRCKPT"
//   uint32   version (1)
//   uint64   d, L_u, L_g, |U|, |I|, |G|
// followed by every tensor in ModelParams canonical order as row-major
// 32-bit IEEE floats.
inline constexpr char kCheckpointMagic[8] = {'H', 'H', 'G', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelShape shape;
  ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelShape& shape);
/// Throws ValidationError for a bad magic, unknown version or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// "d=64 L_u=2 L_g=1 users=200 items=500 groups=80"
std::string describe_shape(const ModelShape& shape);

/// Throws ValidationError naming both shapes when the checkpoint was trained
/// for different user/item/group counts.
void require_compatible(const ModelShape& checkpoint, const InteractionDataset& ds);

/// Tensor names and shapes plus the caller's hyperparameters.
nlohmann::json checkpoint_sidecar(const ModelParams& params, const ModelShape& shape,
                                  const nlohmann::json& hyperparameters);

}  // namespace hhgr

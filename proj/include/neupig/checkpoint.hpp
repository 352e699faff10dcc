#pragma once

#include "neupig/trainer.hpp"

#include <filesystem>
#include <string>

namespace neupig {

// Binary layout, little-endian throughout:
//   "NPIGCKPT" u32 version
//   sections: char[4] tag, u64 payload bytes, payload
//     CONF  resolved config text
//     META  u64 seed, i32 epoch, i32 key (1-based), i32 frames,
//           f64 center[3], f64 scale
//     GRID  u32 L, u32 C, u32 res[L], u32 normal res, u32 normal C,
//           f32 features (levels in order, then the normal grid),
//           node-major with x fastest
//     MLPP  u32 layers; per layer u32 rows, u32 cols, f32 weight (row-major),
//           f32 bias
//     TENC  u32 variant, u32 M, u32 hidden, u32 nB, f32 B[nB], u32 nP, f32 P[nP]
//     ADAM  u32 groups; per group u64 n, f32 m[n], f32 v[n]
//     CDET  u32 frames, f64 detached per-frame Chamfer values
inline constexpr char kCheckpointMagic[9] = "NPIGCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::string config_text;
  std::uint64_t seed = 0;
  int epoch = 0;
  int key = 1;
  int frames = 0;
  NormalizationTransform normalization;
};

template <typename T>
void write_checkpoint(const std::filesystem::path& path, const TrainState<T>& state,
                      const std::string& config_text, const NormalizationTransform& xf);

// Loads into a state already initialized with the same shapes.
template <typename T>
CheckpointInfo read_checkpoint(const std::filesystem::path& path, TrainState<T>& state);

}  // namespace neupig

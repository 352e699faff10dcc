#pragma once

#include "neupig/evalsynth.hpp"
#include "neupig/trainer.hpp"

#include <filesystem>
#include <string>

namespace neupig {

enum class Precision { F32, F64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

// Everything a run needs. Serialized as flat `key = value` lines; `#` starts
// a comment.
struct RunConfig {
  TrainConfig train;
  Precision precision = Precision::F32;
  int threads = 0;  // 0 keeps the OpenMP default

  std::string clouds_dir;      // per-frame PLY clouds
  std::string reference_mesh;  // keyframe mesh (OBJ or PLY)
  std::string gt_dir;          // optional GT meshes for metrics
  std::string out_dir = "neupig_out";

  bool synthetic = false;  // generate the input instead of reading it
  SynthConfig synth;

  bool write_checkpoint = true;
};

// Unknown keys and malformed values raise ErrorKind::Parse.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Fully resolved config, defaults included; parse_config(emit_config(c))
// reproduces c.
std::string emit_config(const RunConfig& cfg);

}  // namespace neupig

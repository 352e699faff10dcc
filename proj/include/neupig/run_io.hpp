#pragma once

#include "neupig/config.hpp"
#include "neupig/evalsynth.hpp"
#include "neupig/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace neupig {

// Columns: epoch,total,L_def,L_iso,cd_1..cd_T. Values use 17 significant
// digits so reruns can be compared byte for byte.
std::string loss_csv(const std::vector<LossBreakdown>& history);

// One line per frame and an aggregate line. CD is listed raw and x1e5.
std::string format_metric_report(const MetricReport& r);

// Trajectory file: "NPTRAJ01", u32 frames, u32 vertices, then
// frames x vertices x 3 little-endian f32, frame-major.
void write_trajectories(const std::filesystem::path& path,
                        const std::vector<std::vector<Vec3d>>& traj);
std::vector<std::vector<Vec3d>> read_trajectories(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

// Frame files in a directory, ordered by their numeric suffix.
PointCloudSequence read_cloud_sequence(const std::filesystem::path& dir);
std::vector<TriMesh> read_mesh_sequence(const std::filesystem::path& dir);

// cloud_%04d.ply, gt_%04d.obj and trajectories.bin.
void write_synthetic(const std::filesystem::path& dir, const SyntheticSequence& seq);

std::string frame_name(const char* prefix, int frame_1based, const char* ext);

struct ReconstructInputs {
  PointCloudSequence clouds;
  std::optional<TriMesh> reference;  // original coordinates
  std::vector<TriMesh> gt_meshes;    // optional; reference falls back to gt[key]
  bool gt_has_correspondence = false;
};

struct ReconstructOutput {
  RunResult result;
  NormalizationTransform normalization;
  std::vector<TriMesh> meshes;  // original coordinates
  std::optional<MetricReport> metrics;
};

// Normalizes, selects the keyframe, trains and evaluates. Outputs are written
// to cfg.out_dir when `write_outputs` is set.
ReconstructOutput reconstruct(const RunConfig& cfg, const ReconstructInputs& inputs,
                              bool write_outputs);

// Loads the inputs a config points at (or generates them when synthetic).
ReconstructInputs load_inputs(const RunConfig& cfg);

}  // namespace neupig

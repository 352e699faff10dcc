#include "neupig/run_io.hpp"

#include "neupig/checkpoint.hpp"
#include "neupig/mesh_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace neupig {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string frame_name(const char* prefix, int frame, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", prefix, frame, ext);
  return buf;
}

std::string loss_csv(const std::vector<LossBreakdown>& history) {
  std::ostringstream out;
  out << "epoch,total,L_def,L_iso";
  const std::size_t T = history.empty() ? 0 : history.front().frame_cd.size();
  for (std::size_t t = 1; t <= T; ++t) out << ",cd_" << t;
  out << "\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& h = history[e];
    out << e + 1 << "," << g17(h.total) << "," << g17(h.deformation) << "," << g17(h.isometry);
    for (double v : h.frame_cd) out << "," << g17(v);
    out << "\n";
  }
  return out.str();
}

std::string format_metric_report(const MetricReport& r) {
  std::ostringstream out;
  char buf[256];
  out << "# cd: bidirectional mean squared nearest-vertex distance\n";
  out << "# nc: symmetric mean absolute cosine of nearest-vertex normals\n";
  out << "# fscore: threshold " << kFscoreRatio * 100.0
      << "% of the ground-truth bounding-box diagonal, per frame\n";
  if (r.has_corr)
    out << "# corr: mean trajectory distance, keyframe " << r.key + 1
        << " matched once by nearest vertex\n";
  out << "frame cd cd_x1e5 nc fscore fscore_tau corr\n";
  auto line = [&](const std::string& name, const FrameMetrics& f) {
    std::snprintf(buf, sizeof buf, "%s %.9e %.6f %.6f %.6f %.6e %s\n", name.c_str(), f.cd,
                  f.cd * 1e5, f.nc, f.fscore, f.fscore_tau,
                  r.has_corr ? g17(f.corr).c_str() : "nan");
    out << buf;
  };
  for (std::size_t t = 0; t < r.frames.size(); ++t) line(std::to_string(t + 1), r.frames[t]);
  line("mean", r.mean);
  std::snprintf(buf, sizeof buf, "# seconds %.3f\n", r.seconds);
  out << buf;
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

void write_trajectories(const std::filesystem::path& path,
                        const std::vector<std::vector<Vec3d>>& traj) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  const std::uint32_t T = static_cast<std::uint32_t>(traj.size());
  const std::uint32_t N = T ? static_cast<std::uint32_t>(traj.front().size()) : 0;
  f.write("NPTRAJ01", 8);
  f.write(reinterpret_cast<const char*>(&T), 4);
  f.write(reinterpret_cast<const char*>(&N), 4);
  for (const auto& frame : traj) {
    require(frame.size() == N, "trajectories: vertex count changes over time");
    for (const auto& v : frame)
      for (int a = 0; a < 3; ++a) {
        const float x = static_cast<float>(v[a]);
        f.write(reinterpret_cast<const char*>(&x), 4);
      }
  }
  if (!f) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::vector<std::vector<Vec3d>> read_trajectories(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read '" + path.string() + "'");
  char magic[8];
  std::uint32_t T = 0, N = 0;
  f.read(magic, 8);
  f.read(reinterpret_cast<char*>(&T), 4);
  f.read(reinterpret_cast<char*>(&N), 4);
  if (!f || std::memcmp(magic, "NPTRAJ01", 8) != 0)
    fail(ErrorKind::Parse, "'" + path.string() + "' is not a trajectory file");
  std::vector<std::vector<Vec3d>> out(T, std::vector<Vec3d>(N));
  for (auto& frame : out)
    for (auto& v : frame)
      for (int a = 0; a < 3; ++a) {
        float x;
        f.read(reinterpret_cast<char*>(&x), 4);
        v[a] = x;
      }
  if (!f) fail(ErrorKind::Parse, "'" + path.string() + "' is truncated");
  return out;
}

PointCloudSequence read_cloud_sequence(const std::filesystem::path& dir) {
  const auto files = io::list_frame_files(dir, {".ply"});
  if (files.empty()) fail(ErrorKind::Io, "no .ply clouds in '" + dir.string() + "'");
  PointCloudSequence out;
  for (const auto& p : files) out.push_back(io::read_ply_cloud(p));
  return out;
}

std::vector<TriMesh> read_mesh_sequence(const std::filesystem::path& dir) {
  // OBJ wins when present: a synthetic bundle keeps its PLY clouds alongside.
  auto files = io::list_frame_files(dir, {".obj"});
  if (files.empty()) files = io::list_frame_files(dir, {".ply"});
  if (files.empty()) fail(ErrorKind::Io, "no .obj/.ply meshes in '" + dir.string() + "'");
  std::vector<TriMesh> out;
  for (const auto& p : files) out.push_back(io::read_mesh(p));
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticSequence& seq) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
  for (std::size_t t = 0; t < seq.clouds.size(); ++t) {
    const int f = static_cast<int>(t) + 1;
    io::write_ply_cloud(dir / frame_name("cloud", f, "ply"), seq.clouds[t]);
    io::write_obj_mesh(dir / frame_name("gt", f, "obj"), seq.gt_meshes[t]);
  }
  write_trajectories(dir / "trajectories.bin", seq.trajectories);
}

ReconstructInputs load_inputs(const RunConfig& cfg) {
  ReconstructInputs in;
  if (cfg.synthetic) {
    auto seq = gen_sequence(cfg.synth);
    in.clouds = std::move(seq.clouds);
    in.gt_meshes = std::move(seq.gt_meshes);
    in.gt_has_correspondence = true;
    if (!cfg.reference_mesh.empty()) in.reference = io::read_mesh(cfg.reference_mesh);
    return in;
  }
  if (cfg.clouds_dir.empty())
    fail(ErrorKind::InvalidArgument, "clouds_dir is required unless synthetic = true");
  if (!std::filesystem::is_directory(cfg.clouds_dir))
    fail(ErrorKind::Io, "input directory '" + cfg.clouds_dir + "' does not exist");
  in.clouds = read_cloud_sequence(cfg.clouds_dir);
  if (!cfg.gt_dir.empty()) in.gt_meshes = read_mesh_sequence(cfg.gt_dir);
  if (!cfg.reference_mesh.empty())
    in.reference = io::read_mesh(cfg.reference_mesh);
  else if (in.gt_meshes.empty())
    fail(ErrorKind::InvalidArgument, "reference_mesh is required for non-synthetic input");
  if (!in.gt_meshes.empty()) {
    in.gt_has_correspondence = true;
    for (const auto& m : in.gt_meshes)
      if (m.vertices.size() != in.gt_meshes.front().vertices.size() ||
          m.faces != in.gt_meshes.front().faces)
        in.gt_has_correspondence = false;
  }
  return in;
}

namespace {

template <typename T>
ReconstructOutput reconstruct_as(const RunConfig& cfg, const ReconstructInputs& in,
                                 bool write_outputs) {
  ReconstructOutput out;
  auto [clouds, xf] = normalize_sequence(in.clouds);
  out.normalization = xf;
  const int T_frames = static_cast<int>(clouds.size());
  if (!in.gt_meshes.empty() && static_cast<int>(in.gt_meshes.size()) != T_frames)
    fail(ErrorKind::InvalidArgument,
         "ground truth has " + std::to_string(in.gt_meshes.size()) + " frames, input has " +
             std::to_string(T_frames));

  KeyframeScores scores =
      select_keyframe(clouds, cfg.train.occupancy_resolution, cfg.train.keyframe_bias);
  if (cfg.train.keyframe > 0) {
    if (cfg.train.keyframe > T_frames)
      fail(ErrorKind::InvalidArgument, "keyframe " + std::to_string(cfg.train.keyframe) +
                                           " exceeds frame count " + std::to_string(T_frames));
    scores.key = cfg.train.keyframe;
  }
  const int key = scores.key - 1;

  TriMesh ref;
  if (in.reference)
    ref = *in.reference;
  else if (!in.gt_meshes.empty())
    ref = in.gt_meshes[key];
  else
    fail(ErrorKind::InvalidArgument, "no reference mesh");
  apply_normalization(xf, ref);
  finalize_mesh(ref);

  const TrainData<T> data = make_train_data<T>(clouds, ref);
  TrainState<T> state;
  out.result = run(data, cfg.train, key, &state);
  out.result.key_scores = scores;

  for (const auto& frame : out.result.frames) {
    TriMesh m;
    m.faces = ref.faces;
    for (const auto& v : frame) m.vertices.push_back(xf.invert(v));
    finalize_mesh(m);
    out.meshes.push_back(std::move(m));
  }
  if (!in.gt_meshes.empty()) {
    const bool corr = in.gt_has_correspondence;
    out.metrics = evaluate_sequence(out.meshes, in.gt_meshes, key, corr);
  }

  if (write_outputs) {
    const std::filesystem::path dir = cfg.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
    const std::string conf = emit_config(cfg);
    write_text(dir / "config.resolved", conf);
    write_text(dir / "loss.csv", loss_csv(out.result.history));
    for (std::size_t t = 0; t < out.meshes.size(); ++t)
      io::write_obj_mesh(dir / frame_name("frame", static_cast<int>(t) + 1, "obj"), out.meshes[t]);
    if (cfg.write_checkpoint) write_checkpoint(dir / "checkpoint.bin", state, conf, xf);

    std::ostringstream rep;
    rep << "seed " << cfg.train.seed << "\n";
    rep << "precision " << to_string(cfg.precision) << "\n";
    rep << "frames " << T_frames << "\n";
    rep << "vertices " << ref.vertices.size() << "\n";
    rep << "keyframe " << scores.key << "\n";
    rep << "epochs " << cfg.train.epochs << "\n";
    rep << "chamfer " << (std::isinf(cfg.train.objective.chamfer.truncation)
                              ? std::string("plain")
                              : "truncated at " + std::to_string(cfg.train.objective.chamfer.truncation))
        << "\n";
    rep << "seconds " << out.result.seconds << "\n";
    if (!out.result.history.empty()) {
      const auto& h = out.result.history.back();
      rep << "final_total " << h.total << "\nfinal_L_def " << h.deformation << "\nfinal_L_iso "
          << h.isometry << "\n";
    }
    write_text(dir / "report.txt", rep.str());
    if (out.metrics) write_text(dir / "metrics.txt", format_metric_report(*out.metrics));
  }
  return out;
}

}  // namespace

ReconstructOutput reconstruct(const RunConfig& cfg, const ReconstructInputs& inputs,
                              bool write_outputs) {
  if (cfg.threads > 0) kernels::set_worker_count(cfg.threads);
  return cfg.precision == Precision::F64 ? reconstruct_as<double>(cfg, inputs, write_outputs)
                                         : reconstruct_as<float>(cfg, inputs, write_outputs);
}

}  // namespace neupig

#include "neupig/config.hpp"
#include "neupig/kernels.hpp"
#include "neupig/mesh_io.hpp"
#include "neupig/run_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace neupig;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Parse: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Numeric: return 4;
  }
  return 1;
}

const char* kind_label(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "usage";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
  }
  return "error";
}

struct ReconstructFlags {
  std::string config;
  bool fast = false, full = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, epochs, levels, keyframe;
  std::optional<std::string> precision, time_enc, rotation, delta, omega;
  bool no_precond = false, no_normal_latent = false, no_iso = false;
  std::optional<std::string> clouds, reference, gt, out, synthetic;
};

RunConfig resolve(const ReconstructFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.fast && f.full) fail(ErrorKind::InvalidArgument, "--fast and --full are exclusive");
  if (f.fast) c.train.epochs = kFastEpochs;
  if (f.full) c.train.epochs = kFullEpochs;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.seed) c.train.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.precision) c.precision = parse_precision(*f.precision);
  if (f.no_precond) c.train.precondition = false;
  if (f.no_normal_latent) c.train.normal_latent = false;
  if (f.no_iso) c.train.objective.use_isometry = false;
  if (f.levels) {
    c.train.grid.levels = *f.levels;
    c.train.level_lambdas.clear();
    c.train.level_lrs.clear();
  }
  if (f.keyframe) c.train.keyframe = *f.keyframe;
  if (f.time_enc) c.train.time.variant = parse_time_encoding(*f.time_enc);
  if (f.rotation) c.train.rotation = parse_rotation(*f.rotation);
  if (f.delta) c.train.objective.delta = parse_delta(*f.delta);
  if (f.omega) c.train.objective.omega = parse_omega(*f.omega);
  if (f.clouds) c.clouds_dir = *f.clouds;
  if (f.reference) c.reference_mesh = *f.reference;
  if (f.gt) c.gt_dir = *f.gt;
  if (f.out) c.out_dir = *f.out;
  if (f.synthetic) {
    c.synthetic = true;
    c.synth.kind = parse_motion(*f.synthetic);
  }
  c.train.validate();
  return c;
}

int cmd_reconstruct(const ReconstructFlags& f) {
  const RunConfig cfg = resolve(f);
  const auto inputs = load_inputs(cfg);
  const auto out = reconstruct(cfg, inputs, true);
  std::printf("keyframe %d\n", out.result.key);
  if (!out.result.history.empty()) {
    const auto& h = out.result.history.back();
    std::printf("final loss %.6e (deformation %.6e, isometry %.6e)\n", h.total, h.deformation,
                h.isometry);
  }
  if (out.metrics) {
    std::printf("mean cd %.6e  nc %.6f  fscore %.6f", out.metrics->mean.cd, out.metrics->mean.nc,
                out.metrics->mean.fscore);
    if (out.metrics->has_corr) std::printf("  corr %.6e", out.metrics->mean.corr);
    std::printf("\n");
  }
  std::printf("%d epochs in %.2f s, outputs in %s\n", cfg.train.epochs, out.result.seconds,
              cfg.out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir, int key, bool no_corr,
                 const std::string& out_file) {
  const auto pred = read_mesh_sequence(pred_dir);
  const auto gt = read_mesh_sequence(gt_dir);
  if (pred.size() != gt.size())
    fail(ErrorKind::InvalidArgument, "frame counts differ: " + pred_dir + " has " +
                                         std::to_string(pred.size()) + ", " + gt_dir + " has " +
                                         std::to_string(gt.size()));
  bool corr = !no_corr;
  for (const auto& m : pred) corr = corr && m.vertices.size() == pred.front().vertices.size();
  for (const auto& m : gt) corr = corr && m.vertices.size() == gt.front().vertices.size();
  if (key < 1 || key > static_cast<int>(pred.size()))
    fail(ErrorKind::InvalidArgument, "--key must lie in [1, " + std::to_string(pred.size()) + "]");
  const auto report = evaluate_sequence(pred, gt, key - 1, corr);
  const std::string text = format_metric_report(report);
  if (out_file.empty())
    std::cout << text;
  else
    write_text(out_file, text);
  return 0;
}

int cmd_synth(const SynthConfig& sc, const std::string& out) {
  write_synthetic(out, gen_sequence(sc));
  std::printf("wrote %d frames of %s motion to %s\n", sc.frames, to_string(sc.kind).c_str(),
              out.c_str());
  return 0;
}

int cmd_keyframe(const std::string& dir, int resolution, double bias) {
  const auto clouds = normalize_sequence(read_cloud_sequence(dir)).first;
  const auto ks = select_keyframe(clouds, resolution, bias);
  std::printf("frame bias occupancy score\n");
  for (std::size_t t = 0; t < ks.score.size(); ++t)
    std::printf("%zu %.9f %zu %.9g\n", t + 1, ks.bias[t], ks.occupancy[t], ks.score[t]);
  std::printf("keyframe %d\n", ks.key);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neupig: mesh sequence reconstruction from dynamic point clouds"};
  app.require_subcommand(1);

  ReconstructFlags rf;
  auto* rec = app.add_subcommand("reconstruct", "Deform the reference mesh to fit every frame");
  rec->add_option("--config", rf.config, "Config file (key = value)");
  rec->add_flag("--fast", rf.fast, "250 epochs");
  rec->add_flag("--full", rf.full, "1000 epochs");
  rec->add_option("--epochs", rf.epochs, "Epoch count");
  rec->add_option("--seed", rf.seed, "Run seed");
  rec->add_option("--threads", rf.threads, "Worker threads")->check(CLI::PositiveNumber);
  rec->add_option("--precision", rf.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  rec->add_flag("--no-precond", rf.no_precond, "Disable Sobolev preconditioning");
  rec->add_flag("--no-normal-latent", rf.no_normal_latent, "Drop the normal-direction latent");
  rec->add_flag("--no-iso", rf.no_iso, "Drop the isometry loss");
  rec->add_option("--levels", rf.levels, "Position grid levels")->check(CLI::PositiveNumber);
  rec->add_option("--keyframe", rf.keyframe, "1-based keyframe (default: automatic)");
  rec->add_option("--time-enc", rf.time_enc, "Time encoding")
      ->check(CLI::IsMember({"fourier", "polynomial", "gaussian", "learned"}));
  rec->add_option("--rotation", rf.rotation, "Rotation parameterization")
      ->check(CLI::IsMember({"quaternion", "cayley", "exponential"}));
  rec->add_option("--delta", rf.delta, "Catch-up schedule")
      ->check(CLI::IsMember({"default", "constant", "linear", "exponential", "interpolated"}));
  rec->add_option("--omega", rf.omega, "Confidence form")
      ->check(CLI::IsMember({"default", "constant", "delta", "single"}));
  rec->add_option("--clouds", rf.clouds, "Directory of per-frame PLY clouds");
  rec->add_option("--reference", rf.reference, "Keyframe reference mesh");
  rec->add_option("--gt", rf.gt, "Directory of ground-truth meshes for metrics");
  rec->add_option("--out", rf.out, "Output directory");
  rec->add_option("--synthetic", rf.synthetic, "Generate input: rigid, bend or twist")
      ->check(CLI::IsMember({"rigid", "bend", "twist"}));

  std::string pred_dir, gt_dir, eval_out;
  int eval_key = 1;
  bool no_corr = false;
  auto* eva = app.add_subcommand("evaluate", "Metrics of predicted meshes against ground truth");
  eva->add_option("pred", pred_dir, "Predicted mesh directory")->required();
  eva->add_option("gt", gt_dir, "Ground-truth mesh directory")->required();
  eva->add_option("--key", eval_key, "1-based keyframe for the correspondence match");
  eva->add_flag("--no-corr", no_corr, "Skip the correspondence error");
  eva->add_option("--out", eval_out, "Write the report to a file");

  SynthConfig sc;
  std::string synth_kind = "rigid", synth_out;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  syn->add_option("--kind", synth_kind, "rigid, bend or twist")
      ->check(CLI::IsMember({"rigid", "bend", "twist"}));
  syn->add_option("--frames", sc.frames, "Frame count");
  syn->add_option("--points", sc.points, "Points per frame");
  syn->add_option("--subdivision", sc.subdivision, "Icosphere subdivision of the base shape");
  syn->add_option("--seed", sc.seed, "Sampling seed");
  syn->add_option("--out", synth_out, "Output directory")->required();

  std::string key_dir;
  int occ_res = 128;
  double key_bias = 0.001;
  auto* kf = app.add_subcommand("keyframe", "Score frames and print the selected keyframe");
  kf->add_option("clouds", key_dir, "Directory of per-frame PLY clouds")->required();
  kf->add_option("--occupancy", occ_res, "Occupancy grid resolution")->check(CLI::PositiveNumber);
  kf->add_option("--bias", key_bias, "Midpoint bias rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*rec) return cmd_reconstruct(rf);
    if (*eva) return cmd_evaluate(pred_dir, gt_dir, eval_key, no_corr, eval_out);
    if (*syn) {
      sc.kind = parse_motion(synth_kind);
      return cmd_synth(sc, synth_out);
    }
    if (*kf) return cmd_keyframe(key_dir, occ_res, key_bias);
  } catch (const Error& e) {
    std::fprintf(stderr, "neupig: %s error: %s\n", kind_label(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "neupig: error: %s\n", e.what());
    return 1;
  }
  return 0;
}

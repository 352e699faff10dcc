#include "neupig/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace neupig {

std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  fail(ErrorKind::Parse, "unknown precision '" + s + "' (expected f32 or f64)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorKind::Parse, "config: bad value '" + value + "' for key '" + key + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

template <typename I>
I to_int(const std::string& key, const std::string& v) {
  I out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int<int>(key, trim(item)));
  if (out.empty()) bad_value(key, v);
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>)
      s += fmt_double(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

std::string backend_name(PreconditionBackend b) {
  return b == PreconditionBackend::Spectral ? "spectral" : "cg";
}

PreconditionBackend parse_backend(const std::string& key, const std::string& v) {
  if (v == "spectral") return PreconditionBackend::Spectral;
  if (v == "cg") return PreconditionBackend::ConjugateGradient;
  bad_value(key, v);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

#define F_DOUBLE(name, expr)                                                                 \
  Field{name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt_double(expr); }}
#define F_INT(name, type, expr)                                                              \
  Field{name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = to_int<type>(k, v); }, \
        [](const RunConfig& c) { return std::to_string(expr); }}
#define F_BOOL(name, expr)                                                                   \
  Field{name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = to_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(expr ? "true" : "false"); }}
#define F_STR(name, expr)                                                                    \
  Field{name, [](RunConfig& c, const std::string&, const std::string& v) { expr = v; },      \
        [](const RunConfig& c) { return expr; }}
#define F_ENUM(name, expr, parse)                                                            \
  Field{name, [](RunConfig& c, const std::string&, const std::string& v) { expr = parse(v); }, \
        [](const RunConfig& c) { return to_string(expr); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      // run
      F_ENUM("precision", c.precision, parse_precision),
      F_INT("threads", int, c.threads),
      F_STR("clouds_dir", c.clouds_dir),
      F_STR("reference_mesh", c.reference_mesh),
      F_STR("gt_dir", c.gt_dir),
      F_STR("out_dir", c.out_dir),
      F_BOOL("write_checkpoint", c.write_checkpoint),
      // synthetic input
      F_BOOL("synthetic", c.synthetic),
      F_ENUM("synth_kind", c.synth.kind, parse_motion),
      F_INT("synth_frames", int, c.synth.frames),
      F_INT("synth_points", int, c.synth.points),
      F_INT("synth_subdivision", int, c.synth.subdivision),
      F_INT("synth_seed", std::uint64_t, c.synth.seed),
      // training
      F_INT("epochs", int, c.train.epochs),
      F_INT("seed", std::uint64_t, c.train.seed),
      F_INT("levels", int, c.train.grid.levels),
      F_INT("base_resolution", int, c.train.grid.base_resolution),
      F_INT("resolution_step", int, c.train.grid.resolution_step),
      F_INT("position_channels", int, c.train.grid.position_channels),
      F_INT("normal_resolution", int, c.train.grid.normal_resolution),
      F_INT("normal_channels", int, c.train.grid.normal_channels),
      F_DOUBLE("lambda_base", c.train.grid.lambda_base),
      F_DOUBLE("lambda_growth", c.train.grid.lambda_growth),
      F_DOUBLE("lr_base", c.train.grid.lr_base),
      F_DOUBLE("lr_growth", c.train.grid.lr_growth),
      F_DOUBLE("normal_lambda", c.train.grid.normal_lambda),
      F_DOUBLE("normal_lr", c.train.grid.normal_lr),
      Field{"level_lambdas",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.level_lambdas = to_doubles(k, v);
            },
            [](const RunConfig& c) { return join(c.train.level_lambdas); }},
      Field{"level_lrs",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.level_lrs = to_doubles(k, v);
            },
            [](const RunConfig& c) { return join(c.train.level_lrs); }},
      Field{"hidden",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.mlp.hidden = to_ints(k, v);
            },
            [](const RunConfig& c) { return join(c.train.mlp.hidden); }},
      F_DOUBLE("leaky_slope", c.train.mlp.leaky_slope),
      F_ENUM("time_encoding", c.train.time.variant, parse_time_encoding),
      F_INT("time_frequencies", int, c.train.time.frequencies),
      F_INT("learned_hidden", int, c.train.time.learned_hidden),
      F_ENUM("rotation", c.train.rotation, parse_rotation),
      F_DOUBLE("translation_scale", c.train.translation_scale),
      F_DOUBLE("mlp_lr", c.train.mlp_lr),
      F_DOUBLE("adam_beta1", c.train.adam.beta1),
      F_DOUBLE("adam_beta2", c.train.adam.beta2),
      F_DOUBLE("adam_eps", c.train.adam.eps),
      F_ENUM("grid_step", c.train.grid_step, parse_grid_step),
      F_DOUBLE("w_iso", c.train.objective.w_iso),
      F_BOOL("isometry", c.train.objective.use_isometry),
      F_ENUM("iso_lengths", c.train.objective.iso_lengths, parse_iso_lengths),
      F_DOUBLE("chamfer_truncation", c.train.objective.chamfer.truncation),
      F_ENUM("delta", c.train.objective.delta, parse_delta),
      F_ENUM("omega", c.train.objective.omega, parse_omega),
      F_BOOL("precondition", c.train.precondition),
      Field{"precond_backend",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.precond.backend = parse_backend(k, v);
            },
            [](const RunConfig& c) { return backend_name(c.train.precond.backend); }},
      F_DOUBLE("precond_tolerance", c.train.precond.tolerance),
      F_INT("precond_max_iterations", int, c.train.precond.max_iterations),
      F_BOOL("normal_latent", c.train.normal_latent),
      F_INT("keyframe", int, c.train.keyframe),
      F_INT("keyframe_occupancy", int, c.train.occupancy_resolution),
      F_DOUBLE("keyframe_bias", c.train.keyframe_bias),
      F_INT("chunk_columns", int, c.train.chunk_columns),
      F_DOUBLE("cache_budget_mb", c.train.cache_budget_mb),
  };
  return f;
}

#undef F_DOUBLE
#undef F_INT
#undef F_BOOL
#undef F_STR
#undef F_ENUM

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.key] = &f;
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Parse, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end())
      fail(ErrorKind::Parse, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second->set(c, key, value);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& c) {
  std::ostringstream out;
  out << "# neupig resolved configuration\n";
  for (const auto& f : fields()) out << f.key << " = " << f.get(c) << "\n";
  // The per-level schedules as they resolve for this run.
  std::vector<double> lam, lr;
  std::vector<int> res;
  for (int l = 1; l <= c.train.grid.levels; ++l) {
    res.push_back(c.train.grid.resolution(l));
    lam.push_back(l - 1 < static_cast<int>(c.train.level_lambdas.size()) ||
                          c.train.level_lambdas.empty()
                      ? c.train.level_lambda(l)
                      : 0.0);
    lr.push_back(l - 1 < static_cast<int>(c.train.level_lrs.size()) || c.train.level_lrs.empty()
                     ? c.train.level_lr(l)
                     : 0.0);
  }
  out << "# resolved resolutions = " << join(res) << "\n";
  out << "# resolved lambdas = " << join(lam) << "\n";
  out << "# resolved learning rates = " << join(lr) << "\n";
  return out.str();
}

}  // namespace neupig

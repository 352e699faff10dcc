#include "neupig/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace neupig {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename V>
  void put(V v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(V));
  }
  template <typename T>
  void put_f32(std::span<const T> v) {
    for (T x : v) put(static_cast<float>(x));
  }
  void put_bytes(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* p, std::size_t n, std::string what) : p_(p), end_(p + n), what_(std::move(what)) {}
  template <typename V>
  V get() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, p_, sizeof(V));
    p_ += sizeof(V);
    return v;
  }
  template <typename T>
  void get_f32(std::span<T> out) {
    for (T& x : out) x = static_cast<T>(get<float>());
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) {
    if (static_cast<std::size_t>(end_ - p_) < n)
      fail(ErrorKind::Parse, "checkpoint: truncated " + what_ + " section");
  }
  const char* p_;
  const char* end_;
  std::string what_;
};

void put_section(std::ofstream& f, const char* tag, const Writer& w) {
  f.write(tag, 4);
  const std::uint64_t n = w.data().size();
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(w.data().data(), static_cast<std::streamsize>(n));
}

void expect(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Parse, "checkpoint: " + what + " does not match the current configuration");
}

}  // namespace

template <typename T>
void write_checkpoint(const std::filesystem::path& path, const TrainState<T>& s,
                      const std::string& config_text, const NormalizationTransform& xf) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write checkpoint '" + path.string() + "'");
  f.write(kCheckpointMagic, 8);
  f.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);

  Writer conf;
  conf.put_bytes(config_text);
  put_section(f, "CONF", conf);

  Writer meta;
  meta.put<std::uint64_t>(s.cfg.seed);
  meta.put<std::int32_t>(s.epoch);
  meta.put<std::int32_t>(s.key + 1);
  meta.put<std::int32_t>(static_cast<std::int32_t>(s.frame_cd.size()));
  for (int a = 0; a < 3; ++a) meta.put<double>(xf.center[a]);
  meta.put<double>(xf.scale);
  put_section(f, "META", meta);

  Writer grid;
  grid.put<std::uint32_t>(s.grids.levels());
  grid.put<std::uint32_t>(s.grids.position_channels());
  for (const auto& lv : s.grids.position_levels) grid.put<std::uint32_t>(lv.resolution);
  grid.put<std::uint32_t>(s.grids.normal_level.resolution);
  grid.put<std::uint32_t>(s.grids.normal_level.channels);
  for (const auto& lv : s.grids.position_levels) grid.put_f32(std::span<const T>(lv.features));
  grid.put_f32(std::span<const T>(s.grids.normal_level.features));
  put_section(f, "GRID", grid);

  Writer mlp;
  mlp.put<std::uint32_t>(static_cast<std::uint32_t>(s.mlp.layers().size()));
  for (const auto& l : s.mlp.layers()) {
    mlp.put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.rows()));
    mlp.put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) mlp.put(static_cast<float>(l.weight(r, c)));
    mlp.put_f32(std::span<const T>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
  }
  put_section(f, "MLPP", mlp);

  Writer tenc;
  const auto& tc = s.time.config();
  tenc.put<std::uint32_t>(static_cast<std::uint32_t>(tc.variant));
  tenc.put<std::uint32_t>(tc.frequencies);
  tenc.put<std::uint32_t>(tc.learned_hidden);
  const auto& b = s.time.gaussian_frequencies();
  tenc.put<std::uint32_t>(static_cast<std::uint32_t>(b.size()));
  tenc.put_f32(std::span<const T>(b.data(), static_cast<std::size_t>(b.size())));
  tenc.put<std::uint32_t>(static_cast<std::uint32_t>(s.time.params().size()));
  tenc.put_f32(s.time.params());
  put_section(f, "TENC", tenc);

  Writer adam;
  adam.put<std::uint32_t>(static_cast<std::uint32_t>(s.moments.size()));
  for (const auto& m : s.moments) {
    adam.put<std::uint64_t>(m.m.size());
    adam.put_f32(std::span<const T>(m.m));
    adam.put_f32(std::span<const T>(m.v));
  }
  put_section(f, "ADAM", adam);

  Writer cdet;
  cdet.put<std::uint32_t>(static_cast<std::uint32_t>(s.frame_cd.size()));
  for (double v : s.frame_cd) cdet.put<double>(v);
  put_section(f, "CDET", cdet);

  if (!f) fail(ErrorKind::Io, "failed writing checkpoint '" + path.string() + "'");
}

template <typename T>
CheckpointInfo read_checkpoint(const std::filesystem::path& path, TrainState<T>& s) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read checkpoint '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader top(bytes.data(), bytes.size(), "header");
  if (top.get_bytes(8) != std::string(kCheckpointMagic, 8))
    fail(ErrorKind::Parse, "'" + path.string() + "' is not a checkpoint");
  if (top.get<std::uint32_t>() != kCheckpointVersion)
    fail(ErrorKind::Parse, "unsupported checkpoint version");

  CheckpointInfo info;
  std::size_t offset = 12;
  while (offset < bytes.size()) {
    Reader hdr(bytes.data() + offset, bytes.size() - offset, "section header");
    const std::string tag = hdr.get_bytes(4);
    const auto n = hdr.get<std::uint64_t>();
    offset += 12;
    if (n > bytes.size() - offset) fail(ErrorKind::Parse, "checkpoint: truncated " + tag + " section");
    Reader r(bytes.data() + offset, n, tag);
    offset += n;

    if (tag == "CONF") {
      info.config_text = r.get_bytes(n);
    } else if (tag == "META") {
      info.seed = r.get<std::uint64_t>();
      info.epoch = r.get<std::int32_t>();
      info.key = r.get<std::int32_t>();
      info.frames = r.get<std::int32_t>();
      for (int a = 0; a < 3; ++a) info.normalization.center[a] = r.get<double>();
      info.normalization.scale = r.get<double>();
      s.epoch = info.epoch;
      s.key = info.key - 1;
    } else if (tag == "GRID") {
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(s.grids.levels()), "grid level count");
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(s.grids.position_channels()),
             "grid channel count");
      for (const auto& lv : s.grids.position_levels)
        expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(lv.resolution), "grid resolution");
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(s.grids.normal_level.resolution),
             "normal grid resolution");
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(s.grids.normal_level.channels),
             "normal grid channels");
      for (auto& lv : s.grids.position_levels) r.get_f32(std::span<T>(lv.features));
      r.get_f32(std::span<T>(s.grids.normal_level.features));
    } else if (tag == "MLPP") {
      expect(r.get<std::uint32_t>() == s.mlp.layers().size(), "decoder depth");
      for (auto& l : s.mlp.layers()) {
        expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(l.weight.rows()) &&
                   r.get<std::uint32_t>() == static_cast<std::uint32_t>(l.weight.cols()),
               "decoder layer shape");
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
          for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
            l.weight(i, j) = static_cast<T>(r.get<float>());
        r.get_f32(std::span<T>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
      }
    } else if (tag == "TENC") {
      const auto& tc = s.time.config();
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(tc.variant), "time encoding");
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(tc.frequencies), "time frequencies");
      expect(r.get<std::uint32_t>() == static_cast<std::uint32_t>(tc.learned_hidden),
             "learned encoder width");
      VecX<T> b(r.get<std::uint32_t>());
      r.get_f32(std::span<T>(b.data(), static_cast<std::size_t>(b.size())));
      s.time.set_gaussian_frequencies(b);
      expect(r.get<std::uint32_t>() == s.time.params().size(), "time encoder parameter count");
      r.get_f32(s.time.params());
    } else if (tag == "ADAM") {
      expect(r.get<std::uint32_t>() == s.moments.size(), "optimizer group count");
      for (auto& m : s.moments) {
        expect(r.get<std::uint64_t>() == m.m.size(), "optimizer group size");
        r.get_f32(std::span<T>(m.m));
        r.get_f32(std::span<T>(m.v));
      }
    } else if (tag == "CDET") {
      s.frame_cd.resize(r.get<std::uint32_t>());
      for (double& v : s.frame_cd) v = r.get<double>();
    } else {
      continue;  // unknown sections are skipped
    }
    if (!r.done()) fail(ErrorKind::Parse, "checkpoint: trailing bytes in " + tag + " section");
  }
  return info;
}

template void write_checkpoint(const std::filesystem::path&, const TrainState<float>&,
                               const std::string&, const NormalizationTransform&);
template void write_checkpoint(const std::filesystem::path&, const TrainState<double>&,
                               const std::string&, const NormalizationTransform&);
template CheckpointInfo read_checkpoint(const std::filesystem::path&, TrainState<float>&);
template CheckpointInfo read_checkpoint(const std::filesystem::path&, TrainState<double>&);

}  // namespace neupig

#include "ssmcodec/weights.hpp"

#include "ssmcodec/bytes.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

namespace ssmc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Uniform [0, 1) from the top 53 bits; independent of the standard library's
// distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class ManifestBuilder {
 public:
  explicit ManifestBuilder(const TransformConfig& c) : c_(c) {}

  void add(std::string name, Shape shape, InitKind init, Index fan_in = 1, double constant = 0.0) {
    specs_.push_back({std::move(name), std::move(shape), init, fan_in, constant});
  }

  void conv(const std::string& p, Index k, Index in, Index out, bool transposed = false) {
    // Each output of a stride-2 transposed convolution sums about in*k*k/4 terms.
    const Index fan_in = transposed ? std::max<Index>(1, in * k * k / 4) : in * k * k;
    add(p + ".weight", {k, k, in, out}, InitKind::kFanInUniform, fan_in);
    add(p + ".bias", {out}, InitKind::kZeros);
  }

  void dense(const std::string& p, Index in, Index out) {
    add(p + ".weight", {in, out}, InitKind::kFanInUniform, in);
    add(p + ".bias", {out}, InitKind::kZeros);
  }

  void norm(const std::string& p, Index c) {
    add(p + ".weight", {c}, InitKind::kOnes);
    add(p + ".bias", {c}, InitKind::kZeros);
  }

  void s6(const std::string& p, Index e) {
    const Index n = c_.state_dim, r = (e + 15) / 16;
    add(p + ".x_proj", {e, r + 2 * n}, InitKind::kFanInUniform, e);
    add(p + ".dt_proj", {r, e}, InitKind::kFanInUniform, r);
    add(p + ".dt_bias", {e}, InitKind::kTimescaleBias);
    add(p + ".a_log", {e, n}, InitKind::kStateLog);
    add(p + ".d_skip", {e}, InitKind::kOnes);
  }

  void vss_block(const std::string& p, Index c, Index layers) {
    const Index e = c * c_.expansion, k = c_.dw_kernel;
    for (Index j = 0; j < layers; ++j) {
      const std::string l = p + ".layer" + std::to_string(j);
      norm(l + ".ln1", c);
      dense(l + ".expand", c, e);
      add(l + ".dwconv.weight", {k, k, e}, InitKind::kFanInUniform, k * k);
      add(l + ".dwconv.bias", {e}, InitKind::kZeros);
      if (c_.tied_directions) {
        s6(l + ".scan.shared", e);
      } else {
        for (int d = 0; d < 4; ++d) s6(l + ".scan.dir" + std::to_string(d), e);
      }
      norm(l + ".ln2", e);
      dense(l + ".gate", c, e);
      dense(l + ".project", e, c);
    }
  }

  std::vector<ParamSpec> build() {
    const auto& ch = c_.channels;
    const Index k = c_.conv_kernel, m = c_.latent_channels(), ms = c_.slice_channels();
    const std::array<Index, 5> ga{3, ch[0], ch[1], ch[2], ch[3]};
    for (std::size_t i = 0; i < 4; ++i) {
      conv("g_a.conv" + std::to_string(i), k, ga[i], ga[i + 1]);
      vss_block("g_a.vss" + std::to_string(i), ga[i + 1], c_.layers[i]);
    }
    conv("h_a.conv0", k, ch[3], ch[4]);
    vss_block("h_a.vss0", ch[4], c_.hyper_layers);
    conv("h_a.conv1", k, ch[4], ch[5]);
    vss_block("h_a.vss1", ch[5], c_.hyper_layers);

    conv("h_s.deconv0", k, ch[5], ch[4], true);
    vss_block("h_s.vss0", ch[4], c_.hyper_layers);
    conv("h_s.deconv1", k, ch[4], ch[4], true);
    vss_block("h_s.vss1", ch[4], c_.hyper_layers);
    dense("h_s.mean", ch[4], m);
    dense("h_s.scale", ch[4], m);

    for (Index i = 0; i < c_.slices; ++i) {
      const std::string s = "cam.slice" + std::to_string(i);
      dense(s + ".params.conv0", 2 * m + i * ms, c_.cam_hidden);
      dense(s + ".params.conv1", c_.cam_hidden, 2 * ms);
      dense(s + ".residual.conv0", 2 * m + (i + 1) * ms, c_.cam_hidden);
      dense(s + ".residual.conv1", c_.cam_hidden, ms);
    }

    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t stage = 3 - i;
      vss_block("g_s.vss" + std::to_string(i), ga[stage + 1], c_.layers[stage]);
      conv("g_s.deconv" + std::to_string(i), k, ga[stage + 1], ga[stage], true);
    }

    constexpr std::array<Index, 5> filters{1, 3, 3, 3, 1};
    const double scale = std::pow(10.0, 1.0 / 4.0);  // init_scale^(1 / (layers))
    for (int l = 0; l < 4; ++l) {
      const Index in = filters[static_cast<std::size_t>(l)], out = filters[static_cast<std::size_t>(l) + 1];
      const double init = std::log(std::expm1(1.0 / scale / static_cast<double>(out)));
      add("hyper_prior.matrix" + std::to_string(l), {ch[5], out, in}, InitKind::kPriorMatrix, 1, init);
      add("hyper_prior.bias" + std::to_string(l), {ch[5], out}, InitKind::kPriorBias);
      if (l < 3) add("hyper_prior.factor" + std::to_string(l), {ch[5], out}, InitKind::kZeros);
    }
    return std::move(specs_);
  }

 private:
  const TransformConfig& c_;
  std::vector<ParamSpec> specs_;
};

Tensorf initialize(const ParamSpec& spec, std::uint64_t seed) {
  Tensorf t(spec.shape);
  std::mt19937_64 rng(splitmix64(seed ^ fnv1a64(spec.name)));
  switch (spec.init) {
    case InitKind::kFanInUniform: {
      const double bound = std::sqrt(3.0 / static_cast<double>(std::max<Index>(spec.fan_in, 1)));
      for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>((2.0 * unit_uniform(rng) - 1.0) * bound);
      break;
    }
    case InitKind::kZeros: break;
    case InitKind::kOnes: t.values().setOnes(); break;
    case InitKind::kStateLog: {
      const Index n = spec.shape.back();
      for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(std::log(static_cast<double>(i % n + 1)));
      break;
    }
    case InitKind::kTimescaleBias:
      for (Index i = 0; i < t.size(); ++i) {
        const double u = 1e-3 + (1e-1 - 1e-3) * unit_uniform(rng);
        t[i] = static_cast<float>(std::log(std::expm1(u)));
      }
      break;
    case InitKind::kPriorMatrix: t.values().setConstant(static_cast<float>(spec.constant)); break;
    case InitKind::kPriorBias:
      for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(unit_uniform(rng) - 0.5);
      break;
  }
  return t;
}

}  // namespace

std::vector<ParamSpec> parameter_manifest(const TransformConfig& config) {
  config.validate();
  return ManifestBuilder(config).build();
}

void WeightStore::set(const std::string& name, Tensorf value) { entries_[name] = std::move(value); }

const Tensorf& WeightStore::get(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("weights: missing parameter '" + name + "'");
  return it->second;
}

Tensorf& WeightStore::get(const std::string& name) {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("weights: missing parameter '" + name + "'");
  return it->second;
}

Index WeightStore::parameter_count() const {
  Index n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void WeightStore::validate() const {
  std::set<std::string> expected;
  for (const auto& spec : parameter_manifest(config_)) {
    const Tensorf& t = get(spec.name);
    if (t.shape() != spec.shape) {
      throw FormatError("weights: parameter '" + spec.name + "' has shape " + shape_string(t.shape()) +
                        ", expected " + shape_string(spec.shape));
    }
    expected.insert(spec.name);
  }
  for (const auto& [name, t] : entries_) {
    if (!expected.contains(name)) throw FormatError("weights: unexpected parameter '" + name + "'");
  }
}

std::vector<std::uint8_t> WeightStore::serialize() const {
  ByteWriter w;
  w.text("SSMW");
  w.u16(kVersion);
  w.u64(seed_);
  const std::string cfg = config_.to_text();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.text(cfg);
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (const Index e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (Index i = 0; i < t.size(); ++i) w.f32(t[i]);
  }
  w.u32(crc32(w.buffer()));
  return w.release();
}

WeightStore WeightStore::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("weights: archive too short");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4));
  if (crc32(body) != tail.u32()) throw FormatError("weights: checksum mismatch (corrupt archive)");

  ByteReader r(body);
  if (r.text(4) != "SSMW") throw FormatError("weights: not a weight archive (bad magic)");
  const auto version = r.u16();
  if (version != kVersion) throw FormatError("weights: unsupported archive version " + std::to_string(version));
  const auto seed = r.u64();
  const auto cfg_len = r.u32();
  WeightStore store(TransformConfig::from_text(r.text(cfg_len)), seed);
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.text(r.u16());
    const auto rank = r.u8();
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    const Index n = shape_size(shape);
    if (static_cast<std::size_t>(n) * 4 > r.remaining()) throw FormatError("weights: truncated entry '" + name + "'");
    Tensorf t(shape);
    for (Index j = 0; j < n; ++j) t[j] = r.f32();
    if (store.contains(name)) throw FormatError("weights: duplicate parameter '" + name + "'");
    store.set(name, std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("weights: trailing bytes after last entry");
  store.validate();
  return store;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

void WeightStore::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

WeightStore WeightStore::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::uint32_t WeightStore::fingerprint() const {
  const std::vector<std::uint8_t> bytes = serialize();
  return ByteReader(std::span(bytes).last(4)).u32();
}

WeightStore init_weights(const TransformConfig& config, std::uint64_t seed) {
  WeightStore store(config, seed);
  for (const auto& spec : parameter_manifest(config)) {
    if (store.contains(spec.name)) throw std::logic_error("duplicate parameter in manifest: " + spec.name);
    store.set(spec.name, initialize(spec, seed));
  }
  return store;
}

}  // namespace ssmc

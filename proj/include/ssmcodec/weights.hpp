#pragma once

#include "ssmcodec/config.hpp"
#include "ssmcodec/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InitKind {
  kFanInUniform,  // uniform(-sqrt(3 / fan_in), +sqrt(3 / fan_in))
  kZeros,
  kOnes,
  kStateLog,      // a_log rows = log(1..N)
  kTimescaleBias, // softplus^-1(u), u ~ uniform(1e-3, 1e-1)
  kPriorMatrix,   // factorized prior: constant log(expm1(1 / scale / width))
  kPriorBias,     // uniform(-0.5, 0.5)
};

struct ParamSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::kZeros;
  Index fan_in = 1;
  double constant = 0.0;  // used by kPriorMatrix
};

/// Every parameter the configuration requires, in a fixed order.
std::vector<ParamSpec> parameter_manifest(const TransformConfig& config);

/// Named float32 tensors plus the configuration and creation seed.
///
/// Archive layout (little-endian):
///   "SSMW" u16 version=1  u64 seed  u32 len + config text  u32 count
///   count x { u16 len + name  u8 rank  rank x u32 extent  f32 values }
///   u32 crc32 of everything before it
/// Entries are written in name order; any order is accepted on load.
class WeightStore {
 public:
  static constexpr std::uint16_t kVersion = 1;

  WeightStore() = default;
  WeightStore(TransformConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {}

  const TransformConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  void set(const std::string& name, Tensorf value);
  const Tensorf& get(const std::string& name) const;
  Tensorf& get(const std::string& name);
  bool contains(const std::string& name) const { return entries_.contains(name); }
  const std::map<std::string, Tensorf>& entries() const { return entries_; }
  Index parameter_count() const;

  /// Throws unless the entries are exactly the configuration's manifest.
  void validate() const;

  std::vector<std::uint8_t> serialize() const;
  static WeightStore deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static WeightStore load(const std::filesystem::path& path);

  /// The archive checksum (crc32 of everything before it); identifies the
  /// weights in bitstreams.
  std::uint32_t fingerprint() const;

 private:
  TransformConfig config_;
  std::uint64_t seed_ = 0;
  std::map<std::string, Tensorf> entries_;
};

/// Deterministic initialization: each tensor draws from its own mt19937_64
/// stream seeded by splitmix64(seed ^ fnv1a64(name)).
WeightStore init_weights(const TransformConfig& config, std::uint64_t seed);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ssmc

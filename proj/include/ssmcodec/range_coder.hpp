#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmc {

inline constexpr int kProbabilityBits = 16;
inline constexpr std::uint32_t kProbabilityScale = 1u << kProbabilityBits;

class RangeCoderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 16-bit cumulative frequency table over the contiguous integer alphabet
/// [offset, offset + size). cdf has size + 1 entries, cdf[0] = 0,
/// cdf[size] = 2^16, and is strictly increasing (every symbol has frequency >= 1).
class CdfTable {
 public:
  CdfTable() = default;
  CdfTable(std::int32_t offset, std::vector<std::uint32_t> cdf);

  static CdfTable from_frequencies(std::int32_t offset, std::span<const std::uint32_t> frequencies);

  std::int32_t offset() const { return offset_; }
  std::int32_t size() const { return static_cast<std::int32_t>(cdf_.size()) - 1; }
  std::int32_t min_symbol() const { return offset_; }
  std::int32_t max_symbol() const { return offset_ + size() - 1; }
  bool contains(std::int32_t symbol) const { return symbol >= min_symbol() && symbol <= max_symbol(); }

  std::uint32_t low(std::int32_t symbol) const { return cdf_[static_cast<std::size_t>(symbol - offset_)]; }
  std::uint32_t frequency(std::int32_t symbol) const {
    const auto i = static_cast<std::size_t>(symbol - offset_);
    return cdf_[i + 1] - cdf_[i];
  }
  double probability(std::int32_t symbol) const {
    return static_cast<double>(frequency(symbol)) / kProbabilityScale;
  }

  /// Symbol whose interval [cdf[s], cdf[s+1]) contains `target`.
  std::int32_t lookup(std::uint32_t target) const;

  const std::vector<std::uint32_t>& cdf() const { return cdf_; }

  friend bool operator==(const CdfTable&, const CdfTable&) = default;

 private:
  std::int32_t offset_ = 0;
  std::vector<std::uint32_t> cdf_;
};

/// Carry-propagating range encoder: 32-bit range, 33-bit low, one output
/// byte per renormalization (whenever range < 2^24), most significant byte
/// first. finish() flushes five bytes; the first byte of every stream is 0.
class RangeEncoder {
 public:
  void encode(std::int32_t symbol, const CdfTable& table);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  std::int32_t decode(const CdfTable& table);

  /// Bytes consumed so far.
  std::size_t position() const { return pos_; }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

/// Codes symbols[i] under tables[indexes[i]].
std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                       std::span<const std::int32_t> indexes,
                                       std::span<const CdfTable> tables);

/// Inverse of range_encode; `indexes` must be supplied in encode order and
/// has one entry per symbol to decode.
std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const std::int32_t> indexes,
                                       std::span<const CdfTable> tables);

}  // namespace ssmc

#include "ssmcodec/range_coder.hpp"

#include <algorithm>

namespace ssmc {

namespace {

constexpr std::uint32_t kTop = 1u << 24;

}  // namespace

CdfTable::CdfTable(std::int32_t offset, std::vector<std::uint32_t> cdf) : offset_(offset), cdf_(std::move(cdf)) {
  if (cdf_.size() < 2) throw RangeCoderError("cdf table: needs at least one symbol");
  if (cdf_.front() != 0 || cdf_.back() != kProbabilityScale) {
    throw RangeCoderError("cdf table: must start at 0 and end at 2^16");
  }
  for (std::size_t i = 1; i < cdf_.size(); ++i) {
    if (cdf_[i] <= cdf_[i - 1]) {
      throw RangeCoderError("cdf table: not strictly increasing at entry " + std::to_string(i));
    }
  }
}

CdfTable CdfTable::from_frequencies(std::int32_t offset, std::span<const std::uint32_t> frequencies) {
  std::vector<std::uint32_t> cdf(frequencies.size() + 1, 0);
  for (std::size_t i = 0; i < frequencies.size(); ++i) cdf[i + 1] = cdf[i] + frequencies[i];
  return CdfTable(offset, std::move(cdf));
}

std::int32_t CdfTable::lookup(std::uint32_t target) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  return offset_ + static_cast<std::int32_t>(it - cdf_.begin()) - 1;
}

void RangeEncoder::encode(std::int32_t symbol, const CdfTable& table) {
  if (!table.contains(symbol)) {
    throw RangeCoderError("range encoder: symbol " + std::to_string(symbol) + " outside table [" +
                          std::to_string(table.min_symbol()) + ", " + std::to_string(table.max_symbol()) + "]");
  }
  const std::uint32_t r = range_ >> kProbabilityBits;
  low_ += static_cast<std::uint64_t>(r) * table.low(symbol);
  range_ = r * table.frequency(symbol);
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  std::vector<std::uint8_t> out = std::move(out_);
  *this = RangeEncoder{};
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  if (next_byte() != 0) throw RangeCoderError("range decoder: corrupt stream (bad lead byte)");
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    throw RangeCoderError("range decoder: truncated stream at byte " + std::to_string(pos_));
  }
  return bytes_[pos_++];
}

std::int32_t RangeDecoder::decode(const CdfTable& table) {
  const std::uint32_t r = range_ >> kProbabilityBits;
  const std::uint32_t target = code_ / r;
  if (target >= kProbabilityScale) {
    throw RangeCoderError("range decoder: desynchronized stream near byte " + std::to_string(pos_));
  }
  const std::int32_t symbol = table.lookup(target);
  code_ -= r * table.low(symbol);
  range_ = r * table.frequency(symbol);
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                       std::span<const std::int32_t> indexes,
                                       std::span<const CdfTable> tables) {
  if (symbols.size() != indexes.size()) throw RangeCoderError("range_encode: one table index per symbol required");
  RangeEncoder encoder;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const auto idx = static_cast<std::size_t>(indexes[i]);
    if (indexes[i] < 0 || idx >= tables.size()) throw RangeCoderError("range_encode: table index out of range");
    encoder.encode(symbols[i], tables[idx]);
  }
  return encoder.finish();
}

std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const std::int32_t> indexes,
                                       std::span<const CdfTable> tables) {
  RangeDecoder decoder(bytes);
  std::vector<std::int32_t> out;
  out.reserve(indexes.size());
  for (const std::int32_t index : indexes) {
    if (index < 0 || static_cast<std::size_t>(index) >= tables.size()) {
      throw RangeCoderError("range_decode: table index out of range");
    }
    out.push_back(decoder.decode(tables[static_cast<std::size_t>(index)]));
  }
  if (!decoder.exhausted()) {
    throw RangeCoderError("range_decode: " + std::to_string(bytes.size() - decoder.position()) +
                          " unconsumed bytes, stream desynchronized");
  }
  return out;
}

}  // namespace ssmc

#include "ssmcodec/codec.hpp"

#include <numeric>

namespace ssmc {

namespace {

Index mirror(Index i, Index n) {
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Index round_up(Index v, Index multiple) { return (v + multiple - 1) / multiple * multiple; }

template <typename F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const CodecError&) {
    throw;
  } catch (const std::exception& e) {
    throw CodecError(std::string(name) + ": " + e.what());
  }
}

std::vector<std::int32_t> channel_indexes(Index tokens, Index channels) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(tokens * channels));
  for (Index t = 0; t < tokens; ++t)
    for (Index c = 0; c < channels; ++c) out[static_cast<std::size_t>(t * channels + c)] = static_cast<std::int32_t>(c);
  return out;
}

Tensorf concat(const std::vector<Tensorf>& parts) {
  std::vector<const Tensorf*> p;
  for (const auto& t : parts) p.push_back(&t);
  return concat_channels(p);
}

void check_lambda(int lambda_index) {
  if (lambda_index < 0 || lambda_index >= static_cast<int>(kLambdaLadder.size())) {
    throw CodecError("lambda index " + std::to_string(lambda_index) + " outside 0.." +
                     std::to_string(kLambdaLadder.size() - 1));
  }
}

}  // namespace

PaddedImage pad(const Tensorf& image, Index multiple) {
  if (image.rank() != 3 || image.height() < 1 || image.width() < 1) {
    throw ShapeError("pad: expected a non-empty H x W x C image, got " + shape_string(image.shape()));
  }
  const Index h = image.height(), w = image.width(), c = image.channels();
  const Index ph = round_up(h, multiple), pw = round_up(w, multiple);
  if (ph == h && pw == w) return {image, {h, w}};
  Tensorf out({ph, pw, c});
  auto dst = out.tokens();
  const auto src = image.tokens();
  for (Index y = 0; y < ph; ++y)
    for (Index x = 0; x < pw; ++x) dst.row(y * pw + x) = src.row(mirror(y, h) * w + mirror(x, w));
  return {std::move(out), {h, w}};
}

Tensorf unpad(const Tensorf& padded, const CropRecord& crop) {
  if (padded.rank() != 3 || crop.height > padded.height() || crop.width > padded.width()) {
    throw ShapeError("unpad: crop " + std::to_string(crop.height) + "x" + std::to_string(crop.width) +
                     " exceeds " + shape_string(padded.shape()));
  }
  if (crop.height == padded.height() && crop.width == padded.width()) return padded;
  const Index c = padded.channels();
  Tensorf out({crop.height, crop.width, c});
  for (Index y = 0; y < crop.height; ++y) {
    out.tokens().middleRows(y * crop.width, crop.width) = padded.tokens().middleRows(y * padded.width(), crop.width);
  }
  return out;
}

std::size_t Bitstream::payload_bytes() const {
  return std::accumulate(y_streams.begin(), y_streams.end(), z_stream.size(),
                         [](std::size_t acc, const auto& s) { return acc + s.size(); });
}

std::vector<std::uint8_t> Bitstream::serialize() const {
  if (y_streams.size() > 255) throw CodecError("bitstream: too many slices");
  ByteWriter w;
  w.text("SSMC");
  w.u16(kVersion);
  w.u32(height);
  w.u32(width);
  w.u32(model_id);
  w.u8(lambda_index);
  w.u8(static_cast<std::uint8_t>(y_streams.size()));
  w.u32(static_cast<std::uint32_t>(z_stream.size()));
  w.bytes(z_stream);
  for (const auto& s : y_streams) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    w.bytes(s);
  }
  return w.release();
}

Bitstream Bitstream::parse(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    if (r.text(4) != "SSMC") throw CodecError("bitstream: bad magic (not an ssmcodec file)");
    const auto version = r.u16();
    if (version != kVersion) {
      throw CodecError("bitstream: unsupported version " + std::to_string(version) + " (expected " +
                       std::to_string(kVersion) + ")");
    }
    Bitstream b;
    b.height = r.u32();
    b.width = r.u32();
    b.model_id = r.u32();
    b.lambda_index = r.u8();
    const auto slices = r.u8();
    const auto z_len = r.u32();
    const auto z = r.bytes(z_len);
    b.z_stream.assign(z.begin(), z.end());
    for (int i = 0; i < slices; ++i) {
      const auto len = r.u32();
      const auto s = r.bytes(len);
      b.y_streams.emplace_back(s.begin(), s.end());
    }
    if (r.remaining() != 0) throw CodecError("bitstream: " + std::to_string(r.remaining()) + " trailing bytes");
    if (b.height == 0 || b.width == 0) throw CodecError("bitstream: empty image extents");
    return b;
  } catch (const CodecError&) {
    throw;
  } catch (const FormatError& e) {
    throw CodecError(std::string("bitstream: ") + e.what());
  }
}

EncodeResult encode_image(const Tensorf& image, const CodecModel& model, int lambda_index) {
  check_lambda(lambda_index);
  if (image.rank() != 3 || image.channels() != 3) {
    throw CodecError("encode: expected an H x W x 3 image, got " + shape_string(image.shape()));
  }
  const TransformConfig& cfg = model.config();
  EncodeResult out;
  LatentBundle& lat = out.latents;

  const PaddedImage padded = stage("encode: padding", [&] { return pad(image); });
  lat.y = stage("encode: analysis transform", [&] { return model.analysis(padded.image); });
  lat.z = stage("encode: hyper analysis", [&] { return model.hyper_analysis(lat.y); });

  const SymbolBlock z_block = quantize_symbols(lat.z);
  out.saturated += z_block.saturated;
  lat.z_symbols = z_block.symbols;
  lat.z_hat = dequantize(lat.z_symbols, Tensorf(lat.z.shape()));
  const auto z_index = channel_indexes(lat.z.size() / lat.z.channels(), lat.z.channels());
  const auto& z_tables = model.hyper_prior().tables();
  out.stream.z_stream = stage("encode: hyper-latent coding", [&] { return range_encode(lat.z_symbols, z_index, z_tables); });
  out.estimated_bits_z = estimate_bits(lat.z_symbols, z_index, z_tables);

  lat.hyper = stage("encode: hyper synthesis", [&] { return model.hyper_synthesis(lat.z_hat); });

  const Index ms = cfg.slice_channels();
  std::vector<Tensorf> y_bar, y_hat, mean, scale;
  const auto& gaussian = model.conditional();
  for (Index i = 0; i < cfg.slices; ++i) {
    const std::string name = "encode: slice " + std::to_string(i);
    CamSlice s = stage(name.c_str(), [&] { return cam_slice(model, i, lat.hyper, y_bar, slice_channels(lat.y, i * ms, ms)); });
    const auto index = gaussian.scale_indexes(s.params.scale);
    out.stream.y_streams.push_back(stage(name.c_str(), [&] { return range_encode(s.symbols.symbols, index, gaussian.tables()); }));
    out.estimated_bits_y += estimate_bits(s.symbols.symbols, index, gaussian.tables());
    out.saturated += s.symbols.saturated;
    lat.y_symbols.push_back(std::move(s.symbols.symbols));
    y_hat.push_back(std::move(s.y_hat));
    mean.push_back(std::move(s.params.mean));
    scale.push_back(std::move(s.params.scale));
    y_bar.push_back(std::move(s.y_bar));
  }
  lat.y_hat = concat(y_hat);
  lat.y_bar = concat(y_bar);
  lat.mean = concat(mean);
  lat.scale = concat(scale);

  out.stream.height = static_cast<std::uint32_t>(image.height());
  out.stream.width = static_cast<std::uint32_t>(image.width());
  out.stream.model_id = model.fingerprint();
  out.stream.lambda_index = static_cast<std::uint8_t>(lambda_index);
  return out;
}

DecodeResult decode_image(const Bitstream& stream, const CodecModel& model) {
  const TransformConfig& cfg = model.config();
  if (stream.model_id != model.fingerprint()) {
    throw CodecError("decode: bitstream was produced by model " + std::to_string(stream.model_id) +
                     ", weights are model " + std::to_string(model.fingerprint()));
  }
  check_lambda(stream.lambda_index);
  if (static_cast<Index>(stream.y_streams.size()) != cfg.slices) {
    throw CodecError("decode: bitstream has " + std::to_string(stream.y_streams.size()) + " slices, model expects " +
                     std::to_string(cfg.slices));
  }
  const Index stride = TransformConfig::kTotalStride;
  const Index ph = (static_cast<Index>(stream.height) + stride - 1) / stride * stride;
  const Index pw = (static_cast<Index>(stream.width) + stride - 1) / stride * stride;

  DecodeResult out;
  LatentBundle& lat = out.latents;
  const Shape z_shape{ph / stride, pw / stride, cfg.hyper_channels()};
  const Index z_tokens = z_shape[0] * z_shape[1];
  const auto z_index = channel_indexes(z_tokens, cfg.hyper_channels());
  lat.z_symbols = stage("decode: hyper-latent", [&] { return range_decode(stream.z_stream, z_index, model.hyper_prior().tables()); });
  lat.z_hat = dequantize(lat.z_symbols, Tensorf(z_shape));
  lat.hyper = stage("decode: hyper synthesis", [&] { return model.hyper_synthesis(lat.z_hat); });

  std::vector<Tensorf> y_bar, y_hat, mean, scale;
  const auto& gaussian = model.conditional();
  for (Index i = 0; i < cfg.slices; ++i) {
    const std::string name = "decode: slice " + std::to_string(i);
    const SliceParams params = stage(name.c_str(), [&] { return model.slice_params(i, lat.hyper, y_bar); });
    const auto index = gaussian.scale_indexes(params.scale);
    auto symbols = stage(name.c_str(), [&] {
      return range_decode(stream.y_streams[static_cast<std::size_t>(i)], index, gaussian.tables());
    });
    CamSlice s = stage(name.c_str(), [&] { return cam_slice_decode(model, i, lat.hyper, y_bar, symbols); });
    lat.y_symbols.push_back(std::move(symbols));
    y_hat.push_back(std::move(s.y_hat));
    mean.push_back(std::move(s.params.mean));
    scale.push_back(std::move(s.params.scale));
    y_bar.push_back(std::move(s.y_bar));
  }
  lat.y_hat = concat(y_hat);
  lat.y_bar = concat(y_bar);
  lat.mean = concat(mean);
  lat.scale = concat(scale);

  const Tensorf x_hat = stage("decode: synthesis transform", [&] { return model.synthesis(lat.y_bar); });
  out.image = unpad(x_hat, {static_cast<Index>(stream.height), static_cast<Index>(stream.width)});
  out.image.values() = out.image.values().cwiseMax(0.0f).cwiseMin(1.0f);
  return out;
}

}  // namespace ssmc

#include "ssmcodec/ops_count.hpp"

#include "ssmcodec/ssm.hpp"

#include <array>
#include <stdexcept>

namespace ssmc {

namespace {

std::uint64_t u(Index v) {
  if (v < 0) throw std::invalid_argument("ops count: negative extent");
  return static_cast<std::uint64_t>(v);
}


Index round_up(Index v, Index multiple) { return (v + multiple - 1) / multiple * multiple; }

}  // namespace

std::uint64_t conv_macs(Index out_height, Index out_width, Index in_channels, Index out_channels, Index kernel) {
  return u(out_height) * u(out_width) * u(in_channels) * u(out_channels) * u(kernel) * u(kernel);
}

std::uint64_t dense_macs(Index tokens, Index in_channels, Index out_channels) {
  return u(tokens) * u(in_channels) * u(out_channels);
}

std::uint64_t scan_stage_macs(Index tokens, Index hidden, Index state_dim, Index rank) {
  const std::uint64_t e = u(hidden), n = u(state_dim), r = u(rank);
  return 4 * u(tokens) * (e * (r + 2 * n) + r * e + 3 * e * n);
}

std::uint64_t vss_layer_macs(const TransformConfig& config, Index tokens, Index channels) {
  const Index e = channels * config.expansion;
  return 3 * dense_macs(tokens, channels, e) + u(tokens) * u(e) * u(config.dw_kernel) * u(config.dw_kernel) +
         scan_stage_macs(tokens, e, config.state_dim, default_dt_rank(e));
}

std::uint64_t OpsEstimate::scan_macs() const {
  std::uint64_t total = 0;
  for (const auto& s : stages) total += s.scan_macs;
  return total;
}

std::uint64_t OpsEstimate::total_macs() const {
  std::uint64_t total = 0;
  for (const auto& s : stages) total += s.total();
  return total;
}

OpsEstimate estimate_ops(const TransformConfig& config, Index height, Index width) {
  config.validate();
  if (height < 1 || width < 1) throw std::invalid_argument("ops count: image must be non-empty");
  OpsEstimate est;
  est.height = round_up(height, TransformConfig::kTotalStride);
  est.width = round_up(width, TransformConfig::kTotalStride);
  const auto& ch = config.channels;
  const Index k = config.conv_kernel;

  const auto vss = [&](StageOps& s, Index tokens, Index channels, Index layers) {
    const Index e = channels * config.expansion;
    const std::uint64_t scan = scan_stage_macs(tokens, e, config.state_dim, default_dt_rank(e));
    s.scan_macs += u(layers) * scan;
    s.other_macs += u(layers) * (vss_layer_macs(config, tokens, channels) - scan);
  };

  StageOps ga{"g_a"}, gs{"g_s"};
  const std::array<Index, 5> widths{3, ch[0], ch[1], ch[2], ch[3]};
  Index h = est.height, w = est.width;
  for (std::size_t i = 0; i < 4; ++i) {
    h /= 2;
    w /= 2;
    const std::uint64_t conv = conv_macs(h, w, widths[i], widths[i + 1], k);
    ga.other_macs += conv;
    gs.other_macs += conv;  // the transposed convolution does the same products
    vss(ga, h * w, widths[i + 1], config.layers[i]);
    vss(gs, h * w, widths[i + 1], config.layers[i]);
  }

  StageOps ha{"h_a"}, hs{"h_s"};
  const Index latent_tokens = h * w;
  ha.other_macs += conv_macs(h / 2, w / 2, ch[3], ch[4], k);
  vss(ha, (h / 2) * (w / 2), ch[4], config.hyper_layers);
  ha.other_macs += conv_macs(h / 4, w / 4, ch[4], ch[5], k);
  vss(ha, (h / 4) * (w / 4), ch[5], config.hyper_layers);

  hs.other_macs += conv_macs(h / 4, w / 4, ch[5], ch[4], k);
  vss(hs, (h / 2) * (w / 2), ch[4], config.hyper_layers);
  hs.other_macs += conv_macs(h / 2, w / 2, ch[4], ch[4], k);
  vss(hs, latent_tokens, ch[4], config.hyper_layers);
  hs.other_macs += 2 * dense_macs(latent_tokens, ch[4], config.latent_channels());

  StageOps cam{"cam"};
  const Index m = config.latent_channels(), ms = config.slice_channels();
  for (Index i = 0; i < config.slices; ++i) {
    cam.other_macs += dense_macs(latent_tokens, 2 * m + i * ms, config.cam_hidden) +
                      dense_macs(latent_tokens, config.cam_hidden, 2 * ms) +
                      dense_macs(latent_tokens, 2 * m + (i + 1) * ms, config.cam_hidden) +
                      dense_macs(latent_tokens, config.cam_hidden, ms);
  }

  est.stages = {ga, ha, hs, cam, gs};
  return est;
}

}  // namespace ssmc

#include "ssmcodec/config.hpp"

#include "ssmcodec/bytes.hpp"

#include <charconv>
#include <map>
#include <sstream>

namespace ssmc {

namespace {

template <std::size_t N>
std::string join(const std::array<Index, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

Index parse_index(std::string_view key, std::string_view text) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("config: bad integer '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

template <std::size_t N>
std::array<Index, N> parse_list(std::string_view key, std::string_view text) {
  std::array<Index, N> out{};
  std::size_t i = 0;
  while (true) {
    const auto comma = text.find(',');
    if (i >= N) throw FormatError("config: too many values for " + std::string(key));
    out[i++] = parse_index(key, text.substr(0, comma));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (i != N) throw FormatError("config: expected " + std::to_string(N) + " values for " + std::string(key));
  return out;
}

}  // namespace

void TransformConfig::validate() const {
  for (const Index c : channels) {
    if (c < 1) throw ShapeError("config: channel counts must be positive");
  }
  for (const Index l : layers) {
    if (l < 1) throw ShapeError("config: every VSS block needs at least one layer");
  }
  if (hyper_layers < 1 || state_dim < 1 || expansion < 1 || cam_hidden < 1) {
    throw ShapeError("config: hyper_layers, state_dim, expansion and cam_hidden must be positive");
  }
  if (dw_kernel < 1 || dw_kernel % 2 == 0) throw ShapeError("config: depthwise kernel must be odd");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ShapeError("config: conv kernel must be odd");
  if (slices < 1 || latent_channels() % slices != 0) {
    throw ShapeError("config: latent channels " + std::to_string(latent_channels()) + " not divisible into " +
                     std::to_string(slices) + " slices");
  }
}

std::string TransformConfig::to_text() const {
  std::ostringstream out;
  out << "name=" << name << '\n'
      << "channels=" << join(channels) << '\n'
      << "layers=" << join(layers) << '\n'
      << "hyper_layers=" << hyper_layers << '\n'
      << "state_dim=" << state_dim << '\n'
      << "expansion=" << expansion << '\n'
      << "dw_kernel=" << dw_kernel << '\n'
      << "conv_kernel=" << conv_kernel << '\n'
      << "slices=" << slices << '\n'
      << "cam_hidden=" << cam_hidden << '\n'
      << "tied_directions=" << (tied_directions ? 1 : 0) << '\n';
  return out.str();
}

TransformConfig TransformConfig::from_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("config: malformed line '" + std::string(line) + "'");
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  const auto take = [&](std::string_view key) -> std::string {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("config: missing key " + std::string(key));
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  TransformConfig c;
  c.name = take("name");
  c.channels = parse_list<6>("channels", take("channels"));
  c.layers = parse_list<4>("layers", take("layers"));
  c.hyper_layers = parse_index("hyper_layers", take("hyper_layers"));
  c.state_dim = parse_index("state_dim", take("state_dim"));
  c.expansion = parse_index("expansion", take("expansion"));
  c.dw_kernel = parse_index("dw_kernel", take("dw_kernel"));
  c.conv_kernel = parse_index("conv_kernel", take("conv_kernel"));
  c.slices = parse_index("slices", take("slices"));
  c.cam_hidden = parse_index("cam_hidden", take("cam_hidden"));
  c.tied_directions = parse_index("tied_directions", take("tied_directions")) != 0;
  if (!kv.empty()) throw FormatError("config: unknown key " + kv.begin()->first);
  c.validate();
  return c;
}

TransformConfig TransformConfig::preset(std::string_view name) {
  TransformConfig c;
  if (name == "paper") {
    c.name = "paper";
    c.channels = {256, 256, 256, 320, 256, 192};
    c.layers = {2, 2, 9, 2};
    c.state_dim = 16;
    c.cam_hidden = 224;
  } else if (name == "desk") {
    // Defaults above.
  } else if (name == "tiny") {
    c.name = "tiny";
    c.channels = {16, 16, 16, 20, 16, 12};
    c.layers = {1, 1, 2, 1};
    c.hyper_layers = 1;
    c.state_dim = 4;
    c.cam_hidden = 16;
  } else {
    throw std::invalid_argument("unknown model preset '" + std::string(name) + "' (expected paper, desk or tiny)");
  }
  c.validate();
  return c;
}

std::vector<std::string> TransformConfig::preset_names() { return {"paper", "desk", "tiny"}; }

}  // namespace ssmc

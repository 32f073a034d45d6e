#include "ssmcodec/codec.hpp"
#include "ssmcodec/entropy.hpp"
#include "ssmcodec/image_io.hpp"
#include "ssmcodec/metrics.hpp"
#include "ssmcodec/ops_count.hpp"
#include "ssmcodec/range_coder.hpp"
#include "ssmcodec/weights.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace ssmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// Bad command-line input detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string weights;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  int lambda_index = 2;
  int threads = 1;
  std::string out;
  std::string format = "png";

  std::string input;
  std::vector<Index> sizes{256, 512, 1024, 2048};
  bool ops_only = false;
  Index max_offset = 4;
  std::string rd_anchor, rd_test;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

void require_output(const std::string& path) {
  if (path.empty()) throw UsageError("--out is required");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw UsageError("output directory '" + parent.string() + "' does not exist");
  }
}

WeightStore load_weights(const Options& o) {
  if (!o.weights.empty()) {
    require_file(o.weights, "weights file");
    spdlog::info("loading weights from {}", o.weights);
    return WeightStore::load(o.weights);
  }
  spdlog::info("initializing '{}' weights from seed {}", o.preset, o.seed);
  return init_weights(TransformConfig::preset(o.preset), o.seed);
}

std::string join_sizes(const Bitstream& s) {
  std::string out;
  for (std::size_t i = 0; i < s.y_streams.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s.y_streams[i].size());
  }
  return out;
}

int cmd_init_weights(const Options& o) {
  require_output(o.out);
  const WeightStore store = init_weights(TransformConfig::preset(o.preset), o.seed);
  store.save(o.out);
  std::cout << "preset " << o.preset << "\nseed " << o.seed << "\nparameters " << store.parameter_count()
            << "\nchecksum " << std::hex << store.fingerprint() << std::dec << "\n";
  return kExitOk;
}

int cmd_encode(const Options& o) {
  require_file(o.input, "input image");
  require_output(o.out);
  const CodecModel model(load_weights(o));
  const Image img = read_image(o.input);
  const auto start = std::chrono::steady_clock::now();
  const EncodeResult r = encode_image(to_tensor(img), model, o.lambda_index);
  const double elapsed = seconds_since(start);
  const std::vector<std::uint8_t> bytes = r.stream.serialize();
  write_file(o.out, bytes);
  const double file_bytes = static_cast<double>(fs::file_size(o.out));
  if (r.saturated > 0) spdlog::warn("{} latent symbols saturated at the alphabet edge", r.saturated);
  std::cout << "size " << img.width << "x" << img.height << "\n"
            << "bytes " << bytes.size() << "\n"
            << "header_bytes " << bytes.size() - r.stream.payload_bytes() << "\n"
            << "z_bytes " << r.stream.z_stream.size() << "\n"
            << "y_bytes " << join_sizes(r.stream) << "\n"
            << "bpp " << 8.0 * file_bytes / double(img.height * img.width) << "\n"
            << "estimated_bits " << r.estimated_bits_z + r.estimated_bits_y << "\n"
            << "seconds " << elapsed << "\n";
  return kExitOk;
}

ImageFormat parse_format(const std::string& f) { return f == "ppm" ? ImageFormat::kPpm : ImageFormat::kPng; }

int cmd_decode(const Options& o) {
  require_file(o.input, "input bitstream");
  require_output(o.out);
  const CodecModel model(load_weights(o));
  const Bitstream stream = Bitstream::parse(read_file(o.input));
  const auto start = std::chrono::steady_clock::now();
  const DecodeResult r = decode_image(stream, model);
  const double elapsed = seconds_since(start);
  write_image(o.out, to_image(r.image), parse_format(o.format));
  std::cout << "size " << stream.width << "x" << stream.height << "\n"
            << "seconds " << elapsed << "\n";
  return kExitOk;
}

int cmd_bench(const Options& o) {
  const WeightStore store = load_weights(o);
  std::optional<CodecModel> model;
  if (!o.ops_only) model.emplace(store);
  std::cout << "size,pixels,g_a_macs,h_a_macs,h_s_macs,cam_macs,g_s_macs,scan_macs,total_macs,"
               "encode_seconds,decode_seconds,bytes\n";
  for (const Index size : o.sizes) {
    if (size < 1) throw UsageError("bench sizes must be positive");
    const OpsEstimate est = estimate_ops(store.config(), size, size);
    std::cout << size << ',' << size * size;
    for (const auto& s : est.stages) std::cout << ',' << s.total();
    std::cout << ',' << est.scan_macs() << ',' << est.total_macs();
    if (model) {
      spdlog::info("bench {}x{}", size, size);
      const Tensorf image = to_tensor(synthetic_image(size, size, o.seed));
      auto start = std::chrono::steady_clock::now();
      const EncodeResult enc = encode_image(image, *model, o.lambda_index);
      const double t_enc = seconds_since(start);
      start = std::chrono::steady_clock::now();
      decode_image(enc.stream, *model);
      const double t_dec = seconds_since(start);
      std::cout << ',' << t_enc << ',' << t_dec << ',' << enc.stream.total_bytes();
    } else {
      std::cout << ",,,";
    }
    std::cout << '\n' << std::flush;
  }
  return kExitOk;
}

std::vector<RdPoint> read_rd_curve(const std::string& path) {
  require_file(path, "RD curve");
  std::ifstream in(path);
  std::vector<RdPoint> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    RdPoint p;
    if (!(ls >> p.bpp >> p.psnr)) {
      if (pts.empty()) continue;  // header row
      throw FormatError("RD curve '" + path + "': malformed line '" + line + "'");
    }
    pts.push_back(p);
  }
  return pts;
}

struct ImageReport {
  std::string name;
  Index height = 0, width = 0;
  double bpp = 0, psnr = 0, deviation = 0;
  Tensor<double> normalized;
  Eigen::MatrixXd deviation_map;
};

ImageReport analyze_one(const fs::path& path, const CodecModel& model, int lambda_index) {
  const Image img = read_image(path);
  const EncodeResult enc = encode_image(to_tensor(img), model, lambda_index);
  const DecodeResult dec = decode_image(enc.stream, model);
  const LatentBundle& l = enc.latents;
  const DeviationMap dev = quantize_deviation(l.y, l.y_hat);
  ImageReport r;
  r.name = path.filename().string();
  r.height = img.height;
  r.width = img.width;
  r.bpp = 8.0 * double(enc.stream.total_bytes()) / double(img.height * img.width);
  r.psnr = psnr(img, to_image(dec.image));
  r.deviation = dev.mean;
  r.normalized = normalize_latent(l.y, l.mean, l.scale);
  r.deviation_map = dev.map;
  return r;
}

int cmd_analyze(const Options& o) {
  if (o.input.empty() && o.rd_anchor.empty()) throw UsageError("analyze needs an image directory or RD curves");
  if (!o.rd_anchor.empty() || !o.rd_test.empty()) {
    const auto anchor = read_rd_curve(o.rd_anchor), test = read_rd_curve(o.rd_test);
    std::cout << "bd_rate_percent " << bd_rate(anchor, test) << "\n";
  }
  if (o.input.empty()) return kExitOk;
  if (!fs::is_directory(o.input)) throw UsageError("image directory '" + o.input + "' does not exist");
  if (!o.out.empty()) fs::create_directories(o.out);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.input)) {
    const std::string ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".png" || ext == ".ppm" || ext == ".pgm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no PNG or PPM images in '" + o.input + "'");

  const CodecModel model(load_weights(o));
  std::vector<std::optional<ImageReport>> reports(files.size());
  std::vector<std::string> errors(files.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        spdlog::info("analyzing {}", files[i].string());
        reports[i] = analyze_one(files[i], model, o.lambda_index);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < o.threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) throw FormatError(files[i].string() + ": " + errors[i]);
  }

  CorrelationAccumulator corr(o.max_offset);
  std::vector<double> samples;
  std::cout << "file,height,width,bpp,psnr,deviation_mean\n";
  for (const auto& r : reports) {
    std::cout << r->name << ',' << r->height << ',' << r->width << ',' << r->bpp << ',' << r->psnr << ','
              << r->deviation << '\n';
    corr.add(r->normalized);
    samples.insert(samples.end(), r->normalized.data(), r->normalized.data() + r->normalized.size());
    if (!o.out.empty()) write_file(fs::path(o.out) / (r->name + ".deviation.pgm"), map_to_pgm(r->deviation_map));
  }
  const CorrelationMap map = corr.result();
  std::cout << "kl_nats " << kl_to_standard_normal(samples) << "\n";
  std::cout << "correlation (rows di = -K..K, columns dj = -K..K)\n";
  std::ostringstream csv;
  for (Index i = 0; i < map.values.rows(); ++i) {
    for (Index j = 0; j < map.values.cols(); ++j) csv << (j ? "," : "") << map.values(i, j);
    csv << '\n';
  }
  std::cout << csv.str();
  if (!o.out.empty()) {
    std::ofstream(fs::path(o.out) / "correlation.csv") << csv.str();
  }
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("ssmcodec");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SSMCODEC_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  Options o;
  CLI::App app{"Learned image codec built on two-dimensional selective scans"};
  app.require_subcommand(1);

  const auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--weights", o.weights, "Weight archive (default: seeded weights of --preset)");
    cmd->add_option("--preset", o.preset, "Architecture preset")
        ->check(CLI::IsMember(TransformConfig::preset_names()));
    cmd->add_option("--seed", o.seed, "Seed for generated weights and test images");
    cmd->add_option("--threads", o.threads, "Images processed in parallel")->check(CLI::Range(1, 256));
  };
  const auto add_lambda = [&](CLI::App* cmd) {
    cmd->add_option("--lambda-index", o.lambda_index, "Rate point index")
        ->check(CLI::Range(0, static_cast<int>(kLambdaLadder.size()) - 1));
  };

  auto* init = app.add_subcommand("init-weights", "Write a seeded weight archive");
  add_model_flags(init);
  init->add_option("--out", o.out, "Output archive")->required();

  auto* enc = app.add_subcommand("encode", "Compress a PNG or PPM image");
  add_model_flags(enc);
  add_lambda(enc);
  enc->add_option("input", o.input, "Input image")->required();
  enc->add_option("--out", o.out, "Output bitstream")->required();

  auto* dec = app.add_subcommand("decode", "Decompress a bitstream");
  add_model_flags(dec);
  dec->add_option("input", o.input, "Input bitstream")->required();
  dec->add_option("--out", o.out, "Output image")->required();
  dec->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"png", "ppm"}));

  auto* bench = app.add_subcommand("bench", "Time encode/decode and count MACs across sizes (CSV)");
  add_model_flags(bench);
  add_lambda(bench);
  bench->add_option("--sizes", o.sizes, "Square image sizes")->delimiter(',');
  bench->add_flag("--ops-only", o.ops_only, "Report operation counts without timing");

  auto* analyze = app.add_subcommand("analyze", "Latent statistics and RD metrics over a directory of images");
  add_model_flags(analyze);
  add_lambda(analyze);
  analyze->add_option("input", o.input, "Image directory");
  analyze->add_option("--out", o.out, "Directory for correlation CSV and deviation maps");
  analyze->add_option("--max-offset", o.max_offset, "Correlation window radius")->check(CLI::Range(0, 64));
  analyze->add_option("--rd-anchor", o.rd_anchor, "Anchor RD curve (bpp,psnr per line)");
  analyze->add_option("--rd-test", o.rd_test, "Test RD curve (bpp,psnr per line)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*init) return cmd_init_weights(o);
    if (*enc) return cmd_encode(o);
    if (*dec) return cmd_decode(o);
    if (*bench) return cmd_bench(o);
    return cmd_analyze(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

// SPDX-License-Identifier: Apache-2.0
//
// ivpf command-line front end: compress / decompress / geninit / selftest /
// bench. Talks to the codec exclusively through the C API.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ivpf.h"
#include "json.hpp"

namespace {

using nlohmann::json;

[[noreturn]] void die(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  std::exit(1);
}

void require_ok(ivpf_status status, const std::string& what) {
  if (status != IVPF_OK) die(what + ": " + ivpf_last_error());
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) die("cannot write " + path);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) die("short write to " + path);
}

enum class SourceFormat : std::uint8_t { kRaw = 0, kPgm = 1, kPpm = 2 };

struct TensorData {
  SourceFormat format = SourceFormat::kRaw;
  int depth = 8;  // bits per sample
  std::vector<std::uint32_t> dims;
  std::vector<std::int64_t> samples;
};

// Raw tensor file: magic "IVPT", bit depth u8, rank u8, dims u32 LE,
// one byte per sample.
TensorData parse_raw(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "IVPT", 4) != 0) {
    die("not a raw tensor file");
  }
  TensorData t;
  t.depth = bytes[4];
  const std::uint8_t rank = bytes[5];
  if (t.depth < 1 || t.depth > 8 || rank == 0 || rank > 8) {
    die("raw tensor: bad depth or rank");
  }
  std::size_t pos = 6;
  if (bytes.size() < pos + 4u * rank) die("raw tensor: truncated header");
  std::uint64_t total = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    std::uint32_t d = 0;
    for (int b = 0; b < 4; ++b) d |= std::uint32_t{bytes[pos++]} << (8 * b);
    t.dims.push_back(d);
    total *= d;
  }
  if (bytes.size() - pos != total) die("raw tensor: payload size mismatch");
  t.samples.reserve(total);
  for (std::uint64_t i = 0; i < total; ++i) {
    const std::uint8_t v = bytes[pos + i];
    if (v >> t.depth) die("raw tensor: sample exceeds declared depth");
    t.samples.push_back(v);
  }
  return t;
}

int pnm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (std::isspace(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  int value = 0;
  bool any = false;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos++] - '0');
    any = true;
  }
  if (!any) die("malformed image header");
  return value;
}

TensorData parse_pnm(const std::vector<std::uint8_t>& bytes) {
  const bool color = bytes[1] == '6';
  TensorData t;
  t.format = color ? SourceFormat::kPpm : SourceFormat::kPgm;
  std::size_t pos = 2;
  const int width = pnm_token(bytes, pos);
  const int height = pnm_token(bytes, pos);
  const int maxval = pnm_token(bytes, pos);
  if (maxval != 255) die("only 8-bit images are supported");
  ++pos;  // single whitespace after maxval
  const std::size_t total =
      static_cast<std::size_t>(width) * height * (color ? 3 : 1);
  if (bytes.size() - pos != total) die("image payload size mismatch");
  t.dims = {static_cast<std::uint32_t>(height),
            static_cast<std::uint32_t>(width)};
  if (color) t.dims.push_back(3);
  t.samples.assign(bytes.begin() + pos, bytes.end());
  return t;
}

TensorData read_tensor(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "IVPT", 4) == 0) {
    return parse_raw(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == '5' || bytes[1] == '6')) {
    return parse_pnm(bytes);
  }
  die("unrecognized input format (expected raw tensor, PGM, or PPM)");
}

void write_tensor(const std::string& path, const TensorData& t) {
  std::vector<std::uint8_t> out;
  if (t.format == SourceFormat::kRaw) {
    out = {'I', 'V', 'P', 'T', static_cast<std::uint8_t>(t.depth),
           static_cast<std::uint8_t>(t.dims.size())};
    for (std::uint32_t d : t.dims) {
      for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::uint8_t>(d >> (8 * b)));
      }
    }
  } else {
    std::ostringstream header;
    header << (t.format == SourceFormat::kPpm ? "P6" : "P5") << "\n"
           << t.dims[1] << " " << t.dims[0] << "\n255\n";
    const std::string h = header.str();
    out.assign(h.begin(), h.end());
  }
  for (std::int64_t v : t.samples) {
    out.push_back(static_cast<std::uint8_t>(v));
  }
  write_file(path, out);
}

struct ModelHandle {
  ivpf_model* model = nullptr;
  ~ModelHandle() { ivpf_model_free(model); }
};

int job_count(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("IVPF_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

template <typename Fn>
void parallel_for(std::uint32_t count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::uint32_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::uint32_t> next{0};
  std::vector<std::thread> workers;
  const int n = std::min<std::uint32_t>(jobs, count);
  for (int w = 0; w < n; ++w) {
    workers.emplace_back([&] {
      for (std::uint32_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (in.size() - pos < 4) die("archive truncated");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{in[pos++]} << (8 * b);
  return v;
}

void print_report(const ivpf_report& report, std::uint32_t items,
                  const std::string& mode) {
  if (mode == "json") {
    json j;
    j["items"] = items;
    j["bits_latent"] = report.bits_latent;
    j["bits_uniform_debited"] = report.bits_uniform_debited;
    j["bits_aux_register"] = report.bits_aux_register;
    j["net_bits"] = report.net_bits;
    j["container_bits"] = report.container_bits;
    j["bpd"] = report.bpd;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "items               " << items << "\n"
              << "latent bits         " << report.bits_latent << "\n"
              << "dequant debit bits  " << report.bits_uniform_debited << "\n"
              << "aux register bits   " << report.bits_aux_register << "\n"
              << "net bits            " << report.net_bits << "\n"
              << "container bits      " << report.container_bits << "\n"
              << "bpd                 " << report.bpd << "\n";
  }
}

int cmd_compress(const std::string& input, const std::string& model_path,
                 const std::string& output, const ivpf_config& config,
                 int jobs, const std::string& report_mode) {
  ModelHandle mh;
  require_ok(ivpf_model_load_file(model_path.c_str(), &mh.model),
             "loading model");
  const std::uint32_t d = ivpf_model_dim(mh.model);

  const TensorData t = read_tensor(input);
  if (t.depth != config.h) {
    die("input depth " + std::to_string(t.depth) + " does not match --h " +
        std::to_string(config.h));
  }
  if (t.samples.empty() || t.samples.size() % d != 0) {
    die("input size " + std::to_string(t.samples.size()) +
        " is not a multiple of the model dimension " + std::to_string(d));
  }
  const auto items = static_cast<std::uint32_t>(t.samples.size() / d);

  std::vector<std::vector<std::uint8_t>> containers(items);
  std::vector<ivpf_report> reports(items);
  std::atomic<bool> failed{false};
  parallel_for(items, job_count(jobs), [&](std::uint32_t i) {
    std::uint8_t* buffer = nullptr;
    std::size_t len = 0;
    if (ivpf_encode(mh.model, &config, t.samples.data() + std::size_t{i} * d,
                    d, &buffer, &len, &reports[i]) != IVPF_OK) {
      if (!failed.exchange(true)) {
        std::cerr << "error: item " << i << ": " << ivpf_last_error() << "\n";
      }
      return;
    }
    containers[i].assign(buffer, buffer + len);
    ivpf_buffer_free(buffer);
  });
  if (failed) return 1;

  // Archive: "IVPA", version, source format, depth, rank, original dims,
  // item count, then length-prefixed containers.
  std::vector<std::uint8_t> archive = {'I', 'V', 'P', 'A', 1,
                                       static_cast<std::uint8_t>(t.format),
                                       static_cast<std::uint8_t>(t.depth),
                                       static_cast<std::uint8_t>(t.dims.size())};
  for (std::uint32_t dim : t.dims) put_u32(archive, dim);
  put_u32(archive, items);
  for (const auto& c : containers) {
    put_u32(archive, static_cast<std::uint32_t>(c.size()));
    archive.insert(archive.end(), c.begin(), c.end());
  }
  write_file(output, archive);

  ivpf_report total{};
  for (const auto& r : reports) {
    total.bits_latent += r.bits_latent;
    total.bits_uniform_debited += r.bits_uniform_debited;
    total.bits_aux_register += r.bits_aux_register;
    total.net_bits += r.net_bits;
    total.container_bits += r.container_bits;
  }
  total.bpd = total.net_bits / static_cast<double>(t.samples.size());
  print_report(total, items, report_mode);
  return 0;
}

int cmd_decompress(const std::string& input, const std::string& model_path,
                   const std::string& output, int jobs) {
  ModelHandle mh;
  require_ok(ivpf_model_load_file(model_path.c_str(), &mh.model),
             "loading model");
  const std::uint32_t d = ivpf_model_dim(mh.model);

  const std::vector<std::uint8_t> archive = read_file(input);
  if (archive.size() < 8 || std::memcmp(archive.data(), "IVPA", 4) != 0) {
    die("not an ivpf archive");
  }
  if (archive[4] != 1) die("unsupported archive version");
  TensorData t;
  t.format = static_cast<SourceFormat>(archive[5]);
  t.depth = archive[6];
  const std::uint8_t rank = archive[7];
  std::size_t pos = 8;
  for (std::uint8_t i = 0; i < rank; ++i) {
    t.dims.push_back(get_u32(archive, pos));
  }
  const std::uint32_t items = get_u32(archive, pos);
  std::vector<std::pair<std::size_t, std::size_t>> spans(items);
  for (std::uint32_t i = 0; i < items; ++i) {
    const std::uint32_t len = get_u32(archive, pos);
    if (archive.size() - pos < len) die("archive truncated");
    spans[i] = {pos, len};
    pos += len;
  }
  if (pos != archive.size()) die("trailing bytes in archive");

  t.samples.assign(std::size_t{items} * d, 0);
  std::atomic<bool> failed{false};
  parallel_for(items, job_count(jobs), [&](std::uint32_t i) {
    if (ivpf_decode(mh.model, archive.data() + spans[i].first,
                    spans[i].second, t.samples.data() + std::size_t{i} * d,
                    d) != IVPF_OK) {
      if (!failed.exchange(true)) {
        std::cerr << "error: item " << i << ": " << ivpf_last_error() << "\n";
      }
    }
  });
  if (failed) return 1;

  std::uint64_t expected = 1;
  for (std::uint32_t dim : t.dims) expected *= dim;
  if (expected != t.samples.size()) die("archive dims do not match payload");
  write_tensor(output, t);
  return 0;
}

std::vector<std::uint32_t> parse_shape(const std::string& text) {
  std::vector<std::uint32_t> shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const long v = std::strtol(part.c_str(), nullptr, 10);
    if (v <= 0) die("bad shape component: " + part);
    shape.push_back(static_cast<std::uint32_t>(v));
  }
  if (shape.empty()) die("empty shape");
  return shape;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ivpf: exact volume-preserving-flow lossless codec"};
  // --h is a codec parameter, so the help flag keeps only its long form
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);

  ivpf_config config;
  ivpf_config_default(&config);
  int jobs = 0;
  std::string report_mode = "text";
  std::string model_path, input, output;

  auto add_config = [&](CLI::App* cmd) {
    cmd->set_help_flag("--help", "print help");
    cmd->add_option("--h", config.h, "input bit depth")->check(CLI::Range(1, 16));
    cmd->add_option("--k", config.k, "latent precision")->check(CLI::Range(1, 24));
    cmd->add_option("--C", config.c, "remainder register bits")
        ->check(CLI::Range(1, 30));
    cmd->add_option("--n", config.n, "CDF frequency bits (0 = auto)")
        ->check(CLI::Range(0, 30));
  };

  auto* compress = app.add_subcommand("compress", "compress a tensor/image");
  compress->add_option("input", input)->required();
  compress->add_option("--model", model_path)->required();
  compress->add_option("-o,--output", output)->required();
  add_config(compress);
  compress->add_option("--jobs", jobs, "worker threads (IVPF_JOBS fallback)");
  compress->add_option("--report", report_mode)
      ->check(CLI::IsMember({"text", "json"}));

  auto* decompress = app.add_subcommand("decompress", "restore a tensor/image");
  decompress->add_option("input", input)->required();
  decompress->add_option("--model", model_path)->required();
  decompress->add_option("-o,--output", output)->required();
  decompress->add_option("--jobs", jobs);

  std::string shape_text = "32,32,3";
  std::uint32_t layers = 4, levels = 1;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::string prior = "mixgauss";
  auto* geninit = app.add_subcommand("geninit", "write a random model file");
  geninit->add_option("-o,--output", output)->required();
  geninit->add_option("--shape", shape_text, "comma-separated dims");
  geninit->add_option("--layers", layers);
  geninit->add_option("--levels", levels);
  geninit->add_option("--seed", seed);
  geninit->add_option("--alpha", alpha, "coupling strength (0 = identity)");
  geninit->add_option("--prior", prior)
      ->check(CLI::IsMember({"uniform", "mixgauss"}));

  auto* selftest = app.add_subcommand("selftest", "run the verification sweep");

  std::uint32_t bench_items = 32;
  auto* bench = app.add_subcommand("bench", "measure throughput");
  bench->add_option("--model", model_path);
  bench->add_option("--items", bench_items)->check(CLI::Range(1, 100000));
  add_config(bench);

  CLI11_PARSE(app, argc, argv);

  if (compress->parsed()) {
    return cmd_compress(input, model_path, output, config, jobs, report_mode);
  }
  if (decompress->parsed()) {
    return cmd_decompress(input, model_path, output, jobs);
  }
  if (geninit->parsed()) {
    const std::vector<std::uint32_t> shape = parse_shape(shape_text);
    ModelHandle mh;
    require_ok(ivpf_model_random(shape.data(), shape.size(), layers, levels,
                                 seed, alpha, prior == "uniform" ? 0 : 1,
                                 &mh.model),
               "generating model");
    require_ok(ivpf_model_save_file(mh.model, output.c_str()),
               "saving model");
    char hex[65];
    require_ok(ivpf_model_hash_hex(mh.model, hex), "hashing model");
    std::cout << "wrote " << output << " (hash " << hex << ")\n";
    return 0;
  }
  if (selftest->parsed()) {
    int failures = 0;
    require_ok(ivpf_selftest(&failures), "selftest");
    std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return failures == 0 ? 0 : 1;
  }
  if (bench->parsed()) {
    ModelHandle mh;
    if (model_path.empty()) {
      const std::uint32_t shape[3] = {8, 8, 3};
      require_ok(ivpf_model_random(shape, 3, 4, 2, 0, 0.05, 1, &mh.model),
                 "generating bench model");
    } else {
      require_ok(ivpf_model_load_file(model_path.c_str(), &mh.model),
                 "loading model");
    }
    ivpf_bench_report report;
    require_ok(ivpf_bench(mh.model, &config, bench_items, &report), "bench");
    std::cout << "encode items/s      " << report.encode_items_per_sec << "\n"
              << "decode items/s      " << report.decode_items_per_sec << "\n"
              << "flow share of enc   " << report.flow_fraction << "\n"
              << "coding steps/item   " << report.coding_steps_per_item
              << "\n";
    return 0;
  }
  return 0;
}

// SPDX-License-Identifier: Apache-2.0

#include "ivpf/model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace ivpf {

namespace {

constexpr char kMagic[4] = {'I', 'V', 'P', 'M'};
constexpr std::uint8_t kVersion = 1;

enum class LayerTag : std::uint8_t {
  kCoupling = 0,
  kConv1x1 = 1,
  kPermute = 2,
  kFactorOut = 3,
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& vs) {
    for (double v : vs) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes)
      : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) v = f64();
    return out;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw format_error("model: truncated file");
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::array<std::uint8_t, 32> sha256(const std::uint8_t* data,
                                    std::size_t len) {
  std::array<std::uint8_t, 32> out{};
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
      out_len != 32) {
    throw error("model: hash computation failed");
  }
  return out;
}

void write_net(ByteWriter& w, const DenseNet& net) {
  w.u8(static_cast<std::uint8_t>(net.activation));
  w.u8(net.bounded ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(net.affines.size()));
  for (const auto& a : net.affines) {
    w.u32(a.in);
    w.u32(a.out);
    w.f64s(a.weight);
    w.f64s(a.bias);
  }
}

DenseNet read_net(ByteReader& r) {
  DenseNet net;
  const std::uint8_t act = r.u8();
  if (act > 1) throw format_error("model: unknown activation tag");
  net.activation = static_cast<DenseNet::Activation>(act);
  net.bounded = r.u8() != 0;
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 64) throw format_error("model: bad affine count");
  net.affines.resize(count);
  for (auto& a : net.affines) {
    a.in = r.u32();
    a.out = r.u32();
    if (a.in == 0 || a.out == 0 || std::uint64_t{a.in} * a.out > (1u << 26)) {
      throw format_error("model: bad affine dims");
    }
    a.weight = r.f64s(std::size_t{a.in} * a.out);
    a.bias = r.f64s(a.out);
  }
  return net;
}

void write_coupling(ByteWriter& w, const CouplingLayer& c) {
  w.u32(c.dim);
  w.u32(c.dim_b);
  w.f64(c.alpha);
  write_net(w, c.net);
}

CouplingLayer read_coupling(ByteReader& r) {
  CouplingLayer c;
  c.dim = r.u32();
  c.dim_b = r.u32();
  c.alpha = r.f64();
  c.net = read_net(r);
  return c;
}

std::vector<std::uint8_t> serialize_payload(const FlowModel& model) {
  ByteWriter w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(model.shape.size()));
  for (std::uint32_t d : model.shape) w.u32(d);
  w.f64(model.support);
  w.u8(static_cast<std::uint8_t>(model.prior_kind));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const Layer& layer : model.layers) {
    if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::kCoupling));
      write_coupling(w, *c);
    } else if (const auto* v = std::get_if<Conv1x1Layer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::kConv1x1));
      w.u32(v->dim);
      w.u32(v->channels);
      for (std::uint32_t p : v->perm) w.u32(p);
      w.f64s(v->lower);
      w.f64s(v->upper);
      w.f64s(v->lambda);
    } else if (const auto* p = std::get_if<PermuteLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::kPermute));
      w.u32(p->dim);
      for (std::uint32_t q : p->perm) w.u32(q);
    } else if (const auto* f = std::get_if<FactorOutLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(LayerTag::kFactorOut));
      w.u32(f->dim);
      w.u32(f->dim_keep);
      w.u32(f->dim_factor);
      write_coupling(w, f->inner);
      write_net(w, f->head);
      w.f64(f->mu_scale);
      w.f64(f->gamma_scale);
      w.f64(f->gamma_bias);
    }
  }
  w.u32(model.prior.dim);
  w.u32(model.prior.components);
  w.f64s(model.prior.logits);
  w.f64s(model.prior.mu);
  w.f64s(model.prior.gamma);
  return w.take();
}

}  // namespace

std::uint32_t FlowModel::dim() const {
  std::uint32_t d = 1;
  for (std::uint32_t s : shape) d *= s;
  return d;
}

std::uint32_t FlowModel::final_dim() const {
  std::uint32_t d = dim();
  for (const Layer& layer : layers) {
    if (const auto* f = std::get_if<FactorOutLayer>(&layer)) {
      d -= f->dim_factor;
    }
  }
  return d;
}

namespace {

void validate_net(const DenseNet& net, std::uint32_t in, std::uint32_t out,
                  const char* what) {
  if (net.affines.empty() || net.affines.front().in != in ||
      net.affines.back().out != out) {
    throw domain_error(std::string(what) + ": net dims do not match layer");
  }
  std::uint32_t cur = in;
  for (const auto& a : net.affines) {
    if (a.in != cur || a.weight.size() != std::size_t{a.in} * a.out ||
        a.bias.size() != a.out) {
      throw domain_error(std::string(what) + ": inconsistent affine chain");
    }
    for (double v : a.weight) {
      if (!std::isfinite(v)) throw domain_error("model: non-finite weight");
    }
    for (double v : a.bias) {
      if (!std::isfinite(v)) throw domain_error("model: non-finite bias");
    }
    cur = a.out;
  }
}

void validate_perm(const std::vector<std::uint32_t>& perm, std::uint32_t n,
                   const char* what) {
  if (perm.size() != n) {
    throw domain_error(std::string(what) + ": permutation size mismatch");
  }
  std::vector<bool> seen(n, false);
  for (std::uint32_t p : perm) {
    if (p >= n || seen[p]) {
      throw domain_error(std::string(what) + ": not a permutation");
    }
    seen[p] = true;
  }
}

void validate_coupling(const CouplingLayer& c, std::uint32_t dim,
                       const char* what) {
  if (c.dim != dim || c.dim_b == 0 || c.dim_b >= c.dim) {
    throw domain_error(std::string(what) + ": bad coupling split");
  }
  if (!std::isfinite(c.alpha)) {
    throw domain_error(std::string(what) + ": non-finite alpha");
  }
  validate_net(c.net, c.dim - c.dim_b, 2 * c.dim_b, what);
}

}  // namespace

void FlowModel::validate() const {
  if (shape.empty() || shape.size() > 8) {
    throw domain_error("model: shape rank out of [1, 8]");
  }
  for (std::uint32_t s : shape) {
    if (s == 0) throw domain_error("model: zero-sized shape dim");
  }
  if (!(support > 0.0) || !std::isfinite(support)) {
    throw domain_error("model: support bound must be positive");
  }
  std::uint32_t cur = dim();
  for (const Layer& layer : layers) {
    if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
      validate_coupling(*c, cur, "coupling");
    } else if (const auto* v = std::get_if<Conv1x1Layer>(&layer)) {
      const std::uint32_t c2 = v->channels;
      if (v->dim != cur || c2 == 0 || cur % c2 != 0) {
        throw domain_error("conv1x1: channels must divide dim");
      }
      validate_perm(v->perm, c2, "conv1x1");
      if (v->lower.size() != std::size_t{c2} * c2 ||
          v->upper.size() != std::size_t{c2} * c2 ||
          v->lambda.size() != c2) {
        throw domain_error("conv1x1: matrix size mismatch");
      }
      double log_sum = 0.0;
      for (std::uint32_t i = 0; i < c2; ++i) {
        if (v->lower[std::size_t{i} * c2 + i] != 1.0 ||
            v->upper[std::size_t{i} * c2 + i] != 1.0) {
          throw domain_error("conv1x1: triangular factors need unit diagonal");
        }
        for (std::uint32_t j = i + 1; j < c2; ++j) {
          if (v->lower[std::size_t{i} * c2 + j] != 0.0 ||
              v->upper[std::size_t{j} * c2 + i] != 0.0) {
            throw domain_error("conv1x1: off-triangle entries must be zero");
          }
        }
        if (!(v->lambda[i] > 0.0) || !std::isfinite(v->lambda[i])) {
          throw domain_error("conv1x1: lambda must be positive");
        }
        log_sum += std::log(v->lambda[i]);
      }
      if (std::fabs(log_sum) > 1e-6) {
        throw domain_error("conv1x1: prod(lambda) must be 1");
      }
    } else if (const auto* p = std::get_if<PermuteLayer>(&layer)) {
      if (p->dim != cur) throw domain_error("permute: dim mismatch");
      validate_perm(p->perm, cur, "permute");
    } else if (const auto* f = std::get_if<FactorOutLayer>(&layer)) {
      if (f->dim != cur || f->dim_keep == 0 || f->dim_factor == 0 ||
          f->dim_keep + f->dim_factor != f->dim) {
        throw domain_error("factor-out: bad split");
      }
      validate_coupling(f->inner, f->dim, "factor-out inner");
      validate_net(f->head, f->dim_keep, 2 * f->dim_factor, "factor-out head");
      if (!std::isfinite(f->mu_scale) || !std::isfinite(f->gamma_scale) ||
          !std::isfinite(f->gamma_bias)) {
        throw domain_error("factor-out: non-finite head transform");
      }
      cur = f->dim_keep;
    }
  }
  if (cur == 0) throw domain_error("model: empty final latent");
  if (prior_kind == PriorKind::kMixGauss) {
    if (prior.dim != cur || prior.components == 0) {
      throw domain_error("prior: dims do not match final latent");
    }
    const std::size_t n = std::size_t{prior.dim} * prior.components;
    if (prior.logits.size() != n || prior.mu.size() != n ||
        prior.gamma.size() != n) {
      throw domain_error("prior: parameter array size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(prior.logits[i]) || !std::isfinite(prior.mu[i]) ||
          !std::isfinite(prior.gamma[i])) {
        throw domain_error("prior: non-finite parameter");
      }
    }
  }
}

std::vector<std::uint8_t> save(const FlowModel& model) {
  model.validate();
  std::vector<std::uint8_t> payload = serialize_payload(model);
  const auto digest = sha256(payload.data(), payload.size());
  payload.insert(payload.end(), digest.begin(), digest.end());
  return payload;
}

FlowModel load(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 32 + 5) {
    throw format_error("model: file too short");
  }
  const std::size_t payload_len = bytes.size() - 32;
  const auto digest = sha256(bytes.data(), payload_len);
  if (!std::equal(digest.begin(), digest.end(), bytes.begin() + payload_len)) {
    throw format_error("model: content hash mismatch");
  }

  ByteReader r(bytes);
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw format_error("model: bad magic");
  }
  if (r.u8() != kVersion) {
    throw format_error("model: unsupported version");
  }

  FlowModel model;
  const std::uint8_t rank = r.u8();
  model.shape.resize(rank);
  for (auto& d : model.shape) d = r.u32();
  model.support = r.f64();
  const std::uint8_t pk = r.u8();
  if (pk > 1) throw format_error("model: unknown prior kind");
  model.prior_kind = static_cast<PriorKind>(pk);
  const std::uint32_t layer_count = r.u32();
  if (layer_count > 4096) throw format_error("model: layer count too large");
  model.layers.reserve(layer_count);
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::uint8_t tag = r.u8();
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::kCoupling:
        model.layers.emplace_back(read_coupling(r));
        break;
      case LayerTag::kConv1x1: {
        Conv1x1Layer v;
        v.dim = r.u32();
        v.channels = r.u32();
        if (v.channels == 0 || v.channels > 4096) {
          throw format_error("model: bad channel count");
        }
        v.perm.resize(v.channels);
        for (auto& p : v.perm) p = r.u32();
        v.lower = r.f64s(std::size_t{v.channels} * v.channels);
        v.upper = r.f64s(std::size_t{v.channels} * v.channels);
        v.lambda = r.f64s(v.channels);
        model.layers.emplace_back(std::move(v));
        break;
      }
      case LayerTag::kPermute: {
        PermuteLayer p;
        p.dim = r.u32();
        if (p.dim == 0 || p.dim > (1u << 24)) {
          throw format_error("model: bad permute dim");
        }
        p.perm.resize(p.dim);
        for (auto& q : p.perm) q = r.u32();
        model.layers.emplace_back(std::move(p));
        break;
      }
      case LayerTag::kFactorOut: {
        FactorOutLayer f;
        f.dim = r.u32();
        f.dim_keep = r.u32();
        f.dim_factor = r.u32();
        f.inner = read_coupling(r);
        f.head = read_net(r);
        f.mu_scale = r.f64();
        f.gamma_scale = r.f64();
        f.gamma_bias = r.f64();
        model.layers.emplace_back(std::move(f));
        break;
      }
      default:
        throw format_error("model: unknown layer tag");
    }
  }
  model.prior.dim = r.u32();
  model.prior.components = r.u32();
  if (std::uint64_t{model.prior.dim} * model.prior.components > (1u << 26)) {
    throw format_error("model: prior too large");
  }
  const std::size_t n = std::size_t{model.prior.dim} * model.prior.components;
  model.prior.logits = r.f64s(n);
  model.prior.mu = r.f64s(n);
  model.prior.gamma = r.f64s(n);
  if (r.pos() != payload_len) {
    throw format_error("model: trailing bytes in payload");
  }
  std::copy(digest.begin(), digest.end(), model.hash.begin());
  model.validate();
  return model;
}

FlowModel load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("model: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load(bytes);
}

void save_file(const FlowModel& model, const std::string& path) {
  const std::vector<std::uint8_t> bytes = save(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error("model: cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw error("model: short write to " + path);
}

std::string hash_hex(const FlowModel& model) {
  const std::vector<std::uint8_t> payload = serialize_payload(model);
  const auto digest = sha256(payload.data(), payload.size());
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

namespace {

DenseNet random_net(std::mt19937_64& rng, std::uint32_t in,
                    std::uint32_t hidden, std::uint32_t out) {
  std::normal_distribution<double> normal;
  DenseNet net;
  net.activation = DenseNet::Activation::kTanh;
  net.bounded = true;
  const std::uint32_t widths[4] = {in, hidden, hidden, out};
  for (int l = 0; l < 3; ++l) {
    DenseNet::Affine a;
    a.in = widths[l];
    a.out = widths[l + 1];
    const double scale =
        (l == 2 ? 0.3 : 1.0) / std::sqrt(static_cast<double>(a.in));
    a.weight.resize(std::size_t{a.in} * a.out);
    for (double& w : a.weight) w = scale * normal(rng);
    a.bias.resize(a.out);
    for (double& b : a.bias) b = 0.1 * normal(rng);
    net.affines.push_back(std::move(a));
  }
  return net;
}

CouplingLayer random_coupling(std::mt19937_64& rng, std::uint32_t dim,
                              double alpha, std::uint32_t hidden) {
  CouplingLayer c;
  c.dim = dim;
  c.dim_b = std::max<std::uint32_t>(1, dim / 4);  // 3:1 split
  c.alpha = alpha;
  c.net = random_net(rng, dim - c.dim_b, hidden, 2 * c.dim_b);
  return c;
}

Conv1x1Layer random_conv(std::mt19937_64& rng, std::uint32_t dim,
                         std::uint32_t channels, bool trivial_lu) {
  std::normal_distribution<double> normal;
  Conv1x1Layer v;
  v.dim = dim;
  v.channels = channels;
  v.perm.resize(channels);
  for (std::uint32_t i = 0; i < channels; ++i) v.perm[i] = i;
  std::shuffle(v.perm.begin(), v.perm.end(), rng);
  v.lower.assign(std::size_t{channels} * channels, 0.0);
  v.upper.assign(std::size_t{channels} * channels, 0.0);
  v.lambda.assign(channels, 1.0);
  for (std::uint32_t i = 0; i < channels; ++i) {
    v.lower[std::size_t{i} * channels + i] = 1.0;
    v.upper[std::size_t{i} * channels + i] = 1.0;
    if (trivial_lu) continue;
    for (std::uint32_t j = 0; j < i; ++j) {
      v.lower[std::size_t{i} * channels + j] = 0.03 * normal(rng);
      v.upper[std::size_t{j} * channels + i] = 0.03 * normal(rng);
    }
  }
  return v;
}

}  // namespace

FlowModel random_init(const std::vector<std::uint32_t>& shape,
                      const InitOptions& options) {
  FlowModel model;
  model.shape = shape;
  model.prior_kind = options.prior;
  model.support = 2.0;
  const std::uint32_t d = model.dim();
  if (d < 2) throw domain_error("random_init: need at least 2 dims");
  const std::uint32_t channels = shape.back();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;

  const std::uint32_t levels = std::max<std::uint32_t>(1, options.levels);
  const std::uint32_t per_level =
      std::max<std::uint32_t>(1, options.layers / levels);

  std::uint32_t cur = d;
  for (std::uint32_t level = 0; level < levels; ++level) {
    for (std::uint32_t b = 0; b < per_level; ++b) {
      if (cur % channels == 0 && channels > 1) {
        // alpha == 0 keeps the LU factors trivial so the whole model is the
        // identity composed with permutations.
        model.layers.emplace_back(
            random_conv(rng, cur, channels, options.alpha == 0.0));
      } else {
        PermuteLayer p;
        p.dim = cur;
        p.perm.resize(cur);
        for (std::uint32_t i = 0; i < cur; ++i) p.perm[i] = i;
        std::shuffle(p.perm.begin(), p.perm.end(), rng);
        model.layers.emplace_back(std::move(p));
      }
      if (cur >= 2) {
        model.layers.emplace_back(
            random_coupling(rng, cur, options.alpha, options.hidden));
      }
    }
    const bool last = level + 1 == levels;
    if (!last) {
      // Split off roughly half, keeping both halves channel-aligned.
      std::uint32_t factor = cur / 2;
      if (cur % channels == 0) factor -= factor % channels;
      if (factor == 0 || cur - factor < 2) {
        break;  // too small to factor further
      }
      FactorOutLayer f;
      f.dim = cur;
      f.dim_factor = factor;
      f.dim_keep = cur - factor;
      f.inner = random_coupling(rng, cur, options.alpha, options.hidden);
      f.head = random_net(rng, f.dim_keep, options.hidden, 2 * factor);
      f.mu_scale = 0.5;
      f.gamma_scale = 0.5;
      f.gamma_bias = -3.2;
      model.layers.emplace_back(std::move(f));
      cur -= factor;
    }
  }

  if (options.prior == PriorKind::kMixGauss) {
    const std::uint32_t K = 3;
    model.prior.dim = cur;
    model.prior.components = K;
    const std::size_t n = std::size_t{cur} * K;
    model.prior.logits.resize(n);
    model.prior.mu.resize(n);
    model.prior.gamma.resize(n);
    const double base_mu[3] = {-0.25, 0.0, 0.25};
    for (std::size_t i = 0; i < n; ++i) {
      model.prior.logits[i] = 0.3 * normal(rng);
      model.prior.mu[i] = base_mu[i % K] + 0.05 * normal(rng);
      model.prior.gamma[i] = 2.0 * std::log(0.15) + 0.2 * normal(rng);
    }
  }

  model.validate();
  const std::vector<std::uint8_t> payload = serialize_payload(model);
  const auto digest = sha256(payload.data(), payload.size());
  std::copy(digest.begin(), digest.end(), model.hash.begin());
  return model;
}

namespace {

std::vector<double> coupling_real(const CouplingLayer& c,
                                  std::vector<double> x) {
  const std::uint32_t da = c.dim - c.dim_b;
  const std::vector<double> out =
      c.net.eval(std::span(x).first(da));
  std::vector<double> s(c.dim_b), t(c.dim_b);
  vp_project(std::span(out).first(c.dim_b), std::span(out).subspan(c.dim_b),
             c.alpha, s, t);
  for (std::uint32_t i = 0; i < c.dim_b; ++i) {
    x[da + i] = std::exp(s[i]) * x[da + i] + t[i];
  }
  return x;
}

// W = P * L * Lambda * U as a dense c x c matrix.
std::vector<double> conv_matrix(const Conv1x1Layer& v) {
  const std::uint32_t c = v.channels;
  std::vector<double> lu(std::size_t{c} * c, 0.0);
  for (std::uint32_t i = 0; i < c; ++i) {
    for (std::uint32_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::uint32_t m = 0; m < c; ++m) {
        acc += v.lower[std::size_t{i} * c + m] * v.lambda[m] *
               v.upper[std::size_t{m} * c + j];
      }
      lu[std::size_t{i} * c + j] = acc;
    }
  }
  std::vector<double> w(std::size_t{c} * c, 0.0);
  for (std::uint32_t i = 0; i < c; ++i) {
    // Row i of W selects row perm[i] of L*Lambda*U (z[i] = x[perm[i]] form).
    for (std::uint32_t j = 0; j < c; ++j) {
      w[std::size_t{i} * c + j] = lu[std::size_t{v.perm[i]} * c + j];
    }
  }
  return w;
}

}  // namespace

std::vector<double> continuous_eval(const FlowModel& model,
                                    std::vector<double> x) {
  if (x.size() != model.dim()) {
    throw domain_error("continuous_eval: input dim mismatch");
  }
  std::vector<std::vector<double>> factored;
  for (const Layer& layer : model.layers) {
    if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
      x = coupling_real(*c, std::move(x));
    } else if (const auto* v = std::get_if<Conv1x1Layer>(&layer)) {
      const std::vector<double> w = conv_matrix(*v);
      const std::uint32_t c2 = v->channels;
      for (std::size_t p = 0; p < x.size(); p += c2) {
        std::vector<double> block(x.begin() + p, x.begin() + p + c2);
        for (std::uint32_t i = 0; i < c2; ++i) {
          double acc = 0.0;
          for (std::uint32_t j = 0; j < c2; ++j) {
            acc += w[std::size_t{i} * c2 + j] * block[j];
          }
          x[p + i] = acc;
        }
      }
    } else if (const auto* p = std::get_if<PermuteLayer>(&layer)) {
      std::vector<double> tmp = x;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = tmp[p->perm[i]];
    } else if (const auto* f = std::get_if<FactorOutLayer>(&layer)) {
      x = coupling_real(f->inner, std::move(x));
      factored.emplace_back(x.begin() + f->dim_keep, x.end());
      x.resize(f->dim_keep);
    }
  }
  std::vector<double> out;
  out.reserve(model.dim());
  for (const auto& part : factored) {
    out.insert(out.end(), part.begin(), part.end());
  }
  out.insert(out.end(), x.begin(), x.end());
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw domain_error("continuous_eval: non-finite output");
    }
  }
  return out;
}

}  // namespace ivpf

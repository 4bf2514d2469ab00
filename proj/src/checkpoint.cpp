#include "pathcnn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace pathcnn {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::uint8_t* p, size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

struct Writer {
  std::vector<std::uint8_t> buf;

  void u8(std::uint8_t v) { buf.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(std::uint32_t(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  void doubles(const double* p, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) f64(p[i]);
  }
};

struct Reader {
  const std::vector<std::uint8_t>& buf;
  const std::string& path;
  size_t pos = 0;

  void need(size_t n) {
    if (pos + n > buf.size()) {
      char msg[256];
      std::snprintf(msg, sizeof(msg), "%s: truncated at byte %zu, need %zu more", path.c_str(),
                    pos, n);
      throw FormatError(msg);
    }
  }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + size_t(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  std::int32_t i32() { return std::int32_t(u32()); }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + size_t(i)]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(buf.begin() + std::ptrdiff_t(pos), buf.begin() + std::ptrdiff_t(pos + n));
    pos += n;
    return s;
  }
  void doubles(double* p, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) p[i] = f64();
  }
};

void write_spec(Writer& w, const NetworkSpec& s) {
  w.i32(s.in_channels);
  w.i32(s.classes);
  w.i32(s.gate_reduction);
  w.f64(s.gate_logit_offset);
  w.i32(s.pool_size);
  w.i32(s.pool_stride);
  w.u32(std::uint32_t(s.blocks.size()));
  for (const auto& b : s.blocks) {
    w.i32(b.out_channels);
    w.i32(b.ksize);
    w.i32(b.stride);
    w.i32(b.pad);
    w.u8(b.gated ? 1 : 0);
    w.u8(b.pool_after ? 1 : 0);
  }
}

NetworkSpec read_spec(Reader& r) {
  NetworkSpec s;
  s.in_channels = r.i32();
  s.classes = r.i32();
  s.gate_reduction = r.i32();
  s.gate_logit_offset = r.f64();
  s.pool_size = r.i32();
  s.pool_stride = r.i32();
  std::uint32_t n = r.u32();
  s.blocks.resize(n);
  for (auto& b : s.blocks) {
    b.out_channels = r.i32();
    b.ksize = r.i32();
    b.stride = r.i32();
    b.pad = r.i32();
    b.gated = r.u8() != 0;
    b.pool_after = r.u8() != 0;
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net, const std::string& config_echo) {
  Writer w;
  w.buf.insert(w.buf.end(), kMagic, kMagic + 8);
  w.u32(kVersion);
  write_spec(w, net.spec());
  w.str(config_echo);

  auto params = net.params();
  w.u32(std::uint32_t(params.size()));
  for (auto& p : params) {
    const Shape& sh = p.shape();
    w.u8(std::uint8_t(sh.size()));
    for (int d : sh) w.i32(d);
    w.doubles(p.data(), p.numel());
  }

  std::uint32_t num_bn = 0;
  for (auto& b : net.conv_blocks()) (void)b, ++num_bn;
  w.u32(num_bn);
  for (auto& b : net.conv_blocks()) {
    int c = b.bn.channels();
    w.i32(c);
    w.doubles(b.bn.running_mean.data(), c);
    w.doubles(b.bn.running_var.data(), c);
  }

  w.u64(fnv1a(w.buf.data() + 8, w.buf.size() - 8));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(w.buf.data()), std::streamsize(w.buf.size()));
  if (!f) throw FormatError("short write to " + path);
}

Network load_checkpoint(const std::string& path, std::string* config_echo) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  f.seekg(0, std::ios::end);
  std::streamoff len = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> buf(size_t(len), 0);
  if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
  if (!f) throw FormatError("short read from " + path);

  if (buf.size() < 20 || std::memcmp(buf.data(), kMagic, 8) != 0)
    throw FormatError(path + ": not a checkpoint file");
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= std::uint64_t(buf[buf.size() - 8 + size_t(i)]) << (8 * i);
  if (fnv1a(buf.data() + 8, buf.size() - 16) != stored)
    throw FormatError(path + ": checksum mismatch");

  Reader r{buf, path, 8};
  std::uint32_t version = r.u32();
  if (version != kVersion) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: format version %u, this build reads %u", path.c_str(),
                  version, kVersion);
    throw FormatError(msg);
  }

  NetworkSpec spec = read_spec(r);
  spec.validate();
  std::string echo = r.str();
  if (config_echo) *config_echo = echo;

  Network net(spec, 0);
  auto params = net.params();
  std::uint32_t np = r.u32();
  if (np != params.size()) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: %u stored tensors but the spec builds %zu", path.c_str(),
                  np, params.size());
    throw FormatError(msg);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    int ndim = r.u8();
    Shape sh(size_t(ndim), 0);
    for (int d = 0; d < ndim; ++d) sh[size_t(d)] = r.i32();
    if (!same_shape(sh, params[i].shape())) {
      char msg[256];
      std::snprintf(msg, sizeof(msg), "%s: tensor %zu has shape %s, expected %s", path.c_str(), i,
                    shape_str(sh).c_str(), shape_str(params[i].shape()).c_str());
      throw FormatError(msg);
    }
    r.doubles(params[i].data(), params[i].numel());
  }

  std::uint32_t nb = r.u32();
  if (nb != net.conv_blocks().size()) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: %u batchnorm records but the spec builds %zu",
                  path.c_str(), nb, net.conv_blocks().size());
    throw FormatError(msg);
  }
  for (auto& b : net.conv_blocks()) {
    int c = r.i32();
    if (c != b.bn.channels()) {
      char msg[256];
      std::snprintf(msg, sizeof(msg), "%s: batchnorm record has %d channels, expected %d",
                    path.c_str(), c, b.bn.channels());
      throw FormatError(msg);
    }
    r.doubles(b.bn.running_mean.data(), c);
    r.doubles(b.bn.running_var.data(), c);
  }

  if (r.pos != buf.size() - 8)
    throw FormatError(path + ": trailing bytes after payload");
  return net;
}

}  // namespace pathcnn

#include "pathcnn/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

namespace pathcnn {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  f.seekg(0, std::ios::end);
  std::streamoff len = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> buf(size_t(len), 0);
  if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
  if (!f) throw FormatError("short read from " + path);
  return buf;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& buf) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  if (!f) throw FormatError("short write to " + path);
}

std::uint32_t be32_at(const std::vector<std::uint8_t>& buf, size_t off, const std::string& path) {
  if (off + 4 > buf.size()) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: truncated at byte %zu, need 4 more", path.c_str(), off);
    throw FormatError(msg);
  }
  return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
         (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

void push_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(std::uint8_t(v >> 24));
  buf.push_back(std::uint8_t(v >> 16));
  buf.push_back(std::uint8_t(v >> 8));
  buf.push_back(std::uint8_t(v));
}

// IDX image file (magic 0x00000803): count x rows x cols unsigned bytes.
void load_idx_images(const std::string& path, std::vector<std::uint8_t>& out,
                     std::int64_t* count, int* rows, int* cols) {
  auto buf = read_file(path);
  std::uint32_t magic = be32_at(buf, 0, path);
  if (magic != 0x00000803u) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: bad magic at byte 0, expected 0x00000803 got 0x%08x",
                  path.c_str(), magic);
    throw FormatError(msg);
  }
  std::uint32_t n = be32_at(buf, 4, path);
  std::uint32_t r = be32_at(buf, 8, path);
  std::uint32_t c = be32_at(buf, 12, path);
  size_t need = 16 + size_t(n) * r * c;
  if (buf.size() != need) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: expected %zu bytes for %u images of %ux%u, got %zu",
                  path.c_str(), need, n, r, c, buf.size());
    throw FormatError(msg);
  }
  out.assign(buf.begin() + 16, buf.end());
  *count = n;
  *rows = int(r);
  *cols = int(c);
}

// IDX label file (magic 0x00000801): count unsigned bytes.
std::vector<int> load_idx_labels(const std::string& path, int classes) {
  auto buf = read_file(path);
  std::uint32_t magic = be32_at(buf, 0, path);
  if (magic != 0x00000801u) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: bad magic at byte 0, expected 0x00000801 got 0x%08x",
                  path.c_str(), magic);
    throw FormatError(msg);
  }
  std::uint32_t n = be32_at(buf, 4, path);
  if (buf.size() != 8 + size_t(n)) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: expected %zu bytes for %u labels, got %zu",
                  path.c_str(), 8 + size_t(n), n, buf.size());
    throw FormatError(msg);
  }
  std::vector<int> labels(size_t(n), 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    int v = buf[8 + i];
    if (v >= classes) {
      char msg[256];
      std::snprintf(msg, sizeof(msg), "%s: label %d at byte %u outside [0,%d)", path.c_str(), v,
                    8 + i, classes);
      throw FormatError(msg);
    }
    labels[i] = v;
  }
  return labels;
}

void compute_stats(Dataset& d) {
  d.mean.assign(size_t(d.channels), 0.0);
  d.stddev.assign(size_t(d.channels), 0.0);
  std::int64_t plane = std::int64_t(d.height) * d.width;
  std::vector<double> sum(size_t(d.channels), 0.0), sumsq(size_t(d.channels), 0.0);
  for (std::int64_t i = 0; i < d.train.count; ++i) {
    const std::uint8_t* px = d.train.pixels.data() + i * d.sample_numel();
    for (int c = 0; c < d.channels; ++c) {
      for (std::int64_t j = 0; j < plane; ++j) {
        double v = double(px[c * plane + j]) / 255.0;
        sum[c] += v;
        sumsq[c] += v * v;
      }
    }
  }
  double n = double(d.train.count) * double(plane);
  for (int c = 0; c < d.channels; ++c) {
    double m = sum[c] / n;
    double var = sumsq[c] / n - m * m;
    if (var < 0) var = 0;
    d.mean[c] = m;
    d.stddev[c] = std::max(std::sqrt(var), 1e-8);
  }
}

double u01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

// 3x5 digit glyphs, row-major bits.
const char* kGlyphs[10] = {
    "111101101101111",  // 0
    "010110010010111",  // 1
    "111001111100111",  // 2
    "111001111001111",  // 3
    "101101111001001",  // 4
    "111100111001111",  // 5
    "111100111101111",  // 6
    "111001001010010",  // 7
    "111101111101111",  // 8
    "111101111001111",  // 9
};

void render_digit(std::uint8_t* img, int label, std::mt19937_64& rng) {
  for (int i = 0; i < 28 * 28; ++i) img[i] = std::uint8_t(u01(rng) * 90.0);
  int ox = 2 + int(rng() % 13);  // glyph is 12 wide, keep a 2px margin
  int oy = 2 + int(rng() % 5);   // glyph is 20 tall
  // Stroke-bright clutter blocks, kept off the glyph box so the label stays unambiguous.
  int blocks = 3 + int(rng() % 4);
  for (int b = 0; b < blocks; ++b) {
    int bx = int(rng() % 25), by = int(rng() % 25);
    if (bx + 4 > ox && bx < ox + 12 && by + 4 > oy && by < oy + 20) continue;
    double bv = 90.0 + u01(rng) * 160.0;
    for (int sy = 0; sy < 4; ++sy)
      for (int sx = 0; sx < 4; ++sx) {
        double v = bv + u01(rng) * 110.0 - 55.0;
        img[(by + sy) * 28 + bx + sx] = std::uint8_t(std::min(255.0, std::max(0.0, v)));
      }
  }
  // Brightness has a faint tail, which leaves some samples close to the decision boundary.
  double base = 75.0 + u01(rng) * 175.0;
  const char* g = kGlyphs[label];
  for (int gy = 0; gy < 5; ++gy)
    for (int gx = 0; gx < 3; ++gx) {
      if (g[gy * 3 + gx] != '1') continue;
      for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
          int y = oy + gy * 4 + sy, x = ox + gx * 4 + sx;
          double v = base + u01(rng) * 110.0 - 55.0;
          img[y * 28 + x] = std::uint8_t(std::min(255.0, std::max(0.0, v)));
        }
    }
}

void synth_mnist_split(const std::string& img_path, const std::string& lab_path, int count,
                       std::mt19937_64& rng) {
  std::vector<std::uint8_t> img;
  img.reserve(16 + size_t(count) * 784);
  push_be32(img, 0x00000803u);
  push_be32(img, std::uint32_t(count));
  push_be32(img, 28);
  push_be32(img, 28);
  std::vector<std::uint8_t> lab;
  lab.reserve(8 + size_t(count));
  push_be32(lab, 0x00000801u);
  push_be32(lab, std::uint32_t(count));
  std::uint8_t px[784];
  for (int i = 0; i < count; ++i) {
    int label = int(rng() % 10);
    render_digit(px, label, rng);
    img.insert(img.end(), px, px + 784);
    lab.push_back(std::uint8_t(label));
  }
  write_file(img_path, img);
  write_file(lab_path, lab);
}

// Per-class base colors and stripe orientation for synthetic cifar.
void render_cifar(std::uint8_t* img, int label, std::mt19937_64& rng) {
  static const int palette[10][3] = {{220, 60, 60},   {60, 200, 60},  {70, 90, 220},
                                     {220, 200, 50},  {200, 60, 200}, {50, 200, 200},
                                     {240, 140, 40},  {140, 70, 20},  {130, 130, 130},
                                     {240, 240, 240}};
  int period = 4 + (label % 3) * 2;
  bool vertical = (label % 2) != 0;
  double phase = u01(rng) * period;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      int t = vertical ? x : y;
      double s = std::fmod(double(t) + phase, double(period)) < period / 2.0 ? 1.0 : 0.55;
      for (int c = 0; c < 3; ++c) {
        double v = palette[label][c] * s + u01(rng) * 36.0 - 18.0;
        img[c * 1024 + y * 32 + x] = std::uint8_t(std::min(255.0, std::max(0.0, v)));
      }
    }
}

void synth_cifar_file(const std::string& path, int count, std::mt19937_64& rng) {
  std::vector<std::uint8_t> buf;
  buf.reserve(size_t(count) * 3073);
  std::uint8_t px[3072];
  for (int i = 0; i < count; ++i) {
    int label = int(rng() % 10);
    render_cifar(px, label, rng);
    buf.push_back(std::uint8_t(label));
    buf.insert(buf.end(), px, px + 3072);
  }
  write_file(path, buf);
}

void load_cifar_file(const std::string& path, DataSplit& split) {
  auto buf = read_file(path);
  if (buf.size() % 3073 != 0) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: size %zu is not a multiple of the 3073-byte record",
                  path.c_str(), buf.size());
    throw FormatError(msg);
  }
  size_t n = buf.size() / 3073;
  for (size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = buf.data() + i * 3073;
    if (rec[0] >= 10) {
      char msg[256];
      std::snprintf(msg, sizeof(msg), "%s: label %d at byte %zu outside [0,10)", path.c_str(),
                    int(rec[0]), i * 3073);
      throw FormatError(msg);
    }
    split.labels.push_back(rec[0]);
    split.pixels.insert(split.pixels.end(), rec + 1, rec + 3073);
  }
  split.count += std::int64_t(n);
}

}  // namespace

Tensor Dataset::make_batch(const DataSplit& split, const int* idx, int n) const {
  std::int64_t numel = sample_numel();
  Tensor t = Tensor::zeros({n, channels, height, width});
  double* out = t.data();
  std::int64_t plane = std::int64_t(height) * width;
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* px = split.pixels.data() + std::int64_t(idx[i]) * numel;
    for (int c = 0; c < channels; ++c) {
      double m = mean[c], is = 1.0 / stddev[c];
      for (std::int64_t j = 0; j < plane; ++j)
        out[i * numel + c * plane + j] = (double(px[c * plane + j]) / 255.0 - m) * is;
    }
  }
  return t;
}

std::vector<int> Dataset::make_labels(const DataSplit& split, const int* idx, int n) const {
  std::vector<int> out(size_t(n), 0);
  for (int i = 0; i < n; ++i) out[i] = split.labels[size_t(idx[i])];
  return out;
}

std::vector<double> Dataset::sample(const DataSplit& split, int idx) const {
  std::int64_t numel = sample_numel();
  std::vector<double> out(size_t(numel), 0.0);
  const std::uint8_t* px = split.pixels.data() + std::int64_t(idx) * numel;
  std::int64_t plane = std::int64_t(height) * width;
  for (int c = 0; c < channels; ++c) {
    double m = mean[c], is = 1.0 / stddev[c];
    for (std::int64_t j = 0; j < plane; ++j)
      out[c * plane + j] = (double(px[c * plane + j]) / 255.0 - m) * is;
  }
  return out;
}

void Dataset::normalized_range(int c, double* lo, double* hi) const {
  *lo = (0.0 - mean[c]) / stddev[c];
  *hi = (1.0 - mean[c]) / stddev[c];
}

Dataset load_mnist(const std::string& dir) {
  Dataset d;
  d.name = "mnist";
  d.channels = 1;
  d.classes = 10;
  int r = 0, c = 0;
  load_idx_images(dir + "/train-images-idx3-ubyte", d.train.pixels, &d.train.count, &r, &c);
  d.height = r;
  d.width = c;
  d.train.labels = load_idx_labels(dir + "/train-labels-idx1-ubyte", d.classes);
  if (std::int64_t(d.train.labels.size()) != d.train.count) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: %zu train labels but %lld train images", dir.c_str(),
                  d.train.labels.size(), (long long)d.train.count);
    throw FormatError(msg);
  }
  int r2 = 0, c2 = 0;
  load_idx_images(dir + "/t10k-images-idx3-ubyte", d.test.pixels, &d.test.count, &r2, &c2);
  if (r2 != r || c2 != c) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: test images are %dx%d but train images are %dx%d",
                  dir.c_str(), r2, c2, r, c);
    throw FormatError(msg);
  }
  d.test.labels = load_idx_labels(dir + "/t10k-labels-idx1-ubyte", d.classes);
  if (std::int64_t(d.test.labels.size()) != d.test.count) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: %zu test labels but %lld test images", dir.c_str(),
                  d.test.labels.size(), (long long)d.test.count);
    throw FormatError(msg);
  }
  compute_stats(d);
  return d;
}

Dataset load_cifar10(const std::string& dir) {
  Dataset d;
  d.name = "cifar10";
  d.channels = 3;
  d.height = 32;
  d.width = 32;
  d.classes = 10;
  for (int i = 1; i <= 5; ++i)
    load_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin", d.train);
  load_cifar_file(dir + "/test_batch.bin", d.test);
  compute_stats(d);
  return d;
}

void synth_mnist(const std::string& dir, int train_count, int test_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  synth_mnist_split(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte",
                    train_count, rng);
  synth_mnist_split(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", test_count,
                    rng);
}

void synth_cifar10(const std::string& dir, int train_count, int test_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int per = (train_count + 4) / 5;
  for (int i = 1; i <= 5; ++i) {
    int n = std::min(per, train_count - per * (i - 1));
    if (n < 0) n = 0;
    synth_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin", n, rng);
  }
  synth_cifar_file(dir + "/test_batch.bin", test_count, rng);
}

void save_idx_double(const std::string& path, const Shape& shape, const std::vector<double>& v) {
  if (shape_numel(shape) != std::int64_t(v.size()))
    throw ShapeError("save_idx_double: shape/value mismatch");
  if (shape.size() > 255) throw ShapeError("save_idx_double: too many dims");
  std::vector<std::uint8_t> buf;
  buf.reserve(4 + 4 * shape.size() + 8 * v.size());
  push_be32(buf, 0x00000E00u | std::uint32_t(shape.size()));
  for (int dim : shape) push_be32(buf, std::uint32_t(dim));
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    for (int b = 7; b >= 0; --b) buf.push_back(std::uint8_t(bits >> (8 * b)));
  }
  write_file(path, buf);
}

std::pair<Shape, std::vector<double>> load_idx_double(const std::string& path) {
  auto buf = read_file(path);
  std::uint32_t magic = be32_at(buf, 0, path);
  if ((magic & 0xFFFFFF00u) != 0x00000E00u) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: bad magic at byte 0, expected 0x00000Exx got 0x%08x",
                  path.c_str(), magic);
    throw FormatError(msg);
  }
  int ndim = int(magic & 0xFFu);
  Shape shape(size_t(ndim), 0);
  for (int i = 0; i < ndim; ++i) shape[i] = int(be32_at(buf, 4 + 4 * size_t(i), path));
  std::int64_t n = shape_numel(shape);
  size_t off = 4 + 4 * size_t(ndim);
  if (buf.size() != off + size_t(n) * 8) {
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: expected %zu bytes for %lld doubles, got %zu",
                  path.c_str(), off + size_t(n) * 8, (long long)n, buf.size());
    throw FormatError(msg);
  }
  std::vector<double> v(size_t(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits = (bits << 8) | buf[off + size_t(i) * 8 + size_t(b)];
    std::memcpy(&v[size_t(i)], &bits, 8);
  }
  return {shape, v};
}

void save_int_lines(const std::string& path, const std::vector<int>& v) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  for (int x : v) f << x << "\n";
  if (!f) throw FormatError("short write to " + path);
}

std::vector<int> load_int_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  std::vector<int> v;
  int x;
  while (f >> x) v.push_back(x);
  return v;
}

}  // namespace pathcnn

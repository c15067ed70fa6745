#include "drsl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "drsl/rng.hpp"

namespace drsl {

std::string to_string(DatasetName name) {
  return name == DatasetName::MNIST ? "MNIST" : "CIFAR10";
}

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

DatasetName dataset_name_from_string(const std::string& s) {
  if (s == "MNIST" || s == "mnist") return DatasetName::MNIST;
  if (s == "CIFAR10" || s == "cifar10" || s == "CIFAR-10" || s == "cifar-10") {
    return DatasetName::CIFAR10;
  }
  throw ValueError("unknown dataset '" + s + "' (expected MNIST or CIFAR10)");
}

void Dataset::validate() const {
  if (!images.defined() || images.ndim() != 4) throw ContractError("dataset: images must be (N,C,H,W)");
  if (images.dim(0) != labels.size()) throw ContractError("dataset: image/label count mismatch");
  for (double v : images.values()) {
    if (v < 0.0 || v > 1.0) throw NumericError("dataset: pixel outside [0,1]");
  }
  for (std::size_t y : labels) {
    if (y >= num_classes()) throw ValueError("dataset: label out of range");
  }
}

Dataset Dataset::subset(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  const std::size_t stride = images.numel() / size();
  auto src = images.values();
  std::vector<double> data(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n * stride));
  Shape shape = images.shape();
  shape[0] = n;
  Dataset out;
  out.images = Tensor(std::move(shape), std::move(data));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.name = name;
  out.split = split;
  return out;
}

// ---- file helpers ------------------------------------------------------------

namespace {

// Reads the whole file; zlib's gz layer is transparent for uncompressed input,
// which covers the "gzip-compressed or raw" contract with one code path.
std::vector<unsigned char> read_file_maybe_gz(const std::string& path) {
  if (!std::filesystem::exists(path)) throw FormatError("file not found: " + path);
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw FormatError("cannot open: " + path);
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) {
    out.insert(out.end(), buf, buf + n);
  }
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError("decompression failed: " + path);
  return out;
}

std::uint32_t be_u32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_be_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kIdxImageMagic = 2051;
constexpr std::uint32_t kIdxLabelMagic = 2049;
constexpr std::size_t kCifarRecord = 3073;  // 1 label byte + 3*1024 pixels

double byte_to_pixel(unsigned char b) { return static_cast<double>(b) / 255.0; }

unsigned char pixel_to_byte(double p) {
  const long v = std::lround(p * 255.0);
  return static_cast<unsigned char>(std::clamp(v, 0L, 255L));
}

}  // namespace

// ---- MNIST IDX ----------------------------------------------------------------

Dataset load_mnist(const std::string& image_path, const std::string& label_path, Split split) {
  const auto ibytes = read_file_maybe_gz(image_path);
  const auto lbytes = read_file_maybe_gz(label_path);

  if (ibytes.size() < 16) throw FormatError("mnist: image file truncated: " + image_path);
  if (lbytes.size() < 8) throw FormatError("mnist: label file truncated: " + label_path);
  const std::uint32_t imagic = be_u32(ibytes.data());
  if (imagic != kIdxImageMagic) {
    throw FormatError("mnist: bad image magic " + std::to_string(imagic) + " (expected 2051)");
  }
  const std::uint32_t lmagic = be_u32(lbytes.data());
  if (lmagic != kIdxLabelMagic) {
    throw FormatError("mnist: bad label magic " + std::to_string(lmagic) + " (expected 2049)");
  }
  const std::size_t n_images = be_u32(ibytes.data() + 4);
  const std::size_t rows = be_u32(ibytes.data() + 8);
  const std::size_t cols = be_u32(ibytes.data() + 12);
  const std::size_t n_labels = be_u32(lbytes.data() + 4);
  if (n_images != n_labels) {
    throw FormatError("mnist: image count " + std::to_string(n_images) +
                      " does not match label count " + std::to_string(n_labels));
  }
  if (ibytes.size() != 16 + n_images * rows * cols) {
    throw FormatError("mnist: image payload length mismatch in " + image_path);
  }
  if (lbytes.size() != 8 + n_labels) {
    throw FormatError("mnist: label payload length mismatch in " + label_path);
  }

  Dataset ds;
  ds.name = DatasetName::MNIST;
  ds.split = split;
  std::vector<double> pixels(n_images * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = byte_to_pixel(ibytes[16 + i]);
  ds.images = Tensor(Shape{n_images, 1, rows, cols}, std::move(pixels));
  ds.labels.resize(n_labels);
  for (std::size_t i = 0; i < n_labels; ++i) {
    const unsigned char y = lbytes[8 + i];
    if (y > 9) throw ValueError("mnist: label byte " + std::to_string(y) + " out of range");
    ds.labels[i] = y;
  }
  return ds;
}

void write_mnist_idx(const Dataset& ds, const std::string& image_path,
                     const std::string& label_path) {
  if (ds.images.ndim() != 4 || ds.images.dim(1) != 1) {
    throw ContractError("write_mnist_idx: expected (N,1,H,W) images");
  }
  const std::size_t n = ds.size(), rows = ds.images.dim(2), cols = ds.images.dim(3);
  {
    std::ofstream os(image_path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + image_path);
    put_be_u32(os, kIdxImageMagic);
    put_be_u32(os, static_cast<std::uint32_t>(n));
    put_be_u32(os, static_cast<std::uint32_t>(rows));
    put_be_u32(os, static_cast<std::uint32_t>(cols));
    const auto v = ds.images.values();
    std::vector<unsigned char> buf(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) buf[i] = pixel_to_byte(v[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  {
    std::ofstream os(label_path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + label_path);
    put_be_u32(os, kIdxLabelMagic);
    put_be_u32(os, static_cast<std::uint32_t>(n));
    for (std::size_t y : ds.labels) os.put(static_cast<char>(y));
  }
}

// ---- CIFAR-10 binary ------------------------------------------------------------

Dataset load_cifar10(const std::vector<std::string>& batch_paths, Split split) {
  if (batch_paths.empty()) throw ContractError("load_cifar10: no batch paths given");
  std::vector<double> pixels;
  std::vector<std::size_t> labels;
  for (const std::string& path : batch_paths) {
    const auto bytes = read_file_maybe_gz(path);
    if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
      throw FormatError("cifar10: file size " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073: " + path);
    }
    const std::size_t records = bytes.size() / kCifarRecord;
    pixels.reserve(pixels.size() + records * 3072);
    for (std::size_t r = 0; r < records; ++r) {
      const unsigned char* rec = bytes.data() + r * kCifarRecord;
      if (rec[0] > 9) {
        throw ValueError("cifar10: label byte " + std::to_string(rec[0]) + " out of range in " + path);
      }
      labels.push_back(rec[0]);
      for (std::size_t i = 0; i < 3072; ++i) pixels.push_back(byte_to_pixel(rec[1 + i]));
    }
  }
  Dataset ds;
  ds.name = DatasetName::CIFAR10;
  ds.split = split;
  ds.images = Tensor(Shape{labels.size(), 3, 32, 32}, std::move(pixels));
  ds.labels = std::move(labels);
  return ds;
}

void write_cifar10_batches(const Dataset& ds, const std::vector<std::string>& paths,
                           std::size_t per_file) {
  if (ds.images.ndim() != 4 || ds.images.dim(1) != 3 || ds.images.dim(2) != 32 ||
      ds.images.dim(3) != 32) {
    throw ContractError("write_cifar10_batches: expected (N,3,32,32) images");
  }
  if (paths.empty() || per_file == 0) throw ContractError("write_cifar10_batches: bad arguments");
  if (paths.size() * per_file < ds.size()) {
    throw ContractError("write_cifar10_batches: not enough output files");
  }
  const auto v = ds.images.values();
  std::size_t next = 0;
  for (const std::string& path : paths) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    for (std::size_t r = 0; r < per_file && next < ds.size(); ++r, ++next) {
      os.put(static_cast<char>(ds.labels[next]));
      const double* px = v.data() + next * 3072;
      unsigned char buf[3072];
      for (std::size_t i = 0; i < 3072; ++i) buf[i] = pixel_to_byte(px[i]);
      os.write(reinterpret_cast<const char*>(buf), 3072);
    }
  }
}

Dataset load_dataset(DatasetName name, const std::string& dir, Split split) {
  namespace fs = std::filesystem;
  auto resolve = [&dir](const std::string& base) -> std::string {
    const std::string raw = (fs::path(dir) / base).string();
    if (fs::exists(raw)) return raw;
    if (fs::exists(raw + ".gz")) return raw + ".gz";
    throw FormatError("dataset file not found: " + raw + "[.gz]");
  };
  if (name == DatasetName::MNIST) {
    if (split == Split::Train) {
      return load_mnist(resolve("train-images-idx3-ubyte"), resolve("train-labels-idx1-ubyte"),
                        split);
    }
    return load_mnist(resolve("t10k-images-idx3-ubyte"), resolve("t10k-labels-idx1-ubyte"), split);
  }
  if (split == Split::Train) {
    std::vector<std::string> paths;
    for (int i = 1; i <= 5; ++i) paths.push_back(resolve("data_batch_" + std::to_string(i) + ".bin"));
    return load_cifar10(paths, split);
  }
  return load_cifar10({resolve("test_batch.bin")}, split);
}

// ---- label noise -----------------------------------------------------------------

void NoiseSpec::validate() const {
  if (rate < 0.0 || rate > 1.0) throw ValueError("noise rate must be in [0, 1]");
}

std::pair<Dataset, std::vector<std::size_t>> inject_label_noise(const Dataset& ds,
                                                                const NoiseSpec& spec) {
  spec.validate();
  if (ds.split != Split::Train) {
    throw ContractError("label noise may only be injected into the train split");
  }
  Dataset noisy = ds;  // images shared; datasets are immutable after load
  noisy.labels = ds.labels;
  std::vector<std::size_t> flipped;
  const std::size_t c = ds.num_classes();
  Rng rng(mix_seed(spec.seed, 0x6e6f697365ULL));
  for (std::size_t i = 0; i < noisy.labels.size(); ++i) {
    if (rng.next_double01() < spec.rate) {
      const std::size_t draw = rng.next_below(c - 1);
      const std::size_t old = noisy.labels[i];
      noisy.labels[i] = draw >= old ? draw + 1 : draw;  // uniform over the other classes
      flipped.push_back(i);
    }
  }
  return {std::move(noisy), std::move(flipped)};
}

// ---- batching ---------------------------------------------------------------------

BatchIter::BatchIter(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed,
                     std::uint64_t epoch)
    : ds_(&ds), batch_size_(batch_size) {
  if (batch_size == 0) throw ValueError("batch_size must be >= 1");
  order_.resize(ds.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(mix_seed(shuffle_seed, 0x7368756666ULL + epoch));
  rng.shuffle(order_);
}

std::size_t BatchIter::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchIter::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t take = std::min(batch_size_, order_.size() - pos_);
  out.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                     order_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
  out.images = gather_images(*ds_, out.indices);
  out.labels.resize(take);
  for (std::size_t i = 0; i < take; ++i) out.labels[i] = ds_->labels[out.indices[i]];
  pos_ += take;
  return true;
}

Tensor gather_images(const Dataset& ds, const std::vector<std::size_t>& indices) {
  const std::size_t stride = ds.images.numel() / ds.size();
  const auto src = ds.images.values();
  std::vector<double> data(indices.size() * stride);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.size()) throw ValueError("gather_images: index out of range");
    std::copy_n(src.data() + indices[i] * stride, stride, data.data() + i * stride);
  }
  Shape shape = ds.images.shape();
  shape[0] = indices.size();
  return Tensor(std::move(shape), std::move(data));
}

// ---- synthetic digits ----------------------------------------------------------------

namespace {

// 5x7 digit glyphs, row-major, one bit per pixel.
constexpr std::uint8_t kGlyphs[10][7] = {
    {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},  // 0
    {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},  // 1
    {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},  // 2
    {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110},  // 3
    {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},  // 4
    {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},  // 5
    {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},  // 6
    {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},  // 7
    {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},  // 8
    {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},  // 9
};

// One 28x28 grayscale digit. The glyph is upscaled by a random factor,
// placed anywhere it fits, drawn at a random intensity, then degraded with
// clutter blobs and pixel noise; enough variation that models must learn
// real margins instead of memorizing fixed pixel positions.
void render_mnist_record(Rng& rng, std::size_t label, unsigned char* out /*784 bytes*/) {
  const int scale = 3;
  const int gw = 5 * scale, gh = 7 * scale;
  const int ox = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(28 - gw + 1)));
  const int oy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(28 - gh + 1)));
  const double stroke = rng.next_uniform(0.55, 1.0);
  double img[28 * 28] = {0.0};
  for (int gy = 0; gy < 7; ++gy) {
    for (int gx = 0; gx < 5; ++gx) {
      if ((kGlyphs[label][gy] >> (4 - gx)) & 1) {
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int y = oy + gy * scale + sy;
            const int x = ox + gx * scale + sx;
            img[y * 28 + x] = stroke;
          }
        }
      }
    }
  }
  // occasional faint clutter blob off the glyph
  if (rng.next_below(2) == 0) {
    const int bx = static_cast<int>(rng.next_below(26));
    const int by = static_cast<int>(rng.next_below(26));
    const double glow = rng.next_uniform(0.2, 0.5);
    for (int dy = 0; dy < 3; ++dy) {
      for (int dx = 0; dx < 3; ++dx) {
        double& px = img[(by + dy) * 28 + (bx + dx)];
        px = std::max(px, glow);
      }
    }
  }
  // sometimes occlude a horizontal band of the glyph; the resulting
  // ambiguity keeps the classes from being trivially separable
  if (rng.next_below(4) == 0) {
    const int band_y = oy + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(gh - 4)));
    for (int y = band_y; y < band_y + 5 && y < 28; ++y) {
      for (int x = 0; x < 28; ++x) img[y * 28 + x] = 0.0;
    }
  }
  for (int i = 0; i < 28 * 28; ++i) {
    const double v = std::clamp(img[i] + rng.next_normal() * 0.1, 0.0, 1.0);
    out[i] = pixel_to_byte(v);
  }
}

// One CIFAR-shaped record: class-tinted background with the digit glyph
// stamped in a contrasting color, plus noise. Channel planes, R then G then B.
void render_cifar_record(Rng& rng, std::size_t label, unsigned char* out /*3072 bytes*/) {
  const double hue = static_cast<double>(label) / 10.0;
  const double base[3] = {0.25 + 0.5 * hue, 0.65 - 0.5 * hue, 0.35 + 0.3 * (1.0 - hue)};
  const int ox = 8 + static_cast<int>(rng.next_below(5)) - 2;
  const int oy = 5 + static_cast<int>(rng.next_below(5)) - 2;
  const double stroke = rng.next_uniform(0.7, 1.0);
  double glyph[32 * 32] = {0.0};
  for (int gy = 0; gy < 7; ++gy) {
    for (int gx = 0; gx < 5; ++gx) {
      if ((kGlyphs[label][gy] >> (4 - gx)) & 1) {
        for (int sy = 0; sy < 3; ++sy) {
          for (int sx = 0; sx < 3; ++sx) {
            const int y = oy + gy * 3 + sy;
            const int x = ox + gx * 3 + sx;
            if (y >= 0 && y < 32 && x >= 0 && x < 32) glyph[y * 32 + x] = stroke;
          }
        }
      }
    }
  }
  for (int ch = 0; ch < 3; ++ch) {
    for (int i = 0; i < 32 * 32; ++i) {
      const double fg = ch == 1 ? 0.9 : 0.1;  // greenish stroke on tinted background
      const double v = base[ch] * (1.0 - glyph[i]) + fg * glyph[i] + rng.next_normal() * 0.06;
      out[ch * 1024 + i] = pixel_to_byte(std::clamp(v, 0.0, 1.0));
    }
  }
}

std::uint64_t synth_stream(std::uint64_t seed, Split split) {
  return mix_seed(seed, split == Split::Train ? 0x747261696eULL : 0x74657374ULL);
}

}  // namespace

Dataset make_synthetic_mnist(std::size_t count, std::uint64_t seed, Split split) {
  Rng rng(synth_stream(seed, split));
  std::vector<double> pixels(count * 784);
  std::vector<std::size_t> labels(count);
  unsigned char buf[784];
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = static_cast<std::size_t>(rng.next_below(10));
    render_mnist_record(rng, labels[i], buf);
    for (std::size_t p = 0; p < 784; ++p) pixels[i * 784 + p] = byte_to_pixel(buf[p]);
  }
  Dataset ds;
  ds.name = DatasetName::MNIST;
  ds.split = split;
  ds.images = Tensor(Shape{count, 1, 28, 28}, std::move(pixels));
  ds.labels = std::move(labels);
  return ds;
}

Dataset make_synthetic_cifar10(std::size_t count, std::uint64_t seed, Split split) {
  Rng rng(synth_stream(seed, split));
  std::vector<double> pixels(count * 3072);
  std::vector<std::size_t> labels(count);
  std::vector<unsigned char> buf(3072);
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = static_cast<std::size_t>(rng.next_below(10));
    render_cifar_record(rng, labels[i], buf.data());
    for (std::size_t p = 0; p < 3072; ++p) pixels[i * 3072 + p] = byte_to_pixel(buf[p]);
  }
  Dataset ds;
  ds.name = DatasetName::CIFAR10;
  ds.split = split;
  ds.images = Tensor(Shape{count, 3, 32, 32}, std::move(pixels));
  ds.labels = std::move(labels);
  return ds;
}

void generate_synthetic_mnist_files(const std::string& dir, std::size_t n_train,
                                    std::size_t n_test, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  struct Part {
    std::size_t count;
    Split split;
    const char* images;
    const char* labels;
  };
  const Part parts[2] = {{n_train, Split::Train, "train-images-idx3-ubyte", "train-labels-idx1-ubyte"},
                         {n_test, Split::Test, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}};
  for (const Part& part : parts) {
    Rng rng(synth_stream(seed, part.split));
    std::ofstream ios((fs::path(dir) / part.images).string(), std::ios::binary);
    std::ofstream los((fs::path(dir) / part.labels).string(), std::ios::binary);
    if (!ios || !los) throw FormatError("cannot create synthetic files under " + dir);
    put_be_u32(ios, kIdxImageMagic);
    put_be_u32(ios, static_cast<std::uint32_t>(part.count));
    put_be_u32(ios, 28);
    put_be_u32(ios, 28);
    put_be_u32(los, kIdxLabelMagic);
    put_be_u32(los, static_cast<std::uint32_t>(part.count));
    unsigned char buf[784];
    for (std::size_t i = 0; i < part.count; ++i) {
      const std::size_t label = static_cast<std::size_t>(rng.next_below(10));
      render_mnist_record(rng, label, buf);
      ios.write(reinterpret_cast<const char*>(buf), 784);
      los.put(static_cast<char>(label));
    }
  }
}

void generate_synthetic_cifar10_files(const std::string& dir, std::size_t n_train,
                                      std::size_t n_test, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::size_t per_file = 10000;
  Rng train_rng(synth_stream(seed, Split::Train));
  std::size_t written = 0;
  for (int b = 1; b <= 5 && written < n_train; ++b) {
    std::ofstream os((fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin")).string(),
                     std::ios::binary);
    if (!os) throw FormatError("cannot create synthetic files under " + dir);
    std::vector<unsigned char> rec(kCifarRecord);
    for (std::size_t i = 0; i < per_file && written < n_train; ++i, ++written) {
      const std::size_t label = static_cast<std::size_t>(train_rng.next_below(10));
      rec[0] = static_cast<unsigned char>(label);
      render_cifar_record(train_rng, label, rec.data() + 1);
      os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
  }
  Rng test_rng(synth_stream(seed, Split::Test));
  std::ofstream os((fs::path(dir) / "test_batch.bin").string(), std::ios::binary);
  if (!os) throw FormatError("cannot create synthetic files under " + dir);
  std::vector<unsigned char> rec(kCifarRecord);
  for (std::size_t i = 0; i < n_test; ++i) {
    const std::size_t label = static_cast<std::size_t>(test_rng.next_below(10));
    rec[0] = static_cast<unsigned char>(label);
    render_cifar_record(test_rng, label, rec.data() + 1);
    os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
}

void gzip_file(const std::string& src_path, const std::string& dst_path) {
  std::ifstream is(src_path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + src_path);
  gzFile out = gzopen(dst_path.c_str(), "wb");
  if (out == nullptr) throw FormatError("cannot open for writing: " + dst_path);
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    const std::streamsize n = is.gcount();
    if (n > 0 && gzwrite(out, buf, static_cast<unsigned>(n)) != n) {
      gzclose(out);
      throw FormatError("gzip write failed: " + dst_path);
    }
  }
  gzclose(out);
}

}  // namespace drsl

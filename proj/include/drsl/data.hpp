#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drsl/tensor.hpp"

namespace drsl {

enum class DatasetName { MNIST, CIFAR10 };
enum class Split { Train, Test };

std::string to_string(DatasetName name);
std::string to_string(Split split);
DatasetName dataset_name_from_string(const std::string& s);

// Images in [0,1], labels in [0, 10). Immutable after load; shareable.
struct Dataset {
  Tensor images;  // (N, C, H, W)
  std::vector<std::size_t> labels;
  DatasetName name = DatasetName::MNIST;
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return 10; }
  void validate() const;
  // First n examples (n == 0 or n >= size: the whole set).
  Dataset subset(std::size_t n) const;
};

// ---- loaders ----------------------------------------------------------------
// MNIST IDX files (big-endian headers, magics 2051/2049), raw or gzipped;
// pixel bytes scaled from [0,255] to [0,1]. Image/label counts are
// cross-checked between the two files.
Dataset load_mnist(const std::string& image_path, const std::string& label_path,
                   Split split = Split::Train);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes,
// reordered to (3, 32, 32) planes.
Dataset load_cifar10(const std::vector<std::string>& batch_paths, Split split = Split::Train);

// Resolve standard filenames under `dir` (".gz" fallback for MNIST).
Dataset load_dataset(DatasetName name, const std::string& dir, Split split);

// ---- writers (round-trip re-serialization) ----------------------------------
void write_mnist_idx(const Dataset& ds, const std::string& image_path,
                     const std::string& label_path);
// Writes consecutive slices of up to `per_file` records into `paths`.
void write_cifar10_batches(const Dataset& ds, const std::vector<std::string>& paths,
                           std::size_t per_file = 10000);

// ---- label noise -------------------------------------------------------------
struct NoiseSpec {
  double rate = 0.0;  // in [0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

// Symmetric label noise: each train label is independently replaced, with
// probability rate, by a uniform draw from the other C-1 classes. Returns the
// noisy dataset (images shared) and the indices whose labels changed.
std::pair<Dataset, std::vector<std::size_t>> inject_label_noise(const Dataset& ds,
                                                                const NoiseSpec& spec);

// ---- batching -----------------------------------------------------------------
// One seeded permutation per (shuffle_seed, epoch); every example appears
// exactly once; the last batch may be short.
class BatchIter {
 public:
  struct Batch {
    Tensor images;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> indices;  // dataset positions in batch order
  };

  BatchIter(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed,
            std::uint64_t epoch);

  std::size_t num_batches() const;
  bool next(Batch& out);

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// Gather dataset rows by index into a batch tensor.
Tensor gather_images(const Dataset& ds, const std::vector<std::size_t>& indices);

// ---- synthetic data ------------------------------------------------------------
// Procedural digit datasets in the exact official file formats, for running
// the pipeline without downloaded data. Class-dependent glyphs with random
// shifts, intensity scaling and pixel noise; an MLP learns them to >95% in a
// few epochs.
Dataset make_synthetic_mnist(std::size_t count, std::uint64_t seed, Split split);
Dataset make_synthetic_cifar10(std::size_t count, std::uint64_t seed, Split split);

// Write official-layout files under dir (MNIST: 4 raw IDX files; CIFAR-10:
// data_batch_1..5.bin + test_batch.bin). Generation is streamed so official
// sizes (60000/10000 and 50000/10000) stay cheap on memory.
void generate_synthetic_mnist_files(const std::string& dir, std::size_t n_train,
                                    std::size_t n_test, std::uint64_t seed);
void generate_synthetic_cifar10_files(const std::string& dir, std::size_t n_train,
                                      std::size_t n_test, std::uint64_t seed);

// gzip a file in place (adds .gz); used to exercise the compressed load path.
void gzip_file(const std::string& src_path, const std::string& dst_path);

}  // namespace drsl

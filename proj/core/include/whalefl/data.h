#pragma once

// Datasets (MNIST IDX files, Gaussian blobs), label-skewed partitions across
// clients, and fixed-count batching.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "whalefl/nn.h"

namespace whalefl::data {

struct Dataset {
  nn::Matrix inputs;  // (N x d)
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

enum class MnistSplit { kTrain, kTest };

// Raw IDX payloads. Images are N x rows x cols unsigned bytes.
struct IdxImages {
  std::uint32_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels);

// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`. Pixels are
// scaled by 1/255. `limit` > 0 keeps only the first `limit` examples.
Dataset load_mnist(const std::string& dir, MnistSplit split = MnistSplit::kTrain,
                   std::size_t limit = 0);

// K Gaussian clusters, `per_class` points each, around means one unit apart
// (mean_c = e_c / sqrt(2)); needs d >= K.
Dataset synth_blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed);

struct Partition {
  std::vector<std::vector<std::size_t>> clients;
  int sigma = 0;
};

// Balanced label-skew partition: every class is cut into M*sigma/K shards
// whose sizes differ by at most one and every client receives shards of
// exactly sigma distinct classes. Throws std::invalid_argument naming the
// violated constraint when (M, sigma, K) is infeasible.
Partition partition_noniid(const Dataset& dataset, int clients, int sigma, std::uint64_t seed);

// CSV `client,index`.
void write_partition_csv(const Partition& partition, std::ostream& out);
void write_partition_csv(const Partition& partition, const std::string& path);

// Fixed batch count ceil(|shard| / B) for every epoch; the last batch keeps
// the remainder. Without reshuffling, every epoch yields the same order.
class Batcher {
 public:
  Batcher(std::vector<std::size_t> shard, int batch_size, std::uint64_t seed,
          bool reshuffle_per_epoch);

  int batch_count() const { return batch_count_; }
  int batch_size() const { return batch_size_; }
  std::size_t shard_size() const { return shard_.size(); }

  std::vector<std::vector<std::size_t>> epoch(std::uint64_t epoch_index) const;

 private:
  std::vector<std::size_t> shard_;
  int batch_size_;
  int batch_count_;
  std::uint64_t seed_;
  bool reshuffle_;
};

}  // namespace whalefl::data

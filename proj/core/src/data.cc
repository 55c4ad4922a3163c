#include "whalefl/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "whalefl/error.h"
#include "whalefl/util.h"

namespace whalefl::data {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(path + ": truncated IDX header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  return in;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n,
                                       const std::string& path) {
  std::vector<std::uint8_t> bytes(n);
  if (n > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n))) {
    throw FormatError(path + ": truncated IDX payload (expected " + std::to_string(n) +
                      " bytes)");
  }
  return bytes;
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  std::ifstream in = open_binary(path);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != kImageMagic) {
    throw FormatError(path + ": bad IDX image magic (expected 0x00000803)");
  }
  IdxImages img;
  img.count = read_be32(in, path);
  img.rows = read_be32(in, path);
  img.cols = read_be32(in, path);
  img.pixels = read_payload(
      in, static_cast<std::size_t>(img.count) * img.rows * img.cols, path);
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream in = open_binary(path);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != kLabelMagic) {
    throw FormatError(path + ": bad IDX label magic (expected 0x00000801)");
  }
  const std::uint32_t count = read_be32(in, path);
  return read_payload(in, count, path);
}

void write_idx_images(const std::string& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_be32(out, kImageMagic);
  write_be32(out, images.count);
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset load_mnist(const std::string& dir, MnistSplit split, std::size_t limit) {
  const std::string prefix = split == MnistSplit::kTrain ? "train" : "t10k";
  const std::string img_path = dir + "/" + prefix + "-images-idx3-ubyte";
  const std::string lbl_path = dir + "/" + prefix + "-labels-idx1-ubyte";
  const IdxImages img = read_idx_images(img_path);
  const std::vector<std::uint8_t> lbl = read_idx_labels(lbl_path);
  if (lbl.size() != img.count) {
    throw FormatError(lbl_path + ": " + std::to_string(lbl.size()) + " labels but " +
                      img_path + " has " + std::to_string(img.count) + " images");
  }
  const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, img.count) : img.count;
  const std::size_t d = static_cast<std::size_t>(img.rows) * img.cols;
  Dataset ds;
  ds.class_count = 10;
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          img.pixels[i * d + j] / 255.0;
    }
    if (lbl[i] > 9) throw FormatError(lbl_path + ": label " + std::to_string(lbl[i]) + " > 9");
    ds.labels[i] = lbl[i];
  }
  return ds;
}

Dataset synth_blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed) {
  if (classes < 1 || per_class < 1 || dim < 1 || spread < 0.0) {
    throw std::invalid_argument("blob sizes must be positive and spread nonnegative");
  }
  if (dim < classes) throw std::invalid_argument("blobs need dim >= classes");
  Dataset ds;
  ds.class_count = classes;
  const int n = classes * per_class;
  ds.inputs = nn::Matrix::Zero(n, dim);
  ds.labels.resize(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double offset = 1.0 / std::sqrt(2.0);
  // Interleave classes so prefixes stay balanced.
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    ds.labels[i] = c;
    for (int j = 0; j < dim; ++j) ds.inputs(i, j) = spread * noise(rng);
    ds.inputs(i, c) += offset;
  }
  return ds;
}

Partition partition_noniid(const Dataset& dataset, int clients, int sigma, std::uint64_t seed) {
  const int k = dataset.class_count;
  if (clients < 1) throw std::invalid_argument("partition needs at least one client");
  if (sigma < 1 || sigma > k) {
    throw std::invalid_argument("sigma must satisfy 1 <= sigma <= K (sigma=" +
                                std::to_string(sigma) + ", K=" + std::to_string(k) + ")");
  }
  if ((static_cast<long long>(clients) * sigma) % k != 0) {
    throw std::invalid_argument("M*sigma must be divisible by K (M=" + std::to_string(clients) +
                                ", sigma=" + std::to_string(sigma) + ", K=" +
                                std::to_string(k) + ")");
  }
  const int shards_per_class = clients * sigma / k;

  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) by_class[dataset.labels[i]].push_back(i);
  for (int c = 0; c < k; ++c) {
    if (static_cast<int>(by_class[c].size()) < shards_per_class) {
      throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) +
                                  " examples, fewer than the " +
                                  std::to_string(shards_per_class) + " shards it must fill");
    }
  }

  std::mt19937_64 rng(seed);
  // shards[c][s]: the s-th shard of class c, sizes differing by at most one.
  std::vector<std::vector<std::vector<std::size_t>>> shards(k);
  for (int c = 0; c < k; ++c) {
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    shards[c].resize(shards_per_class);
    for (std::size_t i = 0; i < by_class[c].size(); ++i) {
      shards[c][i % shards_per_class].push_back(by_class[c][i]);
    }
  }

  // Lay the class-slots out class by class, each class occupying
  // shards_per_class <= M consecutive slots. Client j takes slots j, j+M, ...,
  // which are therefore always distinct classes. Randomness enters through
  // the class order and the client order.
  std::vector<int> class_order(k);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng);
  std::vector<int> client_order(clients);
  std::iota(client_order.begin(), client_order.end(), 0);
  std::shuffle(client_order.begin(), client_order.end(), rng);

  std::vector<std::pair<int, int>> slots;  // (class, shard)
  for (int c : class_order) {
    for (int s = 0; s < shards_per_class; ++s) slots.emplace_back(c, s);
  }

  Partition part;
  part.sigma = sigma;
  part.clients.resize(clients);
  for (int j = 0; j < clients; ++j) {
    auto& dst = part.clients[client_order[j]];
    for (int t = 0; t < sigma; ++t) {
      const auto [c, s] = slots[static_cast<std::size_t>(t) * clients + j];
      dst.insert(dst.end(), shards[c][s].begin(), shards[c][s].end());
    }
    std::sort(dst.begin(), dst.end());
  }
  return part;
}

void write_partition_csv(const Partition& partition, std::ostream& out) {
  out << "client,index\n";
  for (std::size_t c = 0; c < partition.clients.size(); ++c) {
    for (std::size_t idx : partition.clients[c]) out << c << ',' << idx << '\n';
  }
}

void write_partition_csv(const Partition& partition, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_partition_csv(partition, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Batcher::Batcher(std::vector<std::size_t> shard, int batch_size, std::uint64_t seed,
                 bool reshuffle_per_epoch)
    : shard_(std::move(shard)), batch_size_(batch_size), seed_(seed), reshuffle_(reshuffle_per_epoch) {
  if (shard_.empty()) throw std::invalid_argument("cannot batch an empty shard");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  batch_count_ = static_cast<int>((shard_.size() + batch_size - 1) / batch_size);
  std::mt19937_64 rng(seed_);
  std::shuffle(shard_.begin(), shard_.end(), rng);
}

std::vector<std::vector<std::size_t>> Batcher::epoch(std::uint64_t epoch_index) const {
  std::vector<std::size_t> order = shard_;
  if (reshuffle_ && epoch_index > 0) {
    std::mt19937_64 rng(derive_seed(seed_, {epoch_index}));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(batch_count_);
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    const std::size_t end = std::min(order.size(), start + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace whalefl::data

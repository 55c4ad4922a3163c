#pragma once

// Experiment configuration and its on-disk form: an INI file with one
// section per module. Every key is optional; missing keys keep the defaults
// below. Unknown keys are rejected so typos do not silently fall back.
//
//   [model]     hidden, activation, init_seed
//   [data]      source (mnist|blobs), mnist_dir, train_limit, test_limit,
//               blob_classes, blob_per_class, blob_dim, blob_spread,
//               blob_test_per_class, blob_seed, sigma, partition_seed,
//               batch_seed, reshuffle
//   [fleet]     per_tier, speed_ratio, base_speed, max_level
//   [trace]     kind (markov|file), file, seed, link_stay, compute_stay,
//               fade_min, fade_max, link_rates, compute_levels,
//               initial_link, initial_compute
//   [subnet]    levels, shrink
//   [scheduler] beta, round_seconds, u_threshold, u_threshold_mode
//               (fixed|calibrate), window, history_capacity, bootstrap_level
//   [fisher]    mode (sampled|exact|empirical), seed
//   [train]     strategy, rounds, local_epochs, batch_size, lr,
//               target_accuracy, stop_at_target, mask_seed, participation,
//               participation_seed
//   [latency]   bits_per_param, include_download
//   [eval]      train_loss
//
// List values are comma separated.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "whalefl/fisher.h"
#include "whalefl/nn.h"
#include "whalefl/scheduler.h"
#include "whalefl/subnet.h"
#include "whalefl/sysmodel.h"

namespace whalefl::harness {

enum class Strategy {
  kFedAvg,
  kHeteroFL,
  kFedDropout,
  kFedRolex,
  kWhale,
  kWhaleDropout,
  kWhaleRolex,
  kWhaleSeOnly,
  kWhaleTeOnly,
};

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);
bool is_adaptive(Strategy s);
subnet::MaskKind mask_kind(Strategy s);
sched::UtilityMode utility_mode(Strategy s);

enum class DataSource { kMnist, kBlobs };
enum class ThresholdMode { kFixed, kCalibrate };

struct ModelConfig {
  std::vector<int> hidden{128};
  nn::Activation activation = nn::Activation::kRelu;
  std::uint64_t init_seed = 1;

  bool operator==(const ModelConfig&) const = default;
};

struct DataConfig {
  DataSource source = DataSource::kMnist;
  std::string mnist_dir = "data/mnist";
  std::size_t train_limit = 10000;  // 0 keeps the whole split
  std::size_t test_limit = 0;
  int blob_classes = 10;
  int blob_per_class = 100;
  int blob_dim = 20;
  double blob_spread = 0.3;
  int blob_test_per_class = 50;
  std::uint64_t blob_seed = 1;
  int sigma = 2;
  std::uint64_t partition_seed = 1;
  std::uint64_t batch_seed = 1;
  bool reshuffle = false;

  bool operator==(const DataConfig&) const = default;
};

struct SchedulerConfig {
  sched::SchedulerParams params;
  ThresholdMode threshold_mode = ThresholdMode::kFixed;
  int history_capacity = 10;
  int bootstrap_level = 0;  // 0: start at the device cap

  bool operator==(const SchedulerConfig&) const = default;
};

struct FisherConfig {
  fisher::FisherMode mode = fisher::FisherMode::kSampled;
  std::uint64_t seed = 1;

  bool operator==(const FisherConfig&) const = default;
};

struct TrainConfig {
  Strategy strategy = Strategy::kWhale;
  int rounds = 300;
  int local_epochs = 1;
  int batch_size = 32;
  double lr = 0.05;
  double target_accuracy = 0.0;  // 0 disables time-to-target bookkeeping
  bool stop_at_target = false;
  std::uint64_t mask_seed = 1;
  double participation = 1.0;
  std::uint64_t participation_seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

struct LatencyConfig {
  int bits_per_param = 32;
  bool include_download = false;

  bool operator==(const LatencyConfig&) const = default;
};

struct EvalConfig {
  bool train_loss = false;

  bool operator==(const EvalConfig&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  DataConfig data;
  sys::FleetConfig fleet;
  sys::TraceConfig trace;
  SchedulerConfig scheduler;
  FisherConfig fisher;
  TrainConfig train;
  LatencyConfig latency;
  EvalConfig eval;

  int client_count() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Every problem found, in a stable order; empty means valid.
std::vector<std::string> validate(const ExperimentConfig& config);

// Throws ConfigError on unknown keys or unparsable values.
ExperimentConfig read_config(std::istream& in);
ExperimentConfig read_config_file(const std::string& path);
void write_config(const ExperimentConfig& config, std::ostream& out);
void write_config_file(const ExperimentConfig& config, const std::string& path);

// Applies a single `section.key=value` override.
void apply_override(ExperimentConfig& config, const std::string& assignment);

}  // namespace whalefl::harness

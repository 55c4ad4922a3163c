#pragma once

// The federated training loop: per-round subnetwork choice, local SGD with
// Fisher bookkeeping, heterogeneous aggregation, latency accounting and
// evaluation, plus multi-strategy comparisons.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "whalefl/config.h"
#include "whalefl/data.h"
#include "whalefl/fisher.h"
#include "whalefl/nn.h"
#include "whalefl/scheduler.h"
#include "whalefl/subnet.h"
#include "whalefl/sysmodel.h"

namespace whalefl::harness {

// Read-only inputs shared by every run that agrees on data, fleet and trace.
struct Environment {
  data::Dataset train;
  data::Dataset test;
  data::Partition partition;
  std::vector<sys::DeviceProfile> fleet;
  sys::DynamicsTrace trace;
};

std::shared_ptr<const Environment> build_environment(const ExperimentConfig& config);
nn::Arch make_arch(const ExperimentConfig& config, const data::Dataset& train);

struct ClientMetrics {
  bool participated = false;
  int level = 0;
  double latency_s = 0.0;
  double util = 0.0;
  double u_n = 0.0;
  double se = 0.0;
  double te = 0.0;
  double fi = 0.0;  // mean per-batch Fisher trace this round
};

struct MetricsRow {
  std::int64_t round = 0;
  double cum_time_s = 0.0;
  double round_latency_s = 0.0;
  double test_acc = 0.0;
  double test_loss = 0.0;
  double mean_fi = 0.0;
  double mean_level = 0.0;
  std::vector<ClientMetrics> clients;
  std::optional<double> train_loss;
};

struct MetricsLog {
  int clients = 0;
  std::vector<MetricsRow> rows;

  // First round whose test accuracy reaches `target`, if any.
  std::optional<std::size_t> first_reaching(double target) const;
};

// Column order is fixed:
//   round, cum_time_s, round_latency_s, test_acc, test_loss, mean_fi,
//   mean_level, then for each client N: clientN_level, clientN_latency_s,
//   clientN_util, clientN_u_n, clientN_se, clientN_te, clientN_fi, and a
//   trailing train_loss (empty when not evaluated).
std::string metrics_header(int clients);
void write_csv(const MetricsLog& log, std::ostream& out);
void write_csv(const MetricsLog& log, const std::string& path);

class Simulation {
 public:
  // Throws ConfigError listing every validation problem.
  explicit Simulation(ExperimentConfig config);
  Simulation(ExperimentConfig config, std::shared_ptr<const Environment> env);

  // Runs one synchronous round and returns its metrics row.
  const MetricsRow& run_round();

  // Runs until `rounds` or, when stop_at_target is set, the target accuracy.
  const MetricsLog& run();

  bool reached_target() const;
  std::int64_t round() const { return round_; }
  double cumulative_time() const { return cum_time_; }
  const nn::Model& global_model() const { return global_; }
  void set_global_model(nn::Model m) { global_ = std::move(m); }
  const nn::Arch& arch() const { return arch_; }
  const MetricsLog& log() const { return log_; }
  const ExperimentConfig& config() const { return config_; }
  const Environment& environment() const { return *env_; }
  const fisher::FisherHistory& history(int client) const { return histories_.at(client); }
  const sys::Workload& workload(int client) const { return workloads_.at(client); }
  double u_threshold() const { return u_threshold_; }

  // The scheduler inputs client `client` would see at the current round.
  sched::SelectInputs select_inputs(int client) const;

 private:
  struct ClientOutcome {
    sched::Selection selection;
    subnet::SubModel update;
    double latency_s = 0.0;
    double mean_fi = 0.0;
  };

  std::vector<int> participants() const;
  void maybe_calibrate(const std::vector<int>& clients);
  sched::Selection choose(int client) const;
  ClientOutcome train_client(int client, const sched::Selection& selection);

  ExperimentConfig config_;
  std::shared_ptr<const Environment> env_;
  nn::Arch arch_;
  nn::Model global_;
  std::vector<data::Batcher> batchers_;
  std::vector<fisher::FisherHistory> histories_;
  std::vector<sys::Workload> workloads_;
  double u_threshold_ = 0.0;
  bool calibrated_ = false;
  std::int64_t round_ = 0;
  double cum_time_ = 0.0;
  MetricsLog log_;
};

MetricsLog run_experiment(const ExperimentConfig& config);
MetricsLog run_experiment(const ExperimentConfig& config,
                          std::shared_ptr<const Environment> env);

struct ComparisonRow {
  std::string strategy;
  double target_accuracy = 0.0;
  std::optional<double> time_to_target_s;
  std::optional<std::int64_t> rounds_to_target;
  double final_accuracy = 0.0;
  std::optional<double> speedup;  // reference time / this time
};

struct ComparisonReport {
  std::string reference;
  std::vector<ComparisonRow> rows;
  std::vector<MetricsLog> logs;  // parallel to rows
};

// Time-to-target for each config and speedup versus `reference`. Configs
// must agree on their data, fleet and trace sections.
ComparisonReport compare(const std::vector<ExperimentConfig>& configs,
                         const std::string& reference);
ComparisonReport compare(const std::vector<ExperimentConfig>& configs,
                         const std::string& reference,
                         std::shared_ptr<const Environment> env);
ComparisonRow summarize(const std::string& strategy, const MetricsLog& log, double target);

void write_comparison_csv(const ComparisonReport& report, std::ostream& out);
void write_comparison_csv(const ComparisonReport& report, const std::string& path);

}  // namespace whalefl::harness

#include "whalefl/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "whalefl/error.h"
#include "whalefl/util.h"

namespace whalefl::harness {
namespace {

void require_valid(const ExperimentConfig& config) {
  auto problems = validate(config);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

}  // namespace

std::optional<std::size_t> MetricsLog::first_reaching(double target) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].test_acc >= target) return i;
  }
  return std::nullopt;
}

std::shared_ptr<const Environment> build_environment(const ExperimentConfig& config) {
  require_valid(config);
  auto env = std::make_shared<Environment>();
  const DataConfig& d = config.data;
  if (d.source == DataSource::kMnist) {
    env->train = data::load_mnist(d.mnist_dir, data::MnistSplit::kTrain, d.train_limit);
    env->test = data::load_mnist(d.mnist_dir, data::MnistSplit::kTest, d.test_limit);
  } else {
    env->train = data::synth_blobs(d.blob_classes, d.blob_per_class, d.blob_dim,
                                   d.blob_spread, d.blob_seed);
    env->test = data::synth_blobs(d.blob_classes, d.blob_test_per_class, d.blob_dim,
                                  d.blob_spread, derive_seed(d.blob_seed, {1}));
  }
  const int clients = config.client_count();
  env->partition = data::partition_noniid(env->train, clients, d.sigma, d.partition_seed);
  env->fleet = sys::make_fleet(config.fleet, config.scheduler.params.spec.levels);
  env->trace = sys::load_or_generate(config.trace, clients, config.train.rounds);
  return env;
}

nn::Arch make_arch(const ExperimentConfig& config, const data::Dataset& train) {
  nn::Arch arch;
  arch.widths.push_back(train.dim());
  arch.widths.insert(arch.widths.end(), config.model.hidden.begin(), config.model.hidden.end());
  arch.widths.push_back(train.class_count);
  arch.activation = config.model.activation;
  arch.validate();
  return arch;
}

// --- metrics CSV -------------------------------------------------------------

std::string metrics_header(int clients) {
  std::string h = "round,cum_time_s,round_latency_s,test_acc,test_loss,mean_fi,mean_level";
  for (int c = 0; c < clients; ++c) {
    const std::string p = ",client" + std::to_string(c) + "_";
    h += p + "level" + p + "latency_s" + p + "util" + p + "u_n" + p + "se" + p + "te" + p + "fi";
  }
  h += ",train_loss";
  return h;
}

void write_csv(const MetricsLog& log, std::ostream& out) {
  out << metrics_header(log.clients) << '\n';
  for (const MetricsRow& r : log.rows) {
    out << r.round << ',' << format_double(r.cum_time_s) << ','
        << format_double(r.round_latency_s) << ',' << format_double(r.test_acc) << ','
        << format_double(r.test_loss) << ',' << format_double(r.mean_fi) << ','
        << format_double(r.mean_level);
    for (const ClientMetrics& c : r.clients) {
      out << ',' << c.level << ',' << format_double(c.latency_s) << ','
          << format_double(c.util) << ',' << format_double(c.u_n) << ','
          << format_double(c.se) << ',' << format_double(c.te) << ','
          << format_double(c.fi);
    }
    out << ',';
    if (r.train_loss) out << format_double(*r.train_loss);
    out << '\n';
  }
}

void write_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(log, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

// --- simulation --------------------------------------------------------------

Simulation::Simulation(ExperimentConfig config)
    : Simulation(config, build_environment(config)) {}

Simulation::Simulation(ExperimentConfig config, std::shared_ptr<const Environment> env)
    : config_(std::move(config)), env_(std::move(env)) {
  require_valid(config_);
  const int clients = config_.client_count();
  if (static_cast<int>(env_->partition.clients.size()) != clients ||
      static_cast<int>(env_->fleet.size()) != clients) {
    throw std::invalid_argument("environment was built for a different fleet size");
  }
  if (env_->trace.rounds() < config_.train.rounds || env_->trace.clients() < clients) {
    throw std::invalid_argument("environment trace is shorter than the configured run");
  }
  arch_ = make_arch(config_, env_->train);
  global_ = nn::init_model(arch_, config_.model.init_seed);
  u_threshold_ = config_.scheduler.params.u_threshold;

  for (int c = 0; c < clients; ++c) {
    batchers_.emplace_back(env_->partition.clients[c], config_.train.batch_size,
                           derive_seed(config_.data.batch_seed, {static_cast<std::uint64_t>(c)}),
                           config_.data.reshuffle);
    histories_.emplace_back(config_.scheduler.history_capacity, batchers_.back().batch_count());
    sys::Workload w;
    w.local_steps = static_cast<std::int64_t>(config_.train.local_epochs) *
                    batchers_.back().batch_count();
    w.batch_size = config_.train.batch_size;
    w.bits_per_param = config_.latency.bits_per_param;
    w.include_download = config_.latency.include_download;
    workloads_.push_back(w);
  }
  log_.clients = clients;
}

std::vector<int> Simulation::participants() const {
  const int m = config_.client_count();
  std::vector<int> ids(m);
  std::iota(ids.begin(), ids.end(), 0);
  if (config_.train.participation >= 1.0) return ids;
  const int k = std::max(1, static_cast<int>(std::ceil(config_.train.participation * m)));
  std::mt19937_64 rng(derive_seed(config_.train.participation_seed,
                                  {static_cast<std::uint64_t>(round_)}));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

sched::SelectInputs Simulation::select_inputs(int client) const {
  sched::SelectInputs in;
  in.client = client;
  in.round = round_;
  in.history = &histories_.at(client);
  in.unit = sys::unit_cost(arch_, config_.scheduler.params.spec, env_->fleet[client],
                           env_->trace.at(round_, client), workloads_[client]);
  in.max_level = env_->fleet[client].max_level;
  in.bootstrap_level = config_.scheduler.bootstrap_level;
  return in;
}

void Simulation::maybe_calibrate(const std::vector<int>& clients) {
  if (calibrated_ || config_.scheduler.threshold_mode != ThresholdMode::kCalibrate) return;
  double best = 0.0;
  bool any = false;
  for (int c : clients) {
    if (histories_[c].empty()) continue;
    any = true;
    best = std::max(best, sched::raw_utility(select_inputs(c), config_.scheduler.params,
                                             utility_mode(config_.train.strategy)));
  }
  if (!any) return;
  if (best > 0.0) u_threshold_ = best;
  calibrated_ = true;
}

sched::Selection Simulation::choose(int client) const {
  const Strategy strategy = config_.train.strategy;
  if (is_adaptive(strategy)) {
    sched::SchedulerParams params = config_.scheduler.params;
    params.u_threshold = u_threshold_;
    return sched::select(select_inputs(client), params, utility_mode(strategy));
  }
  sched::Selection s;
  s.client = client;
  s.level = strategy == Strategy::kFedAvg ? 1 : env_->fleet[client].max_level;
  return s;
}

Simulation::ClientOutcome Simulation::train_client(int client,
                                                   const sched::Selection& selection) {
  const auto c64 = static_cast<std::uint64_t>(client);
  const auto r64 = static_cast<std::uint64_t>(round_);
  const subnet::LevelSpec& spec = config_.scheduler.params.spec;

  std::mt19937_64 mask_rng(derive_seed(config_.train.mask_seed, {c64, r64}));
  const subnet::Mask mask = subnet::make_mask(mask_kind(config_.train.strategy), arch_,
                                              selection.level, spec, round_, mask_rng);
  ClientOutcome out;
  out.selection = selection;
  out.update = subnet::extract(global_, mask);

  const data::Batcher& batcher = batchers_[client];
  std::vector<double> traces(batcher.batch_count(), 0.0);
  std::mt19937_64 fisher_rng(derive_seed(config_.fisher.seed, {c64, r64}));
  const int epochs = config_.train.local_epochs;
  try {
    for (int e = 0; e < epochs; ++e) {
      const auto batches =
          batcher.epoch(static_cast<std::uint64_t>(round_) * epochs + e);
      for (std::size_t k = 0; k < batches.size(); ++k) {
        const nn::Batch batch = nn::gather(env_->train.inputs, env_->train.labels, batches[k]);
        const nn::ForwardCache cache = nn::forward_cached(out.update.model, batch.inputs);
        // Fisher is read once per batch per round, on the pre-step weights.
        if (e == 0) {
          traces[k] = fisher::batch_fisher_trace(out.update.model, cache, batch.labels,
                                                 config_.fisher.mode, fisher_rng);
        }
        const nn::Gradients grads = nn::loss_and_grad(out.update.model, cache, batch.labels);
        nn::sgd_step(out.update.model, grads, config_.train.lr);
      }
    }
  } catch (const NumericError& e) {
    throw NumericError("round " + std::to_string(round_) + ", client " +
                       std::to_string(client) + " (level " + std::to_string(selection.level) +
                       "): " + e.what());
  }

  out.mean_fi = std::accumulate(traces.begin(), traces.end(), 0.0) /
                static_cast<double>(traces.size());
  histories_[client].record_round(round_, std::move(traces));
  out.latency_s = sys::estimate_cost(arch_, selection.level, spec, env_->fleet[client],
                                     env_->trace.at(round_, client), workloads_[client])
                      .total();
  return out;
}

const MetricsRow& Simulation::run_round() {
  if (round_ >= env_->trace.rounds()) {
    throw std::out_of_range("no trace entries left for round " + std::to_string(round_));
  }
  const std::vector<int> clients = participants();
  if (is_adaptive(config_.train.strategy)) maybe_calibrate(clients);

  MetricsRow row;
  row.round = round_;
  row.clients.resize(config_.client_count());

  std::vector<sched::Selection> selections;
  selections.reserve(clients.size());
  for (int c : clients) selections.push_back(choose(c));

  std::vector<subnet::SubModel> updates;
  std::vector<double> latencies;
  updates.reserve(clients.size());
  for (const sched::Selection& sel : selections) {
    ClientOutcome out = train_client(sel.client, sel);
    ClientMetrics& cm = row.clients[sel.client];
    cm.participated = true;
    cm.level = sel.level;
    cm.latency_s = out.latency_s;
    cm.util = sel.util;
    cm.u_n = sel.u_n;
    cm.se = sel.se;
    cm.te = sel.te;
    cm.fi = out.mean_fi;
    latencies.push_back(out.latency_s);
    row.mean_fi += out.mean_fi;
    row.mean_level += sel.level;
    updates.push_back(std::move(out.update));
  }
  row.mean_fi /= static_cast<double>(clients.size());
  row.mean_level /= static_cast<double>(clients.size());

  global_ = subnet::aggregate(global_, updates);
  if (!nn::all_finite(global_)) {
    throw NumericError("global model became non-finite after aggregation in round " +
                       std::to_string(round_));
  }

  row.round_latency_s = sys::round_latency(latencies);
  cum_time_ += row.round_latency_s;
  row.cum_time_s = cum_time_;

  const nn::EvalResult test = nn::evaluate(global_, env_->test.inputs, env_->test.labels);
  row.test_acc = test.accuracy;
  row.test_loss = test.loss;
  if (config_.eval.train_loss) {
    row.train_loss = nn::evaluate(global_, env_->train.inputs, env_->train.labels).loss;
  }

  ++round_;
  log_.rows.push_back(std::move(row));
  return log_.rows.back();
}

bool Simulation::reached_target() const {
  return config_.train.target_accuracy > 0.0 && !log_.rows.empty() &&
         log_.rows.back().test_acc >= config_.train.target_accuracy;
}

const MetricsLog& Simulation::run() {
  while (round_ < config_.train.rounds) {
    run_round();
    if (config_.train.stop_at_target && reached_target()) break;
  }
  return log_;
}

MetricsLog run_experiment(const ExperimentConfig& config) {
  require_valid(config);
  Simulation sim(config);
  return sim.run();
}

MetricsLog run_experiment(const ExperimentConfig& config,
                          std::shared_ptr<const Environment> env) {
  Simulation sim(config, std::move(env));
  return sim.run();
}

// --- comparisons -------------------------------------------------------------

ComparisonRow summarize(const std::string& strategy, const MetricsLog& log, double target) {
  ComparisonRow row;
  row.strategy = strategy;
  row.target_accuracy = target;
  if (!log.rows.empty()) row.final_accuracy = log.rows.back().test_acc;
  if (target > 0.0) {
    if (auto idx = log.first_reaching(target)) {
      row.time_to_target_s = log.rows[*idx].cum_time_s;
      row.rounds_to_target = static_cast<std::int64_t>(*idx) + 1;
    }
  }
  return row;
}

ComparisonReport compare(const std::vector<ExperimentConfig>& configs,
                         const std::string& reference) {
  if (configs.empty()) throw std::invalid_argument("compare needs at least one config");
  ExperimentConfig longest = configs.front();
  for (const auto& c : configs) longest.train.rounds = std::max(longest.train.rounds, c.train.rounds);
  return compare(configs, reference, build_environment(longest));
}

ComparisonReport compare(const std::vector<ExperimentConfig>& configs,
                         const std::string& reference,
                         std::shared_ptr<const Environment> env) {
  if (configs.empty()) throw std::invalid_argument("compare needs at least one config");
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (auto& p : validate(configs[i])) problems.push_back("config " + std::to_string(i) + ": " + p);
    const auto& a = configs.front();
    const auto& b = configs[i];
    if (!(a.data == b.data) || !(a.fleet == b.fleet) || !(a.trace == b.trace)) {
      problems.push_back("config " + std::to_string(i) +
                         ": data, fleet and trace sections must match config 0");
    }
    if (!(b.train.target_accuracy > 0.0)) {
      problems.push_back("config " + std::to_string(i) + ": train.target_accuracy must be > 0");
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));

  ComparisonReport report;
  report.reference = reference;
  for (const auto& c : configs) {
    report.logs.push_back(run_experiment(c, env));
    report.rows.push_back(
        summarize(to_string(c.train.strategy), report.logs.back(), c.train.target_accuracy));
  }
  const auto ref = std::find_if(report.rows.begin(), report.rows.end(),
                                [&](const ComparisonRow& r) { return r.strategy == reference; });
  if (ref == report.rows.end()) {
    throw std::invalid_argument("reference strategy '" + reference + "' is not among the configs");
  }
  if (ref->time_to_target_s) {
    const double ref_time = *ref->time_to_target_s;
    for (auto& row : report.rows) {
      if (row.time_to_target_s) row.speedup = ref_time / *row.time_to_target_s;
    }
  }
  return report;
}

void write_comparison_csv(const ComparisonReport& report, std::ostream& out) {
  out << "strategy,target_accuracy,time_to_target_s,rounds_to_target,final_accuracy,speedup_vs_"
      << report.reference << '\n';
  for (const ComparisonRow& r : report.rows) {
    out << r.strategy << ',' << format_double(r.target_accuracy) << ',';
    if (r.time_to_target_s) {
      out << format_double(*r.time_to_target_s) << ',' << *r.rounds_to_target;
    } else {
      out << "not reached,not reached";
    }
    out << ',' << format_double(r.final_accuracy) << ',';
    if (r.speedup) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2fx", *r.speedup);
      out << buf;
    } else {
      out << "not reached";
    }
    out << '\n';
  }
}

void write_comparison_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_comparison_csv(report, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace whalefl::harness

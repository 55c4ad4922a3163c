#include "whalefl/sysmodel.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "whalefl/error.h"
#include "whalefl/util.h"

namespace whalefl::sys {
namespace {

constexpr char kTraceHeader[] = "round,client,link_bps,compute_multiplier";

int next_state(int current, int states, double stay, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (states == 1 || unit(rng) < stay) return current;
  std::uniform_int_distribution<int> other(0, states - 2);
  const int pick = other(rng);
  return pick >= current ? pick + 1 : pick;
}

}  // namespace

char tier_letter(Tier t) { return static_cast<char>('A' + static_cast<int>(t)); }

void FleetConfig::validate() const {
  int total = 0;
  for (int t = 0; t < kTierCount; ++t) {
    if (per_tier[t] < 0) throw std::invalid_argument("tier device counts must be >= 0");
    if (!(speed_ratio[t] > 0.0)) throw std::invalid_argument("tier speed ratios must be > 0");
    if (max_level[t] < 1) throw std::invalid_argument("tier max levels must be >= 1");
    if (t > 0 && speed_ratio[t] > speed_ratio[t - 1]) {
      throw std::invalid_argument("tier speeds must be nonincreasing from A to E");
    }
    if (t > 0 && max_level[t] < max_level[t - 1]) {
      throw std::invalid_argument("tier max levels must be nondecreasing from A to E");
    }
    total += per_tier[t];
  }
  if (total == 0) throw std::invalid_argument("fleet is empty");
  if (!(base_speed > 0.0)) throw std::invalid_argument("base compute speed must be > 0");
}

std::vector<DeviceProfile> make_fleet(const FleetConfig& config, int levels) {
  config.validate();
  std::vector<DeviceProfile> fleet;
  int id = 0;
  for (int t = 0; t < kTierCount; ++t) {
    for (int n = 0; n < config.per_tier[t]; ++n) {
      fleet.push_back({id++, static_cast<Tier>(t), config.base_speed * config.speed_ratio[t],
                       std::min(config.max_level[t], levels)});
    }
  }
  return fleet;
}

void TraceConfig::validate() const {
  if (kind == TraceKind::kFile) {
    if (file.empty()) throw std::invalid_argument("file trace needs a path");
    return;
  }
  if (!(link_stay >= 0.0 && link_stay <= 1.0) || !(compute_stay >= 0.0 && compute_stay <= 1.0)) {
    throw std::invalid_argument("stay probabilities must lie in [0, 1]");
  }
  if (!(fade_min > 0.0 && fade_min <= fade_max)) {
    throw std::invalid_argument("fading band must satisfy 0 < fade_min <= fade_max");
  }
  if (link_rates.empty() || compute_levels.empty()) {
    throw std::invalid_argument("link rates and compute levels must be nonempty");
  }
  for (double r : link_rates) {
    if (!(r > 0.0)) throw std::invalid_argument("link rates must be > 0");
  }
  for (double m : compute_levels) {
    if (!(m > 0.0 && m <= 1.0)) throw std::invalid_argument("compute multipliers must lie in (0, 1]");
  }
  if (initial_link >= static_cast<int>(link_rates.size()) || initial_link < -1) {
    throw std::invalid_argument("initial link state out of range");
  }
  if (initial_compute >= static_cast<int>(compute_levels.size()) || initial_compute < -1) {
    throw std::invalid_argument("initial compute state out of range");
  }
}

DynamicsTrace::DynamicsTrace(int rounds, int clients)
    : rounds_(rounds),
      clients_(clients),
      entries_(static_cast<std::size_t>(rounds) * clients),
      link_states_(static_cast<std::size_t>(rounds) * clients, -1) {
  if (rounds < 1 || clients < 1) throw std::invalid_argument("trace needs >= 1 round and client");
}

std::size_t DynamicsTrace::index(std::int64_t round, int client) const {
  if (round < 0 || round >= rounds_ || client < 0 || client >= clients_) {
    throw std::out_of_range("trace has no entry for round " + std::to_string(round) +
                            ", client " + std::to_string(client));
  }
  return static_cast<std::size_t>(round) * clients_ + client;
}

const TraceEntry& DynamicsTrace::at(std::int64_t round, int client) const {
  return entries_[index(round, client)];
}

TraceEntry& DynamicsTrace::at(std::int64_t round, int client) {
  return entries_[index(round, client)];
}

int DynamicsTrace::link_state(std::int64_t round, int client) const {
  return link_states_[index(round, client)];
}

void DynamicsTrace::set_link_state(std::int64_t round, int client, int state) {
  link_states_[index(round, client)] = state;
}

std::vector<std::vector<double>> transition_matrix(int states, double stay) {
  std::vector<std::vector<double>> m(states, std::vector<double>(states, 0.0));
  for (int i = 0; i < states; ++i) {
    for (int j = 0; j < states; ++j) {
      if (states == 1) {
        m[i][j] = 1.0;
      } else {
        m[i][j] = i == j ? stay : (1.0 - stay) / (states - 1);
      }
    }
  }
  return m;
}

DynamicsTrace gen_trace(int clients, int rounds, const TraceConfig& config) {
  config.validate();
  if (config.kind != TraceKind::kMarkov) {
    throw std::invalid_argument("gen_trace only generates markov traces");
  }
  DynamicsTrace trace(rounds, clients);
  const int n_links = static_cast<int>(config.link_rates.size());
  const int n_loads = static_cast<int>(config.compute_levels.size());
  std::uniform_real_distribution<double> fade(config.fade_min, config.fade_max);
  for (int c = 0; c < clients; ++c) {
    std::mt19937_64 rng(derive_seed(config.seed, {static_cast<std::uint64_t>(c)}));
    int link = config.initial_link;
    if (link < 0) link = std::uniform_int_distribution<int>(0, n_links - 1)(rng);
    int load = config.initial_compute;
    if (load < 0) load = std::uniform_int_distribution<int>(0, n_loads - 1)(rng);
    for (int r = 0; r < rounds; ++r) {
      if (r > 0) {
        link = next_state(link, n_links, config.link_stay, rng);
        load = next_state(load, n_loads, config.compute_stay, rng);
      }
      const double f = config.fade_min == config.fade_max ? config.fade_min : fade(rng);
      trace.at(r, c) = {config.link_rates[link] * f, config.compute_levels[load]};
      trace.set_link_state(r, c, link);
    }
  }
  return trace;
}

void write_trace_csv(const DynamicsTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (int r = 0; r < trace.rounds(); ++r) {
    for (int c = 0; c < trace.clients(); ++c) {
      const TraceEntry& e = trace.at(r, c);
      out << r << ',' << c << ',' << format_double(e.link_bps) << ','
          << format_double(e.compute_multiplier) << '\n';
    }
  }
}

void write_trace_csv(const DynamicsTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_trace_csv(trace, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

DynamicsTrace read_trace_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) {
    throw FormatError(name + ": expected header '" + std::string(kTraceHeader) + "'");
  }
  struct Row {
    long long round, client;
    double rate, mult;
  };
  std::vector<Row> rows;
  long long max_round = -1, max_client = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": expected 4 columns");
    }
    try {
      Row row{parse_int(cells[0]), parse_int(cells[1]), parse_double(cells[2]),
              parse_double(cells[3])};
      if (row.round < 0 || row.client < 0 || !(row.rate > 0.0) ||
          !(row.mult > 0.0 && row.mult <= 1.0)) {
        throw std::invalid_argument("value out of range");
      }
      max_round = std::max(max_round, row.round);
      max_client = std::max(max_client, row.client);
      rows.push_back(row);
    } catch (const std::invalid_argument& e) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (rows.empty()) throw FormatError(name + ": trace has no rows");
  DynamicsTrace trace(static_cast<int>(max_round + 1), static_cast<int>(max_client + 1));
  std::vector<char> seen(static_cast<std::size_t>(trace.rounds()) * trace.clients(), 0);
  for (const Row& row : rows) {
    const std::size_t k = static_cast<std::size_t>(row.round) * trace.clients() + row.client;
    if (seen[k]) {
      throw FormatError(name + ": duplicate row for round " + std::to_string(row.round) +
                        ", client " + std::to_string(row.client));
    }
    seen[k] = 1;
    trace.at(row.round, static_cast<int>(row.client)) = {row.rate, row.mult};
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw FormatError(name + ": trace is missing (round, client) rows");
  }
  return trace;
}

DynamicsTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  return read_trace_csv(in, path);
}

DynamicsTrace load_or_generate(const TraceConfig& config, int clients, int rounds) {
  if (config.kind == TraceKind::kMarkov) return gen_trace(clients, rounds, config);
  DynamicsTrace trace = read_trace_csv(config.file);
  if (trace.clients() < clients || trace.rounds() < rounds) {
    throw std::invalid_argument("trace file " + config.file + " covers " +
                                std::to_string(trace.rounds()) + " rounds x " +
                                std::to_string(trace.clients()) + " clients, need " +
                                std::to_string(rounds) + " x " + std::to_string(clients));
  }
  return trace;
}

double tx_delay(std::int64_t params, double rate_bps, int bits_per_param) {
  if (!(rate_bps > 0.0)) throw std::invalid_argument("link rate must be > 0");
  if (bits_per_param < 1) throw std::invalid_argument("bits per parameter must be >= 1");
  return static_cast<double>(bits_per_param) * static_cast<double>(params) / rate_bps;
}

double compute_delay(std::int64_t flops_per_example, std::int64_t local_steps,
                     int batch_size, double base_speed, double multiplier) {
  if (!(base_speed > 0.0) || !(multiplier > 0.0)) {
    throw std::invalid_argument("compute speed and multiplier must be > 0");
  }
  if (local_steps < 1 || batch_size < 1) {
    throw std::invalid_argument("local steps and batch size must be >= 1");
  }
  return static_cast<double>(local_steps) * batch_size *
         static_cast<double>(flops_per_example) / (base_speed * multiplier);
}

CostEstimate estimate_cost(const nn::Arch& arch, int level, const subnet::LevelSpec& spec,
                           const DeviceProfile& device, const TraceEntry& entry,
                           const Workload& work) {
  const std::vector<int> widths = subnet::level_widths(arch, level, spec);
  const std::int64_t params = nn::count_params(widths);
  CostEstimate c;
  c.tx_seconds = tx_delay(params, entry.link_bps, work.bits_per_param);
  if (work.include_download) c.tx_seconds *= 2.0;
  c.compute_seconds = compute_delay(nn::flops_per_example(widths), work.local_steps,
                                    work.batch_size, device.base_compute_speed,
                                    entry.compute_multiplier);
  return c;
}

sched::UnitCost unit_cost(const nn::Arch& arch, const subnet::LevelSpec& spec,
                          const DeviceProfile& device, const TraceEntry& entry,
                          const Workload& work) {
  const CostEstimate c = estimate_cost(arch, spec.levels, spec, device, entry, work);
  return {c.tx_seconds, c.compute_seconds};
}

double round_latency(std::span<const double> client_latencies) {
  if (client_latencies.empty()) throw std::invalid_argument("round has no participating clients");
  return *std::max_element(client_latencies.begin(), client_latencies.end());
}

double round_latency(std::span<const sched::Selection> selections,
                     std::span<const DeviceProfile> fleet, const DynamicsTrace& trace,
                     std::int64_t round, const nn::Arch& arch,
                     const subnet::LevelSpec& spec, std::span<const Workload> workloads) {
  std::vector<double> latencies;
  latencies.reserve(selections.size());
  for (const sched::Selection& s : selections) {
    const DeviceProfile& dev = fleet[s.client];
    latencies.push_back(
        estimate_cost(arch, s.level, spec, dev, trace.at(round, s.client), workloads[s.client])
            .total());
  }
  return round_latency(latencies);
}

}  // namespace whalefl::sys

#pragma once

// The simulated device fleet: capability tiers, per-round link/compute
// dynamics, and the delay model that turns a subnetwork choice into seconds.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "whalefl/nn.h"
#include "whalefl/scheduler.h"
#include "whalefl/subnet.h"

namespace whalefl::sys {

inline constexpr int kTierCount = 5;

// A (fastest) .. E (slowest); modeled on a laptop, three embedded GPU boards
// and a single-board computer.
enum class Tier { kA = 0, kB, kC, kD, kE };

char tier_letter(Tier t);

struct DeviceProfile {
  int id = 0;
  Tier tier = Tier::kA;
  double base_compute_speed = 0.0;  // FLOP/s with no background load
  int max_level = 1;                // largest subnetwork the device can ever run
};

struct FleetConfig {
  std::array<int, kTierCount> per_tier{4, 4, 4, 4, 4};
  std::array<double, kTierCount> speed_ratio{16, 8, 4, 2, 1};
  double base_speed = 1e8;  // FLOP/s of a ratio-1 device
  std::array<int, kTierCount> max_level{1, 2, 3, 4, 5};

  void validate() const;
  bool operator==(const FleetConfig&) const = default;
};

// Devices are numbered tier by tier. Caps above `levels` are clamped to it.
std::vector<DeviceProfile> make_fleet(const FleetConfig& config, int levels);

enum class TraceKind { kMarkov, kFile };

struct TraceConfig {
  TraceKind kind = TraceKind::kMarkov;
  std::string file;
  std::uint64_t seed = 1;
  double link_stay = 0.8;
  double compute_stay = 0.8;
  double fade_min = 0.7;
  double fade_max = 1.0;
  std::vector<double> link_rates{80e6, 20e6, 10e6};  // WiFi, LTE, Bluetooth
  std::vector<double> compute_levels{1.0, 0.6, 0.3};
  int initial_link = -1;  // -1 draws uniformly
  int initial_compute = -1;

  void validate() const;
  bool operator==(const TraceConfig&) const = default;
};

struct TraceEntry {
  double link_bps = 0.0;
  double compute_multiplier = 1.0;

  bool operator==(const TraceEntry&) const = default;
};

class DynamicsTrace {
 public:
  DynamicsTrace() = default;
  DynamicsTrace(int rounds, int clients);

  int rounds() const { return rounds_; }
  int clients() const { return clients_; }

  const TraceEntry& at(std::int64_t round, int client) const;
  TraceEntry& at(std::int64_t round, int client);

  // Markov link state index per cell, or -1 for file traces.
  int link_state(std::int64_t round, int client) const;
  void set_link_state(std::int64_t round, int client, int state);

  bool operator==(const DynamicsTrace&) const = default;

 private:
  std::size_t index(std::int64_t round, int client) const;

  int rounds_ = 0;
  int clients_ = 0;
  std::vector<TraceEntry> entries_;
  std::vector<int> link_states_;
};

// Each client's link type and background load follow independent
// first-order Markov chains (stay with the given probability, otherwise move
// to one of the other states uniformly); the link rate is further scaled by
// a per-round fading factor. Each client draws from its own stream, so a
// client's trace does not depend on fleet size.
DynamicsTrace gen_trace(int clients, int rounds, const TraceConfig& config);

// Row-stochastic transition matrix of a chain with `states` states.
std::vector<std::vector<double>> transition_matrix(int states, double stay);

// CSV: header `round,client,link_bps,compute_multiplier`.
void write_trace_csv(const DynamicsTrace& trace, std::ostream& out);
void write_trace_csv(const DynamicsTrace& trace, const std::string& path);
DynamicsTrace read_trace_csv(std::istream& in, const std::string& name = "<stream>");
DynamicsTrace read_trace_csv(const std::string& path);

// Loads or generates the trace described by `config`.
DynamicsTrace load_or_generate(const TraceConfig& config, int clients, int rounds);

struct Workload {
  std::int64_t local_steps = 1;
  int batch_size = 32;
  int bits_per_param = 32;
  bool include_download = false;
};

double tx_delay(std::int64_t params, double rate_bps, int bits_per_param = 32);
double compute_delay(std::int64_t flops_per_example, std::int64_t local_steps,
                     int batch_size, double base_speed, double multiplier);

struct CostEstimate {
  double tx_seconds = 0.0;
  double compute_seconds = 0.0;

  double total() const { return tx_seconds + compute_seconds; }
};

CostEstimate estimate_cost(const nn::Arch& arch, int level, const subnet::LevelSpec& spec,
                           const DeviceProfile& device, const TraceEntry& entry,
                           const Workload& work);

// Unit-subnetwork delays fed to the system-efficiency utility.
sched::UnitCost unit_cost(const nn::Arch& arch, const subnet::LevelSpec& spec,
                          const DeviceProfile& device, const TraceEntry& entry,
                          const Workload& work);

// Synchronous round: everyone waits for the slowest client.
double round_latency(std::span<const double> client_latencies);

// Per-client latencies for the given selections, then the max.
double round_latency(std::span<const sched::Selection> selections,
                     std::span<const DeviceProfile> fleet, const DynamicsTrace& trace,
                     std::int64_t round, const nn::Arch& arch,
                     const subnet::LevelSpec& spec, std::span<const Workload> workloads);

}  // namespace whalefl::sys

#pragma once

// Client-side subnetwork size selection: system efficiency x training
// efficiency, normalized against a threshold, quantized to one of P levels
// and capped by what the device can ever run.

#include <cstdint>
#include <string>

#include "whalefl/fisher.h"
#include "whalefl/subnet.h"

namespace whalefl::sched {

struct SchedulerParams {
  double beta = 2.0;            // trade-off exponent on system efficiency
  double round_seconds = 60.0;  // developer-preferred round duration T
  double u_threshold = 30.0;    // utility at which the full model is chosen
  int window = 10;              // Fisher window |D|
  subnet::LevelSpec spec;

  void validate() const;
  bool operator==(const SchedulerParams&) const = default;
};

// Which utility terms take part; the single-term variants pin the other
// factor to 1.
enum class UtilityMode { kJoint, kSystemOnly, kTrainingOnly };

std::string to_string(UtilityMode mode);

// Delay of the unit (smallest) subnetwork on this client for this round.
struct UnitCost {
  double tx_seconds = 0.0;
  double compute_seconds = 0.0;
};

struct Selection {
  int client = 0;
  int level = 1;
  double util = 0.0;
  double u_n = 0.0;
  double se = 0.0;
  double te = 0.0;
  bool bootstrap = false;
};

double system_efficiency(double unit_tx_seconds, double unit_compute_seconds,
                         double round_seconds);
double selection_utility(double te, double se, double beta);
double normalize(double util, double u_threshold);
// Level 1 when u_n >= (P-1)/P, level P when u_n < 1/P.
int quantize(double u_n, int levels);
// The smaller of the two subnetworks, i.e. the larger level index.
int cap(int level, int max_level, int levels);

struct SelectInputs {
  int client = 0;
  std::int64_t round = 0;
  const fisher::FisherHistory* history = nullptr;
  UnitCost unit;
  int max_level = 1;
  // Level used while the client has no Fisher history; 0 means max_level.
  int bootstrap_level = 0;
};

Selection select(const SelectInputs& in, const SchedulerParams& params,
                 UtilityMode mode = UtilityMode::kJoint);

// Util before normalization, for threshold calibration.
double raw_utility(const SelectInputs& in, const SchedulerParams& params,
                   UtilityMode mode = UtilityMode::kJoint);

}  // namespace whalefl::sched

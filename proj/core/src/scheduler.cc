#include "whalefl/scheduler.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace whalefl::sched {

void SchedulerParams::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!(round_seconds > 0.0)) throw std::invalid_argument("round duration T must be > 0");
  if (!(u_threshold > 0.0)) throw std::invalid_argument("U_th must be > 0");
  if (window < 1) throw std::invalid_argument("Fisher window must be >= 1");
  spec.validate();
}

std::string to_string(UtilityMode mode) {
  switch (mode) {
    case UtilityMode::kJoint:
      return "joint";
    case UtilityMode::kSystemOnly:
      return "se_only";
    case UtilityMode::kTrainingOnly:
      return "te_only";
  }
  return "joint";
}

double system_efficiency(double unit_tx_seconds, double unit_compute_seconds,
                         double round_seconds) {
  if (!(unit_tx_seconds > 0.0) || !(unit_compute_seconds > 0.0) || !(round_seconds > 0.0)) {
    throw std::invalid_argument("system efficiency needs positive delays and T");
  }
  return round_seconds / (unit_tx_seconds + unit_compute_seconds);
}

double selection_utility(double te, double se, double beta) {
  if (te == 0.0) return 0.0;
  return te * std::pow(se, beta);
}

double normalize(double util, double u_threshold) {
  if (!(u_threshold > 0.0)) throw std::invalid_argument("U_th must be > 0");
  return std::min(util / u_threshold, 1.0);
}

int quantize(double u_n, int levels) {
  if (!(u_n >= 0.0 && u_n <= 1.0)) throw std::out_of_range("u_n must lie in [0, 1]");
  if (levels < 1) throw std::invalid_argument("level count must be >= 1");
  // Level p covers [(P-p)/P, (P-p+1)/P). Compare against the boundary
  // quotient rather than flooring u_n*P so k/P itself lands on the upper side.
  for (int p = 1; p < levels; ++p) {
    if (u_n >= static_cast<double>(levels - p) / levels) return p;
  }
  return levels;
}

int cap(int level, int max_level, int levels) {
  if (level < 1 || level > levels || max_level < 1 || max_level > levels) {
    throw std::out_of_range("levels must lie in [1, P]");
  }
  return std::max(level, max_level);
}

namespace {

struct Terms {
  double te = 0.0;
  double se = 0.0;
  double util = 0.0;
};

Terms compute_terms(const SelectInputs& in, const SchedulerParams& params, UtilityMode mode) {
  Terms t;
  t.te = mode == UtilityMode::kSystemOnly
             ? 1.0
             : fisher::training_efficiency(*in.history, in.round, params.window);
  t.se = mode == UtilityMode::kTrainingOnly
             ? 1.0
             : system_efficiency(in.unit.tx_seconds, in.unit.compute_seconds,
                                 params.round_seconds);
  t.util = selection_utility(t.te, t.se, params.beta);
  return t;
}

}  // namespace

double raw_utility(const SelectInputs& in, const SchedulerParams& params, UtilityMode mode) {
  if (in.history == nullptr) throw std::invalid_argument("select needs a Fisher history");
  return compute_terms(in, params, mode).util;
}

Selection select(const SelectInputs& in, const SchedulerParams& params, UtilityMode mode) {
  if (in.history == nullptr) throw std::invalid_argument("select needs a Fisher history");
  const int levels = params.spec.levels;
  Selection s;
  s.client = in.client;

  if (in.history->empty()) {
    const int boot = in.bootstrap_level == 0 ? in.max_level : in.bootstrap_level;
    s.level = cap(boot, in.max_level, levels);
    s.u_n = 1.0;
    s.bootstrap = true;
    return s;
  }

  const Terms t = compute_terms(in, params, mode);
  s.te = t.te;
  s.se = t.se;
  s.util = t.util;
  s.u_n = normalize(t.util, params.u_threshold);
  s.level = cap(quantize(s.u_n, levels), in.max_level, levels);
  return s;
}

}  // namespace whalefl::sched

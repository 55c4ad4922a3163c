#include "whalefl/config.h"

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <cmath>
#include <cstdint>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "whalefl/error.h"
#include "whalefl/util.h"

namespace whalefl::harness {
namespace {

namespace pt = boost::property_tree;

// --- value codecs ----------------------------------------------------------

std::string encode(int v) { return std::to_string(v); }
std::string encode(std::uint64_t v) { return std::to_string(v); }
std::string encode(double v) { return format_double(v); }
std::string encode(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string encode_list(const T& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    out += encode(v);
  }
  return out;
}

void decode(const std::string& s, int& out) {
  const long long v = parse_int(s);
  if (v < INT32_MIN || v > INT32_MAX) throw std::invalid_argument("integer out of range");
  out = static_cast<int>(v);
}
void decode(const std::string& s, std::uint64_t& out) {
  const long long v = parse_int(s);
  if (v < 0) throw std::invalid_argument("expected a nonnegative integer");
  out = static_cast<std::uint64_t>(v);
}
void decode(const std::string& s, double& out) { out = parse_double(s); }
void decode(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
  } else if (s == "false" || s == "0") {
    out = false;
  } else {
    throw std::invalid_argument("expected true or false");
  }
}
void decode(const std::string& s, std::string& out) { out = s; }

template <typename T>
void decode(const std::string& s, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    T v{};
    decode(cell, v);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("expected a nonempty list");
}

template <typename T, std::size_t N>
void decode(const std::string& s, std::array<T, N>& out) {
  std::vector<T> v;
  decode(s, v);
  if (v.size() == 1) {
    out.fill(v[0]);
  } else if (v.size() == N) {
    std::copy(v.begin(), v.end(), out.begin());
  } else {
    throw std::invalid_argument("expected 1 or " + std::to_string(N) + " values");
  }
}

std::string data_source_name(DataSource s) { return s == DataSource::kMnist ? "mnist" : "blobs"; }
std::string threshold_mode_name(ThresholdMode m) {
  return m == ThresholdMode::kFixed ? "fixed" : "calibrate";
}
std::string trace_kind_name(sys::TraceKind k) {
  return k == sys::TraceKind::kMarkov ? "markov" : "file";
}

// --- field table -------------------------------------------------------------

// Visits every (section, key, field) triple; `Fn` receives typed fields
// plus string-coded enums through the `text` adaptor below.
template <typename Config, typename Fn>
void visit_fields(Config& c, Fn&& fn) {
  fn("model", "hidden", c.model.hidden);
  fn.text("model", "activation",
          [&] { return nn::to_string(c.model.activation); },
          [&](const std::string& v) { c.model.activation = nn::parse_activation(v); });
  fn("model", "init_seed", c.model.init_seed);

  fn.text("data", "source", [&] { return data_source_name(c.data.source); },
          [&](const std::string& v) {
            if (v == "mnist") {
              c.data.source = DataSource::kMnist;
            } else if (v == "blobs") {
              c.data.source = DataSource::kBlobs;
            } else {
              throw std::invalid_argument("expected mnist or blobs");
            }
          });
  fn("data", "mnist_dir", c.data.mnist_dir);
  fn("data", "train_limit", c.data.train_limit);
  fn("data", "test_limit", c.data.test_limit);
  fn("data", "blob_classes", c.data.blob_classes);
  fn("data", "blob_per_class", c.data.blob_per_class);
  fn("data", "blob_dim", c.data.blob_dim);
  fn("data", "blob_spread", c.data.blob_spread);
  fn("data", "blob_test_per_class", c.data.blob_test_per_class);
  fn("data", "blob_seed", c.data.blob_seed);
  fn("data", "sigma", c.data.sigma);
  fn("data", "partition_seed", c.data.partition_seed);
  fn("data", "batch_seed", c.data.batch_seed);
  fn("data", "reshuffle", c.data.reshuffle);

  fn("fleet", "per_tier", c.fleet.per_tier);
  fn("fleet", "speed_ratio", c.fleet.speed_ratio);
  fn("fleet", "base_speed", c.fleet.base_speed);
  fn("fleet", "max_level", c.fleet.max_level);

  fn.text("trace", "kind", [&] { return trace_kind_name(c.trace.kind); },
          [&](const std::string& v) {
            if (v == "markov") {
              c.trace.kind = sys::TraceKind::kMarkov;
            } else if (v == "file") {
              c.trace.kind = sys::TraceKind::kFile;
            } else {
              throw std::invalid_argument("expected markov or file");
            }
          });
  fn("trace", "file", c.trace.file);
  fn("trace", "seed", c.trace.seed);
  fn("trace", "link_stay", c.trace.link_stay);
  fn("trace", "compute_stay", c.trace.compute_stay);
  fn("trace", "fade_min", c.trace.fade_min);
  fn("trace", "fade_max", c.trace.fade_max);
  fn("trace", "link_rates", c.trace.link_rates);
  fn("trace", "compute_levels", c.trace.compute_levels);
  fn("trace", "initial_link", c.trace.initial_link);
  fn("trace", "initial_compute", c.trace.initial_compute);

  fn("subnet", "levels", c.scheduler.params.spec.levels);
  fn("subnet", "shrink", c.scheduler.params.spec.shrink);

  fn("scheduler", "beta", c.scheduler.params.beta);
  fn("scheduler", "round_seconds", c.scheduler.params.round_seconds);
  fn("scheduler", "u_threshold", c.scheduler.params.u_threshold);
  fn.text("scheduler", "u_threshold_mode",
          [&] { return threshold_mode_name(c.scheduler.threshold_mode); },
          [&](const std::string& v) {
            if (v == "fixed") {
              c.scheduler.threshold_mode = ThresholdMode::kFixed;
            } else if (v == "calibrate") {
              c.scheduler.threshold_mode = ThresholdMode::kCalibrate;
            } else {
              throw std::invalid_argument("expected fixed or calibrate");
            }
          });
  fn("scheduler", "window", c.scheduler.params.window);
  fn("scheduler", "history_capacity", c.scheduler.history_capacity);
  fn("scheduler", "bootstrap_level", c.scheduler.bootstrap_level);

  fn.text("fisher", "mode", [&] { return fisher::to_string(c.fisher.mode); },
          [&](const std::string& v) { c.fisher.mode = fisher::parse_fisher_mode(v); });
  fn("fisher", "seed", c.fisher.seed);

  fn.text("train", "strategy", [&] { return to_string(c.train.strategy); },
          [&](const std::string& v) { c.train.strategy = parse_strategy(v); });
  fn("train", "rounds", c.train.rounds);
  fn("train", "local_epochs", c.train.local_epochs);
  fn("train", "batch_size", c.train.batch_size);
  fn("train", "lr", c.train.lr);
  fn("train", "target_accuracy", c.train.target_accuracy);
  fn("train", "stop_at_target", c.train.stop_at_target);
  fn("train", "mask_seed", c.train.mask_seed);
  fn("train", "participation", c.train.participation);
  fn("train", "participation_seed", c.train.participation_seed);

  fn("latency", "bits_per_param", c.latency.bits_per_param);
  fn("latency", "include_download", c.latency.include_download);

  fn("eval", "train_loss", c.eval.train_loss);
}

struct Writer {
  pt::ptree& tree;

  template <typename T>
  void operator()(const char* sec, const char* key, const T& v) {
    tree.put(pt::ptree::path_type(std::string(sec) + "." + key, '.'), to_text(v));
  }
  template <typename Get, typename Set>
  void text(const char* sec, const char* key, Get get, Set) {
    tree.put(pt::ptree::path_type(std::string(sec) + "." + key, '.'), get());
  }

  static std::string to_text(const std::string& v) { return v; }
  static std::string to_text(int v) { return encode(v); }
  static std::string to_text(std::uint64_t v) { return encode(v); }
  static std::string to_text(double v) { return encode(v); }
  static std::string to_text(bool v) { return encode(v); }
  template <typename T>
  static std::string to_text(const std::vector<T>& v) { return encode_list(v); }
  template <typename T, std::size_t N>
  static std::string to_text(const std::array<T, N>& v) { return encode_list(v); }
};

struct Reader {
  const pt::ptree& tree;
  std::vector<std::string>& problems;
  std::set<std::string> known;

  template <typename T>
  void operator()(const char* sec, const char* key, T& field) {
    apply(sec, key, [&](const std::string& v) { decode(v, field); });
  }
  template <typename Get, typename Set>
  void text(const char* sec, const char* key, Get, Set set) {
    apply(sec, key, set);
  }

  template <typename Set>
  void apply(const char* sec, const char* key, Set set) {
    const std::string path = std::string(sec) + "." + key;
    known.insert(path);
    const auto node = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'));
    if (!node) return;
    try {
      set(*node);
    } catch (const std::exception& e) {
      problems.push_back(path + ": " + e.what());
    }
  }
};

ExperimentConfig from_tree(const pt::ptree& tree) {
  ExperimentConfig config;
  std::vector<std::string> problems;
  Reader reader{tree, problems, {}};
  visit_fields(config, reader);
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      problems.push_back("unknown top-level key '" + section + "'");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!reader.known.count(section + "." + key)) {
        problems.push_back("unknown key '" + section + "." + key + "'");
      }
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return config;
}

pt::ptree to_tree(const ExperimentConfig& config) {
  pt::ptree tree;
  Writer writer{tree};
  visit_fields(const_cast<ExperimentConfig&>(config), writer);
  return tree;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kFedAvg:
      return "fedavg";
    case Strategy::kHeteroFL:
      return "heterofl";
    case Strategy::kFedDropout:
      return "feddropout";
    case Strategy::kFedRolex:
      return "fedrolex";
    case Strategy::kWhale:
      return "whale";
    case Strategy::kWhaleDropout:
      return "whale_dropout";
    case Strategy::kWhaleRolex:
      return "whale_rolex";
    case Strategy::kWhaleSeOnly:
      return "whale_se_only";
    case Strategy::kWhaleTeOnly:
      return "whale_te_only";
  }
  return "whale";
}

Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::kFedAvg, Strategy::kHeteroFL, Strategy::kFedDropout,
                     Strategy::kFedRolex, Strategy::kWhale, Strategy::kWhaleDropout,
                     Strategy::kWhaleRolex, Strategy::kWhaleSeOnly, Strategy::kWhaleTeOnly}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

bool is_adaptive(Strategy s) {
  switch (s) {
    case Strategy::kWhale:
    case Strategy::kWhaleDropout:
    case Strategy::kWhaleRolex:
    case Strategy::kWhaleSeOnly:
    case Strategy::kWhaleTeOnly:
      return true;
    default:
      return false;
  }
}

subnet::MaskKind mask_kind(Strategy s) {
  switch (s) {
    case Strategy::kFedDropout:
    case Strategy::kWhaleDropout:
      return subnet::MaskKind::kDropout;
    case Strategy::kFedRolex:
    case Strategy::kWhaleRolex:
      return subnet::MaskKind::kRolling;
    default:
      return subnet::MaskKind::kWidth;
  }
}

sched::UtilityMode utility_mode(Strategy s) {
  switch (s) {
    case Strategy::kWhaleSeOnly:
      return sched::UtilityMode::kSystemOnly;
    case Strategy::kWhaleTeOnly:
      return sched::UtilityMode::kTrainingOnly;
    default:
      return sched::UtilityMode::kJoint;
  }
}

int ExperimentConfig::client_count() const {
  int total = 0;
  for (int n : fleet.per_tier) total += n;
  return total;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  auto guarded = [&](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(std::string(section) + ": " + e.what());
    }
  };

  check(!c.model.hidden.empty(), "model.hidden: at least one hidden layer is required");
  for (int h : c.model.hidden) check(h >= 1, "model.hidden: widths must be >= 1");

  if (c.data.source == DataSource::kMnist) {
    check(!c.data.mnist_dir.empty(), "data.mnist_dir: required for mnist");
  } else {
    check(c.data.blob_classes >= 1, "data.blob_classes: must be >= 1");
    check(c.data.blob_per_class >= 1, "data.blob_per_class: must be >= 1");
    check(c.data.blob_dim >= c.data.blob_classes, "data.blob_dim: must be >= blob_classes");
    check(c.data.blob_spread >= 0.0, "data.blob_spread: must be >= 0");
    check(c.data.blob_test_per_class >= 1, "data.blob_test_per_class: must be >= 1");
  }
  const int classes = c.data.source == DataSource::kMnist ? 10 : c.data.blob_classes;
  check(c.data.sigma >= 1 && c.data.sigma <= classes, "data.sigma: must lie in [1, K]");
  const int m = c.client_count();
  if (m > 0 && classes > 0 && c.data.sigma >= 1) {
    check((static_cast<long long>(m) * c.data.sigma) % classes == 0,
          "data.sigma: clients*sigma must be divisible by the class count");
  }

  guarded("fleet", [&] { c.fleet.validate(); });
  guarded("trace", [&] { c.trace.validate(); });
  guarded("scheduler", [&] { c.scheduler.params.validate(); });
  check(c.scheduler.history_capacity >= c.scheduler.params.window,
        "scheduler.history_capacity: must be >= window");
  check(c.scheduler.bootstrap_level >= 0 &&
            c.scheduler.bootstrap_level <= c.scheduler.params.spec.levels,
        "scheduler.bootstrap_level: must lie in [0, P]");

  check(c.train.rounds >= 1, "train.rounds: must be >= 1");
  check(c.train.local_epochs >= 1, "train.local_epochs: must be >= 1");
  check(c.train.batch_size >= 1, "train.batch_size: must be >= 1");
  check(c.train.lr >= 0.0 && std::isfinite(c.train.lr), "train.lr: must be finite and >= 0");
  check(c.train.target_accuracy >= 0.0 && c.train.target_accuracy <= 1.0,
        "train.target_accuracy: must lie in [0, 1]");
  check(!c.train.stop_at_target || c.train.target_accuracy > 0.0,
        "train.stop_at_target: needs target_accuracy > 0");
  check(c.train.participation > 0.0 && c.train.participation <= 1.0,
        "train.participation: must lie in (0, 1]");
  check(c.latency.bits_per_param >= 1, "latency.bits_per_param: must be >= 1");
  return problems;
}

ExperimentConfig read_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({std::string("parse error: ") + e.what()});
  }
  return from_tree(tree);
}

ExperimentConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  return read_config(in);
}

void write_config(const ExperimentConfig& config, std::ostream& out) {
  pt::write_ini(out, to_tree(config));
}

void write_config_file(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_config(config, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError({"override '" + assignment + "' is not of the form section.key=value"});
  }
  pt::ptree tree = to_tree(config);
  tree.put(pt::ptree::path_type(assignment.substr(0, eq), '.'), assignment.substr(eq + 1));
  config = from_tree(tree);
}

}  // namespace whalefl::harness

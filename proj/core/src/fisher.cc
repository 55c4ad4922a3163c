#include "whalefl/fisher.h"

#include <cmath>
#include <stdexcept>

#include "whalefl/error.h"

namespace whalefl::fisher {

std::string to_string(FisherMode mode) {
  switch (mode) {
    case FisherMode::kSampled:
      return "sampled";
    case FisherMode::kExact:
      return "exact";
    case FisherMode::kEmpirical:
      return "empirical";
  }
  return "sampled";
}

FisherMode parse_fisher_mode(const std::string& name) {
  if (name == "sampled") return FisherMode::kSampled;
  if (name == "exact") return FisherMode::kExact;
  if (name == "empirical") return FisherMode::kEmpirical;
  throw std::invalid_argument("unknown fisher mode '" + name + "'");
}

double batch_fisher_trace(const nn::Model& model, const nn::ForwardCache& cache,
                          std::span<const int> true_labels, FisherMode mode,
                          std::mt19937_64& rng) {
  const nn::Matrix& logits = cache.logits();
  const Eigen::Index n = logits.rows();
  if (n == 0) throw ShapeError("empty batch");
  if (static_cast<Eigen::Index>(true_labels.size()) != n) {
    throw ShapeError("label count does not match batch size");
  }

  switch (mode) {
    case FisherMode::kEmpirical:
      return nn::per_example_grad_sq_norms(model, cache, true_labels).mean();

    case FisherMode::kSampled: {
      const nn::Matrix probs = nn::softmax(logits);
      std::vector<int> drawn(n);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (Eigen::Index r = 0; r < n; ++r) {
        const double u = unit(rng);
        double acc = 0.0;
        int pick = static_cast<int>(probs.cols()) - 1;
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
          acc += probs(r, c);
          if (u < acc) {
            pick = static_cast<int>(c);
            break;
          }
        }
        drawn[r] = pick;
      }
      return nn::per_example_grad_sq_norms(model, cache, drawn).mean();
    }

    case FisherMode::kExact: {
      const nn::Matrix probs = nn::softmax(logits);
      nn::Vector total = nn::Vector::Zero(n);
      std::vector<int> labels(n);
      for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        std::fill(labels.begin(), labels.end(), static_cast<int>(c));
        total.array() +=
            probs.col(c).array() * nn::per_example_grad_sq_norms(model, cache, labels).array();
      }
      return total.mean();
    }
  }
  return 0.0;
}

double batch_fisher_trace(const nn::Model& model, const nn::Batch& batch,
                          FisherMode mode, std::mt19937_64& rng) {
  const nn::ForwardCache cache = nn::forward_cached(model, batch.inputs);
  return batch_fisher_trace(model, cache, batch.labels, mode, rng);
}

FisherHistory::FisherHistory(int capacity, int batch_count)
    : capacity_(capacity), batch_count_(batch_count) {
  if (capacity < 1) throw std::invalid_argument("history capacity must be >= 1");
  if (batch_count < 1) throw std::invalid_argument("batch count must be >= 1");
}

void FisherHistory::record_round(std::int64_t round, std::vector<double> per_batch_traces) {
  if (static_cast<int>(per_batch_traces.size()) != batch_count_) {
    throw ShapeError("expected " + std::to_string(batch_count_) + " batch traces, got " +
                     std::to_string(per_batch_traces.size()));
  }
  for (double v : per_batch_traces) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("fisher traces must be finite and nonnegative");
    }
  }
  if (!entries_.empty() && round <= entries_.back().round) {
    throw std::invalid_argument("rounds must be recorded in increasing order");
  }
  entries_.push_back({round, std::move(per_batch_traces)});
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

const std::vector<double>* FisherHistory::find(std::int64_t round) const {
  for (const Entry& e : entries_) {
    if (e.round == round) return &e.traces;
  }
  return nullptr;
}

double training_efficiency(const FisherHistory& history, std::int64_t round, int window) {
  if (window < 1) throw std::invalid_argument("window size must be >= 1");
  double sum_sq = 0.0;
  int slots = 0;
  for (const auto& e : history.entries()) {
    const std::int64_t lag = round - e.round;
    if (lag < 1 || lag > window) continue;
    ++slots;
    for (double fi : e.traces) sum_sq += fi * fi;
  }
  if (slots == 0) return 0.0;
  const double batches = history.batch_count();
  return batches * std::sqrt(sum_sq / batches / slots);
}

}  // namespace whalefl::fisher

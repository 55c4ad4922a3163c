#pragma once

// Scalar (trace) Fisher information per batch, the per-client window of
// recent traces, and the training-efficiency utility built from it.

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "whalefl/nn.h"

namespace whalefl::fisher {

// How the label in E[grad grad^T] is chosen:
//   sampled   - one draw y ~ softmax(logits) per example
//   exact     - full expectation over the model's predictive distribution
//   empirical - the true label
enum class FisherMode { kSampled, kExact, kEmpirical };

std::string to_string(FisherMode mode);
FisherMode parse_fisher_mode(const std::string& name);

// Mean over the batch of |grad_W l(x, y)|^2 for a single example's loss.
// `rng` is only consumed in sampled mode.
double batch_fisher_trace(const nn::Model& model, const nn::Batch& batch,
                          FisherMode mode, std::mt19937_64& rng);

// Same as above but reuses a forward pass the caller already has.
double batch_fisher_trace(const nn::Model& model, const nn::ForwardCache& cache,
                          std::span<const int> true_labels, FisherMode mode,
                          std::mt19937_64& rng);

// Ring buffer of the most recent rounds' per-batch traces for one client.
class FisherHistory {
 public:
  struct Entry {
    std::int64_t round = 0;
    std::vector<double> traces;
  };

  FisherHistory(int capacity, int batch_count);

  // Appends a round; the oldest round is evicted past capacity. Rounds must
  // be strictly increasing.
  void record_round(std::int64_t round, std::vector<double> per_batch_traces);

  // Traces stored for `round`, or nullptr.
  const std::vector<double>* find(std::int64_t round) const;

  int capacity() const { return capacity_; }
  int batch_count() const { return batch_count_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<Entry>& entries() const { return entries_; }

 private:
  int capacity_;
  int batch_count_;
  std::deque<Entry> entries_;
};

// TE for round `round` over the window of the `window` previous rounds:
//   |B| * sqrt( (1/|B|) * sum_k sum_d FI_{r-d}(k)^2 / |D'| )
// where D' is the part of {1..window} that has been recorded. Zero when
// nothing in the window has been recorded.
double training_efficiency(const FisherHistory& history, std::int64_t round, int window);

}  // namespace whalefl::fisher

#pragma once

// Width-based subnetworks: which hidden neurons a client trains, slicing
// those neurons out of the global model, and folding the trained slices back.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "whalefl/nn.h"

namespace whalefl::subnet {

// P candidate sizes; level p keeps ceil(h * shrink^(p-1)) of every hidden
// width h. Level 1 is the full model.
struct LevelSpec {
  int levels = 5;
  double shrink = 0.5;

  void validate() const;
  bool operator==(const LevelSpec&) const = default;
};

enum class MaskKind { kWidth, kDropout, kRolling };

std::string to_string(MaskKind kind);

// Sorted kept-neuron indices for every hidden layer. Input and output
// dimensions are never masked.
struct Mask {
  std::vector<std::vector<int>> kept;
  int level = 1;
  MaskKind kind = MaskKind::kWidth;

  bool operator==(const Mask&) const = default;
};

// A trained (or freshly extracted) slice of the global model, together with
// the mask that says where its parameters live.
struct SubModel {
  Mask mask;
  nn::Model model;
};

int kept_width(int full_width, int level, const LevelSpec& spec);

// Layer widths of the subnetwork at `level` (input and output untouched).
std::vector<int> level_widths(const nn::Arch& arch, int level, const LevelSpec& spec);

Mask width_mask(const nn::Arch& arch, int level, const LevelSpec& spec);
Mask dropout_mask(const nn::Arch& arch, int level, const LevelSpec& spec,
                  std::mt19937_64& rng);
// Circular window per hidden layer starting at round mod h.
Mask rolling_mask(const nn::Arch& arch, int level, const LevelSpec& spec,
                  std::int64_t round);

Mask make_mask(MaskKind kind, const nn::Arch& arch, int level,
               const LevelSpec& spec, std::int64_t round, std::mt19937_64& rng);

// Throws ShapeError unless `mask` fits `arch`.
void check_mask(const nn::Arch& arch, const Mask& mask);

SubModel extract(const nn::Model& global, const Mask& mask);

// Writes the submodel into a copy of `base` at the mask's positions.
nn::Model embed(const nn::Model& base, const SubModel& sub);

// Every parameter position covered by at least one update becomes the mean of
// the covering updates' values, summed in list order; uncovered positions
// keep their global value. A weight is covered when both of its endpoint
// neurons are kept; a bias follows its output neuron.
nn::Model aggregate(const nn::Model& global, std::span<const SubModel> updates);

}  // namespace whalefl::subnet

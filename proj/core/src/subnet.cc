#include "whalefl/subnet.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "whalefl/error.h"

namespace whalefl::subnet {
namespace {

void check_level(int level, const LevelSpec& spec) {
  if (level < 1 || level > spec.levels) {
    throw std::out_of_range("level " + std::to_string(level) + " outside [1, " +
                            std::to_string(spec.levels) + "]");
  }
}

// Kept neurons at position `boundary` of arch.widths. The input (0) and
// output (layer_count) boundaries keep everything.
std::vector<int> side_indices(const nn::Arch& arch, const Mask& mask, int boundary) {
  if (boundary == 0 || boundary == arch.layer_count()) {
    std::vector<int> all(arch.widths[boundary]);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  return mask.kept[boundary - 1];
}

}  // namespace

void LevelSpec::validate() const {
  if (levels < 1) throw std::invalid_argument("level count P must be >= 1");
  if (!(shrink > 0.0 && shrink <= 1.0)) {
    throw std::invalid_argument("shrink ratio s must lie in (0, 1]");
  }
}

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kWidth:
      return "width";
    case MaskKind::kDropout:
      return "dropout";
    case MaskKind::kRolling:
      return "rolling";
  }
  return "width";
}

int kept_width(int full_width, int level, const LevelSpec& spec) {
  check_level(level, spec);
  const double exact = full_width * std::pow(spec.shrink, level - 1);
  // Guard against pow() landing a hair above an integer.
  const int k = static_cast<int>(std::ceil(exact - 1e-9));
  return std::clamp(k, 1, full_width);
}

std::vector<int> level_widths(const nn::Arch& arch, int level, const LevelSpec& spec) {
  std::vector<int> w = arch.widths;
  for (int b = 1; b + 1 < static_cast<int>(w.size()); ++b) {
    w[b] = kept_width(arch.widths[b], level, spec);
  }
  return w;
}

Mask width_mask(const nn::Arch& arch, int level, const LevelSpec& spec) {
  Mask m{{}, level, MaskKind::kWidth};
  for (int h = 0; h < arch.hidden_layers(); ++h) {
    std::vector<int> idx(kept_width(arch.widths[h + 1], level, spec));
    std::iota(idx.begin(), idx.end(), 0);
    m.kept.push_back(std::move(idx));
  }
  return m;
}

Mask dropout_mask(const nn::Arch& arch, int level, const LevelSpec& spec,
                  std::mt19937_64& rng) {
  check_level(level, spec);
  if (level == 1) {
    Mask full = width_mask(arch, 1, spec);
    full.kind = MaskKind::kDropout;
    return full;
  }
  Mask m{{}, level, MaskKind::kDropout};
  for (int h = 0; h < arch.hidden_layers(); ++h) {
    const int full = arch.widths[h + 1];
    const int k = kept_width(full, level, spec);
    std::vector<int> pool(full);
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, full - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    m.kept.push_back(std::move(pool));
  }
  return m;
}

Mask rolling_mask(const nn::Arch& arch, int level, const LevelSpec& spec,
                  std::int64_t round) {
  if (round < 0) throw std::invalid_argument("round must be >= 0");
  Mask m{{}, level, MaskKind::kRolling};
  for (int h = 0; h < arch.hidden_layers(); ++h) {
    const int full = arch.widths[h + 1];
    const int k = kept_width(full, level, spec);
    const int offset = static_cast<int>(round % full);
    std::vector<int> idx;
    idx.reserve(k);
    for (int j = 0; j < k; ++j) idx.push_back((offset + j) % full);
    std::sort(idx.begin(), idx.end());
    m.kept.push_back(std::move(idx));
  }
  return m;
}

Mask make_mask(MaskKind kind, const nn::Arch& arch, int level,
               const LevelSpec& spec, std::int64_t round, std::mt19937_64& rng) {
  switch (kind) {
    case MaskKind::kWidth:
      return width_mask(arch, level, spec);
    case MaskKind::kDropout:
      return dropout_mask(arch, level, spec, rng);
    case MaskKind::kRolling:
      return rolling_mask(arch, level, spec, round);
  }
  return width_mask(arch, level, spec);
}

void check_mask(const nn::Arch& arch, const Mask& mask) {
  if (static_cast<int>(mask.kept.size()) != arch.hidden_layers()) {
    throw ShapeError("mask has " + std::to_string(mask.kept.size()) +
                     " hidden layers, arch has " + std::to_string(arch.hidden_layers()));
  }
  for (int h = 0; h < arch.hidden_layers(); ++h) {
    const auto& idx = mask.kept[h];
    if (idx.empty()) throw ShapeError("mask keeps no neurons in hidden layer " + std::to_string(h));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= arch.widths[h + 1]) {
        throw ShapeError("mask index " + std::to_string(idx[i]) +
                         " out of range in hidden layer " + std::to_string(h));
      }
      if (i > 0 && idx[i] <= idx[i - 1]) {
        throw ShapeError("mask indices must be strictly increasing");
      }
    }
  }
}

SubModel extract(const nn::Model& global, const Mask& mask) {
  const nn::Arch& arch = global.arch;
  check_mask(arch, mask);
  nn::Arch sub_arch = arch;
  for (int h = 0; h < arch.hidden_layers(); ++h) {
    sub_arch.widths[h + 1] = static_cast<int>(mask.kept[h].size());
  }
  SubModel sub{mask, nn::zero_model(sub_arch)};
  for (int l = 0; l < arch.layer_count(); ++l) {
    const auto rows = side_indices(arch, mask, l + 1);
    const auto cols = side_indices(arch, mask, l);
    const nn::Layer& src = global.layers[l];
    nn::Layer& dst = sub.model.layers[l];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        dst.weight(r, c) = src.weight(rows[r], cols[c]);
      }
      dst.bias(r) = src.bias(rows[r]);
    }
  }
  return sub;
}

nn::Model embed(const nn::Model& base, const SubModel& sub) {
  const nn::Arch& arch = base.arch;
  check_mask(arch, sub.mask);
  nn::Model out = base;
  for (int l = 0; l < arch.layer_count(); ++l) {
    const auto rows = side_indices(arch, sub.mask, l + 1);
    const auto cols = side_indices(arch, sub.mask, l);
    const nn::Layer& src = sub.model.layers[l];
    if (src.weight.rows() != static_cast<Eigen::Index>(rows.size()) ||
        src.weight.cols() != static_cast<Eigen::Index>(cols.size())) {
      throw ShapeError("submodel layer " + std::to_string(l) + " does not match its mask");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        out.layers[l].weight(rows[r], cols[c]) = src.weight(r, c);
      }
      out.layers[l].bias(rows[r]) = src.bias(r);
    }
  }
  return out;
}

nn::Model aggregate(const nn::Model& global, std::span<const SubModel> updates) {
  if (updates.empty()) return global;
  const nn::Arch& arch = global.arch;
  const int n_layers = arch.layer_count();

  std::vector<nn::Layer> sums;
  std::vector<Eigen::MatrixXi> weight_counts;
  std::vector<Eigen::VectorXi> bias_counts;
  for (const nn::Layer& layer : global.layers) {
    sums.push_back({nn::Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                    nn::Vector::Zero(layer.bias.size())});
    weight_counts.push_back(Eigen::MatrixXi::Zero(layer.weight.rows(), layer.weight.cols()));
    bias_counts.push_back(Eigen::VectorXi::Zero(layer.bias.size()));
  }

  for (const SubModel& u : updates) {
    check_mask(arch, u.mask);
    for (int l = 0; l < n_layers; ++l) {
      const auto rows = side_indices(arch, u.mask, l + 1);
      const auto cols = side_indices(arch, u.mask, l);
      const nn::Layer& src = u.model.layers.at(l);
      if (src.weight.rows() != static_cast<Eigen::Index>(rows.size()) ||
          src.weight.cols() != static_cast<Eigen::Index>(cols.size()) ||
          src.bias.size() != static_cast<Eigen::Index>(rows.size())) {
        throw ShapeError("update layer " + std::to_string(l) + " does not match its mask");
      }
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
          sums[l].weight(rows[r], cols[c]) += src.weight(r, c);
          weight_counts[l](rows[r], cols[c]) += 1;
        }
        sums[l].bias(rows[r]) += src.bias(r);
        bias_counts[l](rows[r]) += 1;
      }
    }
  }

  nn::Model out = global;
  for (int l = 0; l < n_layers; ++l) {
    nn::Layer& dst = out.layers[l];
    for (Eigen::Index r = 0; r < dst.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < dst.weight.cols(); ++c) {
        const int n = weight_counts[l](r, c);
        if (n > 0) dst.weight(r, c) = sums[l].weight(r, c) / n;
      }
      const int nb = bias_counts[l](r);
      if (nb > 0) dst.bias(r) = sums[l].bias(r) / nb;
    }
  }
  return out;
}

}  // namespace whalefl::subnet

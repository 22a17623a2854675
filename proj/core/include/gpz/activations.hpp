#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gpz {

/// Flattened representations of one layer for a batch of samples, plus the
/// labels they carry. `data` is B x d row-major.
struct ActivationBatch {
  std::string layer_name;
  std::vector<std::uint32_t> shape;
  std::size_t d = 0;
  std::vector<float> data;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * d, d}; }

  void validate() const;

  bool operator==(const ActivationBatch&) const = default;
};

/// Per-layer batches over the same samples, ordered shallow to deep.
struct ActivationSet {
  std::size_t num_classes = 0;
  std::vector<ActivationBatch> layers;

  void validate() const;

  bool operator==(const ActivationSet&) const = default;
};

}  // namespace gpz

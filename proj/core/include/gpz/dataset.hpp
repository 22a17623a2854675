#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gpz {

/// Labeled input vectors. Inputs are stored row-major, one sample per row,
/// every entry finite and in [0, 1].
struct Dataset {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<float> inputs;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  std::span<const float> row(std::size_t i) const {
    return {inputs.data() + i * dim, dim};
  }

  /// Throws InvalidArgument when any invariant is broken.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// K classes, per_class samples each, drawn from isotropic Gaussians around
/// centers on the main diagonal of [0.2, 0.8]^dim and clamped to [0, 1].
/// Sample i carries label i % K.
Dataset gaussian_mixture(std::size_t num_classes, std::size_t per_class,
                         std::size_t dim, double spread, std::uint64_t seed);

/// Coordinate value shared by every axis of the center of `label`.
double class_center(std::size_t label, std::size_t num_classes);

/// Rows `indices` of `data`, in the given order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace gpz

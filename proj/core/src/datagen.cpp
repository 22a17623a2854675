#include <algorithm>
#include <cmath>
#include <string>

#include "gpz/dataset.hpp"
#include "gpz/error.hpp"
#include "gpz/rng.hpp"

namespace gpz {

void Dataset::validate() const {
  if (num_classes == 0) throw InvalidArgument("dataset: class count must be >= 1");
  if (dim == 0) throw InvalidArgument("dataset: input dimension must be >= 1");
  if (labels.empty()) throw InvalidArgument("dataset: no samples");
  if (inputs.size() != labels.size() * dim) {
    throw InvalidArgument("dataset: input payload does not match B x d0");
  }
  for (auto y : labels) {
    if (y >= num_classes) {
      throw InvalidArgument("dataset: label " + std::to_string(y) +
                            " out of range for K=" + std::to_string(num_classes));
    }
  }
  for (float v : inputs) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw InvalidArgument("dataset: input entry outside [0,1]");
    }
  }
}

double class_center(std::size_t label, std::size_t num_classes) {
  if (num_classes <= 1) return 0.5;
  return 0.2 + 0.6 * static_cast<double>(label) /
                   static_cast<double>(num_classes - 1);
}

Dataset gaussian_mixture(std::size_t num_classes, std::size_t per_class,
                         std::size_t dim, double spread, std::uint64_t seed) {
  if (num_classes < 1) throw InvalidArgument("gaussian_mixture: K must be >= 1");
  if (per_class < 2) {
    throw InvalidArgument("gaussian_mixture: per_class must be >= 2 (class statistics need N_c >= 2)");
  }
  if (dim < 1) throw InvalidArgument("gaussian_mixture: dim must be >= 1");
  if (!std::isfinite(spread) || spread < 0.0) {
    throw InvalidArgument("gaussian_mixture: spread must be finite and >= 0");
  }

  Dataset out;
  out.num_classes = num_classes;
  out.dim = dim;
  const std::size_t total = num_classes * per_class;
  out.labels.resize(total);
  out.inputs.resize(total * dim);

  Rng rng(Rng::derive(seed, "datagen"));
  for (std::size_t i = 0; i < total; ++i) {
    const auto label = static_cast<std::uint32_t>(i % num_classes);
    out.labels[i] = label;
    const double center = class_center(label, num_classes);
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = std::clamp(center + spread * rng.normal(), 0.0, 1.0);
      out.inputs[i * dim + j] = static_cast<float>(v);
    }
  }
  return out;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.dim = data.dim;
  out.labels.reserve(indices.size());
  out.inputs.reserve(indices.size() * data.dim);
  for (auto i : indices) {
    if (i >= data.size()) throw InvalidArgument("subset: index out of range");
    out.labels.push_back(data.labels[i]);
    auto r = data.row(i);
    out.inputs.insert(out.inputs.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace gpz

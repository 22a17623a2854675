#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpz/activations.hpp"

namespace gpz {

struct ClassRadius {
  std::uint32_t label = 0;
  std::size_t count = 0;
  std::vector<double> mean;
  double r2 = 0.0;  // (1/N_c) sum ||z - mu_c||^2
};

/// Class-conditional statistics of one layer. Covariances use the biased
/// (1/N) normalization; accumulation is in double precision.
struct ClassStats {
  std::size_t d = 0;
  std::size_t batch_size = 0;
  std::vector<ClassRadius> classes;       // classes with N_c >= 2
  std::vector<std::uint32_t> skipped;     // classes present with N_c < 2
  std::vector<double> grand_mean;
  double sigma2_feat = 0.0;               // tr(Sigma_feat) / d over the batch
  double r2_class_avg = 0.0;              // mean of r2 over `classes`

  /// Largest r2 over included classes.
  double r2_max() const;
};

/// Per-layer summary used by the zone locator.
struct LayerRadiusProfile {
  std::size_t layer_index = 0;
  std::string layer_name;
  std::size_t d = 0;
  double r2 = 0.0;
  double r2_norm = 0.0;
  std::optional<double> drop_pct;  // relative to the previous profile
};

/// Throws InvalidArgument when no class has at least two samples.
ClassStats class_stats(const ActivationBatch& batch);

double normalized_radius(double r2, std::size_t d);

/// One profile per layer, shallow to deep, with drop_pct filled from the
/// previous layer where defined.
std::vector<LayerRadiusProfile> layer_profiles(const ActivationSet& acts);

}  // namespace gpz

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpz/activations.hpp"
#include "gpz/dataset.hpp"
#include "gpz/micronet.hpp"

namespace gpz {

struct DecoderConfig {
  std::vector<std::size_t> hidden{64};
  std::size_t epochs = 400;
  double lr = 0.2;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  double aux_fraction = 0.5;
};

/// Index partition of a dataset into an auxiliary (decoder training) part and
/// a held-out evaluation part.
struct Split {
  std::vector<std::size_t> aux;
  std::vector<std::size_t> test;
};

/// The first floor(B * aux_fraction) samples go to aux, the rest to test.
Split make_split(std::size_t size, double aux_fraction);

/// Throws InvalidArgument unless aux and test partition [0, size).
void check_split(const Split& split, std::size_t size);

/// Per-feature centering and one shared scale, fitted on the auxiliary split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(std::span<const float> rows, std::size_t d);
  std::vector<float> apply(std::span<const float> rows) const;
  double invert(double v, std::size_t j) const { return v / scale[j] + mean[j]; }
};

/// Both sides are standardized with auxiliary-split statistics; the net maps
/// standardized z to standardized x.
struct Decoder {
  Standardizer norm;
  Standardizer target_norm;
  MlpModel net;
  std::vector<double> loss_curve;
};

/// Trains g: z -> x with squared error. `acts` is N x d, `inputs` N x d0.
Decoder train_decoder(std::span<const float> acts, std::size_t d, std::span<const float> inputs,
                      std::size_t d0, const DecoderConfig& config);

struct Reconstruction {
  double mse = 0.0;
  double psnr = 0.0;  // +inf when mse == 0
};

/// 10 log10(1 / mse), +inf for a perfect reconstruction.
double psnr_from_mse(double mse);

Reconstruction evaluate(const Decoder& decoder, std::span<const float> acts, std::size_t d,
                        std::span<const float> inputs, std::size_t d0);

struct InversionEntry {
  std::size_t layer = 0;
  std::string layer_name;
  std::size_t d = 0;
  std::vector<std::size_t> decoder_arch;  // d, hidden..., d0
  double train_mse = 0.0;
  double test_mse = 0.0;
  double test_psnr = 0.0;
};

struct InversionReport {
  DecoderConfig config;
  std::size_t aux_size = 0;
  std::size_t test_size = 0;
  std::vector<InversionEntry> layers;
};

/// One decoder per layer with the same split and budget.
InversionReport sweep_layers(const MlpModel& model, const Dataset& data,
                             std::span<const std::size_t> layers, const DecoderConfig& config);

/// Same sweep over a pre-extracted activation set.
InversionReport sweep_layers(const ActivationSet& acts, const Dataset& data,
                             const DecoderConfig& config);

}  // namespace gpz

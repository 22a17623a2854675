#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpz/activations.hpp"
#include "gpz/dataset.hpp"
#include "gpz/micronet.hpp"

namespace gpz {

inline constexpr std::uint32_t kFormatVersion = 1;

using Bytes = std::vector<std::uint8_t>;

/// Little-endian, unpadded encodings. Decoders throw FormatError naming the
/// field and byte offset that failed.
Bytes encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

Bytes encode_model(const MlpModel& model);
MlpModel decode_model(std::span<const std::uint8_t> bytes);

/// Every layer must carry the same labels.
Bytes encode_activations(const ActivationSet& acts);
ActivationSet decode_activations(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

inline void write_dataset(const std::filesystem::path& p, const Dataset& d) {
  write_file_atomic(p, encode_dataset(d));
}
inline Dataset read_dataset(const std::filesystem::path& p) { return decode_dataset(read_file(p)); }

inline void write_model(const std::filesystem::path& p, const MlpModel& m) {
  write_file_atomic(p, encode_model(m));
}
inline MlpModel read_model(const std::filesystem::path& p) { return decode_model(read_file(p)); }

inline void write_activations(const std::filesystem::path& p, const ActivationSet& a) {
  write_file_atomic(p, encode_activations(a));
}
inline ActivationSet read_activations(const std::filesystem::path& p) {
  return decode_activations(read_file(p));
}

}  // namespace gpz

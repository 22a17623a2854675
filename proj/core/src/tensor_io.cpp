#include "gpz/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include "gpz/error.hpp"

namespace gpz {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

class Writer {
 public:
  void magic(const char (&m)[5]) { out_.insert(out_.end(), m, m + 4); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::size_t v) {
    if (v > 0xFFFFFFFFu) throw InvalidArgument("value does not fit in u32");
    const std::uint32_t le = to_le(static_cast<std::uint32_t>(v));
    const auto* p = reinterpret_cast<const std::uint8_t*>(&le);
    out_.insert(out_.end(), p, p + 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::size_t offset() const { return pos_; }

  void magic(const char (&m)[5]) {
    need("magic", 4);
    if (std::memcmp(b_.data(), m, 4) != 0) {
      throw FormatError("magic", 0, std::string("expected \"") + m + "\"");
    }
    pos_ = 4;
  }
  std::uint8_t u8(const std::string& field) {
    need(field, 1);
    return b_[pos_++];
  }
  std::uint32_t u32(const std::string& field) {
    need(field, 4);
    std::uint32_t v;
    std::memcpy(&v, b_.data() + pos_, 4);
    pos_ += 4;
    return to_le(v);
  }
  float f32(const std::string& field) {
    const std::size_t at = pos_;
    const float v = std::bit_cast<float>(u32(field));
    if (!std::isfinite(v)) throw FormatError(field, at, "non-finite value");
    return v;
  }
  std::string str(const std::string& field, std::size_t n) {
    need(field, n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void version() {
    const std::size_t at = pos_;
    const auto v = u32("version");
    if (v != kFormatVersion) {
      throw FormatError("version", at, "unsupported version " + std::to_string(v));
    }
  }
  // Guards an array length against the bytes that remain before allocating.
  void fits(const std::string& field, std::uint64_t count, std::size_t elem) {
    if (count * elem > b_.size() - pos_) {
      throw FormatError(field, pos_, "declared length exceeds remaining " +
                                         std::to_string(b_.size() - pos_) + " bytes");
    }
  }
  void end() {
    if (pos_ != b_.size()) {
      throw FormatError("end", pos_, std::to_string(b_.size() - pos_) + " trailing bytes");
    }
  }

 private:
  void need(const std::string& field, std::size_t n) {
    if (b_.size() - pos_ < n) throw FormatError(field, pos_, "truncated input");
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::vector<std::uint32_t> read_labels(Reader& r, std::uint32_t count, std::uint32_t k) {
  r.fits("labels", count, 4);
  std::vector<std::uint32_t> labels(count);
  for (auto& y : labels) {
    const std::size_t at = r.offset();
    y = r.u32("labels");
    if (y >= k) throw FormatError("labels", at, "label >= class count");
  }
  return labels;
}

std::vector<float> read_floats(Reader& r, const std::string& field, std::uint64_t count) {
  r.fits(field, count, 4);
  std::vector<float> v(count);
  for (auto& x : v) x = r.f32(field);
  return v;
}

}  // namespace

Bytes encode_dataset(const Dataset& data) {
  data.validate();
  Writer w;
  w.magic("GPZD");
  w.u32(kFormatVersion);
  w.u32(data.size());
  w.u32(data.dim);
  w.u32(data.num_classes);
  for (auto y : data.labels) w.u32(y);
  for (auto x : data.inputs) w.f32(x);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("GPZD");
  r.version();
  Dataset d;
  const auto b = r.u32("sample_count");
  const std::size_t dim_at = r.offset();
  d.dim = r.u32("dim");
  if (d.dim == 0) throw FormatError("dim", dim_at, "zero input dimension");
  const std::size_t k_at = r.offset();
  d.num_classes = r.u32("class_count");
  if (d.num_classes == 0) throw FormatError("class_count", k_at, "zero classes");
  d.labels = read_labels(r, b, static_cast<std::uint32_t>(d.num_classes));
  const std::size_t data_at = r.offset();
  d.inputs = read_floats(r, "data", static_cast<std::uint64_t>(b) * d.dim);
  r.end();
  try {
    d.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError("data", data_at, e.what());
  }
  return d;
}

Bytes encode_model(const MlpModel& model) {
  model.validate();
  Writer w;
  w.magic("GPZM");
  w.u32(kFormatVersion);
  w.u32(model.num_layers());
  w.u32(model.split_index);
  for (const auto& l : model.layers) {
    w.u32(l.in);
    w.u32(l.out);
    w.u8(static_cast<std::uint8_t>(l.activation));
    for (auto v : l.weights) w.f32(v);
    for (auto v : l.bias) w.f32(v);
  }
  return w.take();
}

MlpModel decode_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("GPZM");
  r.version();
  MlpModel m;
  const std::size_t count_at = r.offset();
  const auto count = r.u32("layer_count");
  if (count == 0) throw FormatError("layer_count", count_at, "model has no layers");
  r.fits("layers", count, 9);
  const std::size_t split_at = r.offset();
  m.split_index = r.u32("split_index");
  if (m.split_index > count) throw FormatError("split_index", split_at, "split beyond last layer");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string p = "layer[" + std::to_string(i) + "].";
    DenseLayer l;
    const std::size_t in_at = r.offset();
    l.in = r.u32(p + "in");
    if (l.in == 0) throw FormatError(p + "in", in_at, "zero width");
    if (i > 0 && l.in != m.layers.back().out) {
      throw FormatError(p + "in", in_at, "does not chain with the previous layer");
    }
    const std::size_t out_at = r.offset();
    l.out = r.u32(p + "out");
    if (l.out == 0) throw FormatError(p + "out", out_at, "zero width");
    const std::size_t act_at = r.offset();
    const auto act = r.u8(p + "activation");
    if (act > 1) throw FormatError(p + "activation", act_at, "unknown activation code");
    l.activation = static_cast<Activation>(act);
    l.weights = read_floats(r, p + "weights", static_cast<std::uint64_t>(l.in) * l.out);
    l.bias = read_floats(r, p + "bias", l.out);
    m.layers.push_back(std::move(l));
  }
  r.end();
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError("layers", count_at, e.what());
  }
  return m;
}

Bytes encode_activations(const ActivationSet& acts) {
  acts.validate();
  if (acts.layers.empty()) throw InvalidArgument("activation dump needs at least one layer");
  const auto& labels = acts.layers.front().labels;
  for (const auto& b : acts.layers) {
    if (b.labels != labels) throw InvalidArgument("activation dump layers carry different labels");
  }
  Writer w;
  w.magic("GPZA");
  w.u32(kFormatVersion);
  w.u32(acts.layers.size());
  w.u32(labels.size());
  w.u32(acts.num_classes);
  for (auto y : labels) w.u32(y);
  for (const auto& b : acts.layers) {
    w.u32(b.layer_name.size());
    w.str(b.layer_name);
    w.u32(b.shape.size());
    for (auto s : b.shape) w.u32(s);
    w.u32(b.d);
    for (auto v : b.data) w.f32(v);
  }
  return w.take();
}

ActivationSet decode_activations(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("GPZA");
  r.version();
  ActivationSet set;
  const std::size_t count_at = r.offset();
  const auto count = r.u32("layer_count");
  if (count == 0) throw FormatError("layer_count", count_at, "dump has no layers");
  const auto b = r.u32("sample_count");
  const std::size_t k_at = r.offset();
  set.num_classes = r.u32("class_count");
  if (set.num_classes == 0) throw FormatError("class_count", k_at, "zero classes");
  const auto labels = read_labels(r, b, static_cast<std::uint32_t>(set.num_classes));
  r.fits("layers", count, 12);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string p = "layer[" + std::to_string(i) + "].";
    ActivationBatch a;
    const auto name_len = r.u32(p + "name_len");
    a.layer_name = r.str(p + "name", name_len);
    const auto rank = r.u32(p + "rank");
    r.fits(p + "shape", rank, 4);
    std::uint64_t product = 1;
    for (std::uint32_t s = 0; s < rank; ++s) {
      a.shape.push_back(r.u32(p + "shape"));
      product *= a.shape.back();
    }
    const std::size_t d_at = r.offset();
    a.d = r.u32(p + "d");
    if (a.d == 0 || a.d != product) throw FormatError(p + "d", d_at, "d != product(shape)");
    a.data = read_floats(r, p + "data", static_cast<std::uint64_t>(b) * a.d);
    a.labels = labels;
    set.layers.push_back(std::move(a));
  }
  r.end();
  return set;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("read failed for '" + path.string() + "'");
  return b;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot rename onto '" + path.string() + "'");
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace gpz

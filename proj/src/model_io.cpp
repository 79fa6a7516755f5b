#include "tnnsim/model_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "tnnsim/errors.hpp"

namespace tnnsim {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'N', '1'};

enum class Tag : std::uint8_t { Conv = 1, Dense = 2, MaxPool = 3, BatchNorm = 4, Activation = 5 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void size(std::size_t v) {
    if (v > 0xffffffffu) throw DomainError("model: dimension exceeds 32 bits");
    u32(static_cast<std::uint32_t>(v));
  }
  void i32s(const std::vector<std::int32_t>& v) {
    for (std::int32_t x : v) i32(x);
  }
  void bytes(const std::vector<std::uint8_t>& v) { out_.insert(out_.end(), v.begin(), v.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (in_.size() - pos_ < n) throw FormatError("model: unexpected end of data", pos_);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto s = take(4);
    return static_cast<std::uint32_t>(s[0]) | static_cast<std::uint32_t>(s[1]) << 8 |
           static_cast<std::uint32_t>(s[2]) << 16 | static_cast<std::uint32_t>(s[3]) << 24;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  /// Dimension, bounded so that products stay well inside size_t.
  std::size_t dim() {
    const std::size_t at = pos_;
    const std::uint32_t v = u32();
    if (v == 0 || v > (1u << 24)) throw FormatError("model: dimension out of range", at);
    return v;
  }
  std::vector<std::int32_t> i32s(std::size_t n) {
    if ((in_.size() - pos_) / 4 < n) throw FormatError("model: unexpected end of data", pos_);
    std::vector<std::int32_t> v(n);
    for (auto& x : v) x = i32();
    return v;
  }
  TernaryTensor weights(std::vector<std::size_t> shape) {
    const std::size_t n = shape_product(shape);
    const std::size_t at = pos_;
    auto codes = take((n + 3) / 4);
    try {
      return TernaryTensor::from_codes(std::move(shape), codes);
    } catch (const DomainError& e) {
      throw FormatError(std::string("model: ") + e.what(), at);
    }
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const NetworkModel& model) {
  model.validate();
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.size(model.layers.size());
  w.size(model.input.channels);
  w.size(model.input.height);
  w.size(model.input.width);
  for (const Layer& layer : model.layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(Tag::Conv));
      w.size(conv->in_c);
      w.size(conv->out_c);
      w.bytes(conv->weights.to_codes());
      w.i32s(conv->bias_q);
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(Tag::Dense));
      w.size(dense->in);
      w.size(dense->out);
      w.bytes(dense->weights.to_codes());
      w.i32s(dense->bias_q);
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      w.u8(static_cast<std::uint8_t>(Tag::MaxPool));
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(Tag::BatchNorm));
      w.size(bn->channels);
      w.u8(bn->shift);
      w.i32s(bn->gamma_q);
      w.i32s(bn->beta_q);
      w.i32s(bn->mean_q);
      w.i32s(bn->std_q);
    } else if (const auto* act = std::get_if<ActivationLayer>(&layer)) {
      w.u8(static_cast<std::uint8_t>(Tag::Activation));
      w.u8(static_cast<std::uint8_t>(act->kind));
      w.i32(act->delta_q);
      w.size(act->thresholds.size());
      for (const FoldedThreshold& t : act->thresholds) {
        w.i32(t.hi);
        w.i32(t.lo);
        w.u8(t.flip ? 1 : 0);
      }
    }
  }
  return w.take();
}

NetworkModel parse_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("model: bad magic", 0);
  NetworkModel m;
  const std::size_t count_at = r.pos();
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 4096) throw FormatError("model: layer count out of range", count_at);
  m.input.channels = r.dim();
  m.input.height = r.dim();
  m.input.width = r.dim();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    switch (static_cast<Tag>(r.u8())) {
      case Tag::Conv: {
        ConvLayer c;
        c.in_c = r.dim();
        c.out_c = r.dim();
        c.weights = r.weights({c.out_c, c.in_c, 3, 3});
        c.bias_q = r.i32s(c.out_c);
        m.layers.emplace_back(std::move(c));
        break;
      }
      case Tag::Dense: {
        DenseLayer d;
        d.in = r.dim();
        d.out = r.dim();
        d.weights = r.weights({d.out, d.in});
        d.bias_q = r.i32s(d.out);
        m.layers.emplace_back(std::move(d));
        break;
      }
      case Tag::MaxPool:
        m.layers.emplace_back(MaxPoolLayer{});
        break;
      case Tag::BatchNorm: {
        BatchNormLayer b;
        b.channels = r.dim();
        b.shift = r.u8();
        b.gamma_q = r.i32s(b.channels);
        b.beta_q = r.i32s(b.channels);
        b.mean_q = r.i32s(b.channels);
        b.std_q = r.i32s(b.channels);
        m.layers.emplace_back(std::move(b));
        break;
      }
      case Tag::Activation: {
        ActivationLayer a;
        const std::size_t kind_at = r.pos();
        const std::uint8_t kind = r.u8();
        if (kind != static_cast<std::uint8_t>(ActivationKind::Sign) &&
            kind != static_cast<std::uint8_t>(ActivationKind::Phi))
          throw FormatError("model: unknown activation kind " + std::to_string(kind), kind_at);
        a.kind = static_cast<ActivationKind>(kind);
        a.delta_q = r.i32();
        const std::size_t n = r.dim();
        for (std::size_t c = 0; c < n; ++c) {
          FoldedThreshold t;
          t.hi = r.i32();
          t.lo = r.i32();
          const std::size_t flip_at = r.pos();
          const std::uint8_t flip = r.u8();
          if (flip > 1) throw FormatError("model: flip flag must be 0 or 1", flip_at);
          t.flip = flip == 1;
          a.thresholds.push_back(t);
        }
        m.layers.emplace_back(std::move(a));
        break;
      }
      default:
        throw FormatError("model: unknown layer tag", at);
    }
  }
  if (!r.done()) throw FormatError("model: trailing bytes", r.pos());
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw FormatError(e.what(), r.pos());
  }
  NetworkModel refolded = m;
  refolded.fold_thresholds();
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (const auto* act = std::get_if<ActivationLayer>(&m.layers[i])) {
      if (act->thresholds != std::get<ActivationLayer>(refolded.layers[i]).thresholds)
        throw FormatError("model: thresholds of layer " + std::to_string(i) +
                              " do not match its bias and batchnorm parameters",
                          r.pos());
    }
  }
  return m;
}

void save_model(const NetworkModel& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

NetworkModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_model(bytes);
}

}  // namespace tnnsim

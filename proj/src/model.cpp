#include "tnnsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>

#include "tnnsim/errors.hpp"

namespace tnnsim {

namespace {

std::int32_t to_fixed(double v, const char* what) {
  const double q = std::round(v * kFixedOne);
  if (!(std::abs(q) <= std::numeric_limits<std::int32_t>::max()))
    throw DomainError(std::string("fixed point overflow in ") + what);
  return static_cast<std::int32_t>(q);
}

enum class Flow { Pixels, Pre, Ternary };

struct Shape {
  std::size_t c, h, w;
  Flow flow;
};

/// Calls visit(index, layer, input shape, producer index, batchnorm index) for
/// every layer after checking it against the running shape. Activation
/// threshold counts are only checked when `check_thresholds` is set.
template <typename Visit>
Shape walk(const NetworkModel& m, Visit&& visit, bool check_thresholds = true) {
  if (m.layers.empty()) throw DomainError("model: no layers");
  if (m.input.size() == 0) throw DomainError("model: empty input spec");
  Shape s{m.input.channels, m.input.height, m.input.width, Flow::Pixels};
  std::optional<std::size_t> producer;
  std::optional<std::size_t> bn;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const std::string where = "model: layer " + std::to_string(i) + ": ";
    const Layer& layer = m.layers[i];
    const Shape in = s;
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      if (s.flow == Flow::Pre) throw DomainError(where + "conv needs pixel or activation input");
      if (conv->weights.shape() != std::vector<std::size_t>{conv->out_c, conv->in_c, 3, 3})
        throw DomainError(where + "conv weights must be [out, in, 3, 3]");
      if (conv->in_c != s.c) throw DomainError(where + "conv input channels do not match");
      if (conv->bias_q.size() != conv->out_c) throw DomainError(where + "conv bias size");
      s = {conv->out_c, s.h, s.w, Flow::Pre};
      producer = i;
      bn.reset();
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      if (s.flow == Flow::Pre) throw DomainError(where + "dense needs pixel or activation input");
      if (dense->weights.shape() != std::vector<std::size_t>{dense->out, dense->in})
        throw DomainError(where + "dense weights must be [out, in]");
      if (dense->in != s.c * s.h * s.w) throw DomainError(where + "dense input size does not match");
      if (dense->bias_q.size() != dense->out) throw DomainError(where + "dense bias size");
      s = {dense->out, 1, 1, Flow::Pre};
      producer = i;
      bn.reset();
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      if (s.flow != Flow::Pre) throw DomainError(where + "max pool needs pre-activations");
      if (bn) throw DomainError(where + "max pool must precede batchnorm");
      if (s.h < 2 || s.w < 2) throw DomainError(where + "max pool input smaller than 2x2");
      s.h /= 2;
      s.w /= 2;
    } else if (const auto* b = std::get_if<BatchNormLayer>(&layer)) {
      if (s.flow != Flow::Pre) throw DomainError(where + "batchnorm needs pre-activations");
      if (bn) throw DomainError(where + "consecutive batchnorm layers");
      if (b->channels != s.c || b->gamma_q.size() != s.c || b->beta_q.size() != s.c ||
          b->mean_q.size() != s.c || b->std_q.size() != s.c)
        throw DomainError(where + "batchnorm channel count does not match");
      if (b->shift > 30) throw DomainError(where + "batchnorm shift above 30");
      for (std::int32_t v : b->std_q)
        if (v <= 0) throw DomainError(where + "batchnorm std must be > 0");
      bn = i;
    } else if (const auto* act = std::get_if<ActivationLayer>(&layer)) {
      if (s.flow != Flow::Pre) throw DomainError(where + "activation needs pre-activations");
      if (act->kind != ActivationKind::Sign && act->kind != ActivationKind::Phi)
        throw DomainError(where + "activation kind must be sign or phi");
      if (act->delta_q < 0) throw DomainError(where + "activation delta must be >= 0");
      if (check_thresholds && act->thresholds.size() != s.c) throw DomainError(where + "threshold count does not match");
      s.flow = Flow::Ternary;
    }
    visit(i, layer, in, producer, bn);
  }
  if (!std::holds_alternative<DenseLayer>(m.layers.back()))
    throw DomainError("model: last layer must be dense");
  return s;
}

// Packed weight layouts used by the engine.

struct ConvPix {
  std::size_t in_c, out_c, h, w;
  std::vector<std::int8_t> weights;  // [out][in][9]
};

struct ConvTern {
  std::size_t in_c, out_c, h, w, wc;
  std::vector<std::uint64_t> plus, minus;  // [out][9][wc], bit c of word block
};

struct DensePix {
  std::size_t in, out;
  std::vector<std::int8_t> weights;  // [out][in]
};

struct DenseTern {
  std::size_t in, out, wr;
  std::vector<std::uint64_t> plus, minus;  // [out][wr]
};

struct Pool {
  std::size_t c, h, w;
};

struct Act {
  std::size_t c, hw;
  std::vector<FoldedThreshold> thresholds;
};

struct Logits {
  std::vector<std::int32_t> bias_q;
};

using Op = std::variant<ConvPix, ConvTern, DensePix, DenseTern, Pool, Act, Logits>;

ConvPix pack_conv_pix(const TernaryTensor& wt, std::size_t h, std::size_t w) {
  const auto& sh = wt.shape();
  ConvPix op{sh[1], sh[0], h, w, {}};
  const std::vector<std::int8_t> v = wt.values();
  op.weights.assign(v.begin(), v.end());
  return op;
}

ConvTern pack_conv_tern(const TernaryTensor& wt, std::size_t h, std::size_t w) {
  const auto& sh = wt.shape();
  ConvTern op{sh[1], sh[0], h, w, BitPlanes::words_for(sh[1]), {}, {}};
  op.plus.assign(op.out_c * 9 * op.wc, 0);
  op.minus.assign(op.out_c * 9 * op.wc, 0);
  for (std::size_t o = 0; o < op.out_c; ++o)
    for (std::size_t c = 0; c < op.in_c; ++c)
      for (std::size_t k = 0; k < 9; ++k) {
        const int v = wt.get((o * op.in_c + c) * 9 + k);
        if (v == 0) continue;
        const std::size_t word = (o * 9 + k) * op.wc + c / 64;
        const std::uint64_t bit = std::uint64_t{1} << (c % 64);
        (v > 0 ? op.plus : op.minus)[word] |= bit;
      }
  return op;
}

DensePix pack_dense_pix(const TernaryTensor& wt) {
  DensePix op{wt.shape()[1], wt.shape()[0], {}};
  const std::vector<std::int8_t> v = wt.values();
  op.weights.assign(v.begin(), v.end());
  return op;
}

DenseTern pack_dense_tern(const TernaryTensor& wt) {
  DenseTern op{wt.shape()[1], wt.shape()[0], BitPlanes::words_for(wt.shape()[1]), {}, {}};
  op.plus.assign(op.out * op.wr, 0);
  op.minus.assign(op.out * op.wr, 0);
  for (std::size_t o = 0; o < op.out; ++o)
    for (std::size_t i = 0; i < op.in; ++i) {
      const int v = wt.get(o * op.in + i);
      if (v == 0) continue;
      (v > 0 ? op.plus : op.minus)[o * op.wr + i / 64] |= std::uint64_t{1} << (i % 64);
    }
  return op;
}

void run(const ConvPix& op, const std::uint8_t* in, std::int32_t* out) {
  const std::size_t h = op.h, w = op.w, hw = h * w;
  std::fill(out, out + op.out_c * hw, 0);
  for (std::size_t o = 0; o < op.out_c; ++o) {
    std::int32_t* dst = out + o * hw;
    for (std::size_t c = 0; c < op.in_c; ++c) {
      const std::uint8_t* src = in + c * hw;
      for (std::size_t k = 0; k < 9; ++k) {
        const std::int32_t wv = op.weights[(o * op.in_c + c) * 9 + k];
        if (wv == 0) continue;
        const long dy = static_cast<long>(k / 3) - 1;
        const long dx = static_cast<long>(k % 3) - 1;
        const std::size_t x0 = dx < 0 ? 1 : 0;
        const std::size_t x1 = dx > 0 ? w - 1 : w;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const std::uint8_t* row = src + static_cast<std::size_t>(sy) * w;
          std::int32_t* drow = dst + y * w;
          for (std::size_t x = x0; x < x1; ++x) drow[x] += wv * row[static_cast<long>(x) + dx];
        }
      }
    }
  }
}

/// `packed` holds the input as per-pixel channel planes: [pixel][wc] words.
void run(const ConvTern& op, const std::uint64_t* pp, const std::uint64_t* pm, std::int32_t* out) {
  const long h = static_cast<long>(op.h), w = static_cast<long>(op.w);
  const std::size_t hw = op.h * op.w, wc = op.wc;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      for (std::size_t o = 0; o < op.out_c; ++o) {
        std::int64_t acc = 0;
        for (std::size_t k = 0; k < 9; ++k) {
          const long sy = y + static_cast<long>(k / 3) - 1;
          const long sx = x + static_cast<long>(k % 3) - 1;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          const std::size_t p = static_cast<std::size_t>(sy * w + sx) * wc;
          const std::size_t q = (o * 9 + k) * wc;
          acc += gxnor_dot_words(op.plus.data() + q, op.minus.data() + q, pp + p, pm + p, wc);
        }
        out[o * hw + static_cast<std::size_t>(y * w + x)] = static_cast<std::int32_t>(acc);
      }
    }
}

void run(const DensePix& op, const std::uint8_t* in, std::int32_t* out) {
  for (std::size_t o = 0; o < op.out; ++o) {
    const std::int8_t* row = op.weights.data() + o * op.in;
    std::int32_t acc = 0;
    for (std::size_t i = 0; i < op.in; ++i) acc += static_cast<std::int32_t>(row[i]) * in[i];
    out[o] = acc;
  }
}

void run(const DenseTern& op, const std::uint64_t* xp, const std::uint64_t* xm, std::int32_t* out) {
  for (std::size_t o = 0; o < op.out; ++o)
    out[o] = static_cast<std::int32_t>(
        gxnor_dot_words(op.plus.data() + o * op.wr, op.minus.data() + o * op.wr, xp, xm, op.wr));
}

template <typename T>
void run_pool(std::size_t c, std::size_t h, std::size_t w, const T* in, T* out) {
  const std::size_t oh = h / 2, ow = w / 2;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const T* p = in + (ch * h + 2 * y) * w + 2 * x;
        out[(ch * oh + y) * ow + x] = std::max(std::max(p[0], p[1]), std::max(p[w], p[w + 1]));
      }
}

void pack_flat(const std::int8_t* v, std::size_t n, BitPlanes& planes) {
  planes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] == 0) continue;
    (v[i] > 0 ? planes.plus : planes.minus)[i / 64] |= std::uint64_t{1} << (i % 64);
  }
}

/// [c][pixel] -> [pixel][wc] channel planes.
void pack_pixel_major(const std::int8_t* v, std::size_t c, std::size_t hw, BitPlanes& planes) {
  const std::size_t wc = BitPlanes::words_for(c);
  planes.plus.assign(hw * wc, 0);
  planes.minus.assign(hw * wc, 0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < hw; ++p) {
      const std::int8_t x = v[ch * hw + p];
      if (x == 0) continue;
      (x > 0 ? planes.plus : planes.minus)[p * wc + ch / 64] |= std::uint64_t{1} << (ch % 64);
    }
}

class Engine {
 public:
  explicit Engine(const NetworkModel& m) : input_size_(m.input.size()) {
    const Shape final_shape = walk(m, [&](std::size_t i, const Layer& layer, const Shape& in,
                                          std::optional<std::size_t>, std::optional<std::size_t>) {
      const bool last = i + 1 == m.layers.size();
      if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
        if (in.flow == Flow::Pixels)
          ops_.emplace_back(pack_conv_pix(conv->weights, in.h, in.w));
        else
          ops_.emplace_back(pack_conv_tern(conv->weights, in.h, in.w));
      } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
        if (in.flow == Flow::Pixels)
          ops_.emplace_back(pack_dense_pix(dense->weights));
        else
          ops_.emplace_back(pack_dense_tern(dense->weights));
        if (last) ops_.emplace_back(Logits{dense->bias_q});
      } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
        ops_.emplace_back(Pool{in.c, in.h, in.w});
      } else if (const auto* act = std::get_if<ActivationLayer>(&layer)) {
        ops_.emplace_back(Act{in.c, in.h * in.w, act->thresholds});
      }
      max_buf_ = std::max(max_buf_, in.c * in.h * in.w);
    });
    classes_ = final_shape.c;
    max_buf_ = std::max(max_buf_, classes_);
  }

  std::size_t classes() const { return classes_; }

  void forward(const std::uint8_t* px, std::int64_t* logits, std::vector<std::int32_t>& a,
               std::vector<std::int32_t>& b, std::vector<std::int8_t>& t, BitPlanes& planes) const {
    a.resize(max_buf_);
    b.resize(max_buf_);
    t.resize(max_buf_);
    for (const Op& op : ops_) {
      if (const auto* o = std::get_if<ConvPix>(&op)) {
        run(*o, px, a.data());
      } else if (const auto* o = std::get_if<ConvTern>(&op)) {
        pack_pixel_major(t.data(), o->in_c, o->h * o->w, planes);
        run(*o, planes.plus.data(), planes.minus.data(), a.data());
      } else if (const auto* o = std::get_if<DensePix>(&op)) {
        run(*o, px, a.data());
      } else if (const auto* o = std::get_if<DenseTern>(&op)) {
        pack_flat(t.data(), o->in, planes);
        run(*o, planes.plus.data(), planes.minus.data(), a.data());
      } else if (const auto* o = std::get_if<Pool>(&op)) {
        run_pool(o->c, o->h, o->w, a.data(), b.data());
        std::swap(a, b);
      } else if (const auto* o = std::get_if<Act>(&op)) {
        for (std::size_t c = 0; c < o->c; ++c) {
          const FoldedThreshold& th = o->thresholds[c];
          for (std::size_t p = 0; p < o->hw; ++p)
            t[c * o->hw + p] = static_cast<std::int8_t>(th.apply(a[c * o->hw + p]));
        }
      } else if (const auto* o = std::get_if<Logits>(&op)) {
        for (std::size_t k = 0; k < o->bias_q.size(); ++k)
          logits[k] = static_cast<std::int64_t>(a[k]) * 65536 - o->bias_q[k];
      }
    }
  }

  std::size_t input_size() const { return input_size_; }

 private:
  std::vector<Op> ops_;
  std::size_t input_size_;
  std::size_t classes_ = 0;
  std::size_t max_buf_ = 0;
};

}  // namespace

BatchNormParams BatchNormLayer::params(std::size_t c) const {
  const double scale = std::ldexp(1.0, shift) / kFixedOne;
  BatchNormParams p;
  p.gamma = gamma_q.at(c) / kFixedOne;
  p.beta = beta_q.at(c) / kFixedOne;
  p.mean = mean_q.at(c) * scale;
  const double sd = std_q.at(c) * scale;
  p.var = sd * sd;
  p.eps = 0.0;
  return p;
}

BatchNormLayer BatchNormLayer::quantize(std::span<const BatchNormParams> per_channel) {
  BatchNormLayer b;
  b.channels = per_channel.size();
  double big = 0.0;
  for (const BatchNormParams& p : per_channel) {
    p.validate();
    big = std::max({big, std::abs(p.mean), p.stddev()});
  }
  const double limit = std::numeric_limits<std::int32_t>::max();
  while (b.shift < 30 && std::round(big * kFixedOne / std::ldexp(1.0, b.shift)) > limit) ++b.shift;
  const double scale = kFixedOne / std::ldexp(1.0, b.shift);
  for (const BatchNormParams& p : per_channel) {
    b.gamma_q.push_back(to_fixed(p.gamma, "batchnorm gamma"));
    b.beta_q.push_back(to_fixed(p.beta, "batchnorm beta"));
    b.mean_q.push_back(static_cast<std::int32_t>(std::round(p.mean * scale)));
    b.std_q.push_back(std::max<std::int32_t>(1, static_cast<std::int32_t>(std::round(p.stddev() * scale))));
  }
  return b;
}

void NetworkModel::validate() const {
  walk(*this, [](std::size_t, const Layer&, const Shape&, std::optional<std::size_t>,
                 std::optional<std::size_t>) {});
}

std::size_t NetworkModel::num_classes() const {
  return walk(*this, [](std::size_t, const Layer&, const Shape&, std::optional<std::size_t>,
                        std::optional<std::size_t>) {})
      .c;
}

void NetworkModel::fold_thresholds() {
  std::vector<std::vector<FoldedThreshold>> folded(layers.size());
  walk(*this, [&](std::size_t i, const Layer& layer, const Shape& in, std::optional<std::size_t> producer,
                  std::optional<std::size_t> bn) {
    const auto* act = std::get_if<ActivationLayer>(&layer);
    if (!act) return;
    const Layer& prod = layers[*producer];
    const std::vector<std::int32_t>& bias = std::holds_alternative<ConvLayer>(prod)
                                                ? std::get<ConvLayer>(prod).bias_q
                                                : std::get<DenseLayer>(prod).bias_q;
    for (std::size_t c = 0; c < in.c; ++c) {
      std::optional<BatchNormParams> p;
      if (bn) p = std::get<BatchNormLayer>(layers[*bn]).params(c);
      folded[i].push_back(fold_threshold(bias[c] / kFixedOne, p, act->kind, act->delta()));
    }
  }, false);
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (auto* act = std::get_if<ActivationLayer>(&layers[i])) act->thresholds = std::move(folded[i]);
}

bool NetworkModel::is_binary() const {
  for (const Layer& layer : layers) {
    if (const auto* act = std::get_if<ActivationLayer>(&layer)) {
      if (act->kind != ActivationKind::Sign) return false;
    } else if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      if (conv->weights.count_nonzero() != conv->weights.size()) return false;
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      if (dense->weights.count_nonzero() != dense->weights.size()) return false;
    }
  }
  return true;
}

InferenceResult infer(const NetworkModel& model, std::span<const std::uint8_t> pixels, std::size_t count,
                      unsigned threads) {
  const Engine engine(model);
  if (pixels.size() != count * engine.input_size())
    throw DomainError("infer: expected " + std::to_string(count * engine.input_size()) + " pixels, got " +
                      std::to_string(pixels.size()));
  InferenceResult res;
  res.num_classes = engine.classes();
  res.labels.assign(count, 0);
  res.logits.assign(count * res.num_classes, 0);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> a, b;
    std::vector<std::int8_t> t;
    BitPlanes planes;
    for (std::size_t i = begin; i < end; ++i) {
      std::int64_t* lg = res.logits.data() + i * res.num_classes;
      engine.forward(pixels.data() + i * engine.input_size(), lg, a, b, t, planes);
      res.labels[i] = static_cast<int>(std::max_element(lg, lg + res.num_classes) - lg);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (n_threads == 1) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + n_threads - 1) / n_threads;
    for (std::size_t k = 0; k < n_threads; ++k) {
      const std::size_t begin = k * chunk, end = std::min(count, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }
  return res;
}

double accuracy(const InferenceResult& result, std::span<const std::uint8_t> labels) {
  if (labels.size() != result.labels.size()) throw DomainError("accuracy: label count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += result.labels[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<std::int64_t> conv3x3_forward(const TernaryTensor& weights, const TernaryTensor& input,
                                          std::size_t h, std::size_t w) {
  const auto& sh = weights.shape();
  if (sh.size() != 4 || sh[2] != 3 || sh[3] != 3) throw DomainError("conv3x3: weights must be [out, in, 3, 3]");
  if (input.size() != sh[1] * h * w) throw DomainError("conv3x3: input size does not match");
  const ConvTern op = pack_conv_tern(weights, h, w);
  const std::vector<std::int8_t> v = input.values();
  BitPlanes planes;
  pack_pixel_major(v.data(), sh[1], h * w, planes);
  std::vector<std::int32_t> out(sh[0] * h * w);
  run(op, planes.plus.data(), planes.minus.data(), out.data());
  return {out.begin(), out.end()};
}

std::vector<std::int64_t> conv3x3_forward(const TernaryTensor& weights, std::span<const std::uint8_t> input,
                                          std::size_t h, std::size_t w) {
  const auto& sh = weights.shape();
  if (sh.size() != 4 || sh[2] != 3 || sh[3] != 3) throw DomainError("conv3x3: weights must be [out, in, 3, 3]");
  if (input.size() != sh[1] * h * w) throw DomainError("conv3x3: input size does not match");
  const ConvPix op = pack_conv_pix(weights, h, w);
  std::vector<std::int32_t> out(sh[0] * h * w);
  run(op, input.data(), out.data());
  return {out.begin(), out.end()};
}

std::vector<std::int64_t> dense_forward(const TernaryTensor& weights, const TernaryTensor& input) {
  const auto& sh = weights.shape();
  if (sh.size() != 2) throw DomainError("dense: weights must be [out, in]");
  if (input.size() != sh[1]) throw DomainError("dense: input size does not match");
  const DenseTern op = pack_dense_tern(weights);
  std::vector<std::int32_t> out(sh[0]);
  run(op, input.planes().plus.data(), input.planes().minus.data(), out.data());
  return {out.begin(), out.end()};
}

std::vector<std::int64_t> maxpool2_forward(std::span<const std::int64_t> input, std::size_t c, std::size_t h,
                                           std::size_t w) {
  if (input.size() != c * h * w) throw DomainError("maxpool2: input size does not match");
  if (h < 2 || w < 2) throw DomainError("maxpool2: input smaller than 2x2");
  std::vector<std::int64_t> out(c * (h / 2) * (w / 2));
  run_pool(c, h, w, input.data(), out.data());
  return out;
}

}  // namespace tnnsim

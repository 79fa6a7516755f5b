#include "tnnsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "tnnsim/errors.hpp"
#include "tnnsim/random.hpp"

namespace tnnsim::train {

std::vector<ArchLayer> parse_arch(const std::string& arch) {
  std::vector<ArchLayer> out;
  std::stringstream ss(arch);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char ch) { return std::isspace(ch); }),
              tok.end());
    if (tok == "p") {
      out.push_back({ArchLayer::Kind::Pool, 0});
      continue;
    }
    if (tok.size() < 2 || (tok[0] != 'c' && tok[0] != 'd'))
      throw ConfigError("arch: bad token '" + tok + "' in '" + arch + "'");
    std::size_t units = 0;
    try {
      std::size_t used = 0;
      units = std::stoul(tok.substr(1), &used);
      if (used != tok.size() - 1) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("arch: bad unit count in '" + tok + "'");
    }
    if (units == 0) throw ConfigError("arch: zero units in '" + tok + "'");
    out.push_back({tok[0] == 'c' ? ArchLayer::Kind::Conv : ArchLayer::Kind::Dense, units});
  }
  if (out.empty()) throw ConfigError("arch: empty description");
  if (out.back().kind != ArchLayer::Kind::Dense) throw ConfigError("arch: last layer must be dense");
  return out;
}

enum class LayerKind { Conv, Dense, Pool, BatchNorm, Act, Output };

template <typename T>
struct LayerBase {
  virtual ~LayerBase() = default;
  virtual LayerKind kind() const = 0;
  virtual Mat<T> forward(const Mat<T>& x, bool training, const QuantConfig& q) = 0;
  virtual Mat<T> backward(const Mat<T>& dy, bool need_dx) = 0;
  virtual void collect(std::vector<typename Network<T>::Param>&, const std::string&) {}
  /// Non-trainable state saved in checkpoints.
  virtual void state(std::vector<std::vector<T>*>&) {}
};

namespace {

template <typename T>
T quantize_weight(T w, const QuantConfig& q) {
  if (q.surrogate) return std::clamp(w, T(-1), T(1));
  return q.mode == Mode::TNN ? T(ternarize(static_cast<double>(w), q.weight_delta))
                             : T(binarize(static_cast<double>(w)));
}

template <typename T>
void init_uniform(Mat<T>& w, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<T>(u(rng));
}

template <typename T>
std::int8_t ternary_of(T q) {
  return static_cast<std::int8_t>(q > T(0) ? 1 : (q < T(0) ? -1 : 0));
}

template <typename T>
struct DenseL : LayerBase<T> {
  Mat<T> w, g, x, wq;

  DenseL(std::size_t in, std::size_t out, Rng& rng) : w(out, in), g(Mat<T>::Zero(out, in)) {
    init_uniform(w, std::min(1.0, std::sqrt(6.0 / static_cast<double>(in + out))), rng);
  }
  LayerKind kind() const override { return LayerKind::Dense; }
  Mat<T> forward(const Mat<T>& in, bool, const QuantConfig& q) override {
    x = in;
    wq = w.unaryExpr([&](T v) { return quantize_weight(v, q); });
    return wq * x;
  }
  Mat<T> backward(const Mat<T>& dy, bool need_dx) override {
    g.noalias() = dy * x.transpose();
    if (!need_dx) return {};
    return wq.transpose() * dy;
  }
  void collect(std::vector<typename Network<T>::Param>& ps, const std::string& p) override {
    ps.push_back({p + "weight", w.data(), g.data(), static_cast<std::size_t>(w.size()), true});
  }
};

template <typename T>
struct OutputL : LayerBase<T> {
  Mat<T> w, g, x, wq;
  Eigen::Matrix<T, Eigen::Dynamic, 1> b, gb;
  T alpha;

  OutputL(std::size_t in, std::size_t out, Rng& rng)
      : w(out, in), g(Mat<T>::Zero(out, in)), b(Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(out)),
        gb(Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(out)), alpha(T(0.5) / std::sqrt(T(in))) {
    init_uniform(w, std::min(1.0, std::sqrt(6.0 / static_cast<double>(in + out))), rng);
  }
  LayerKind kind() const override { return LayerKind::Output; }
  Mat<T> forward(const Mat<T>& in, bool, const QuantConfig& q) override {
    x = in;
    wq = w.unaryExpr([&](T v) { return quantize_weight(v, q); });
    Mat<T> y = wq * x;
    y.colwise() -= b;
    return alpha * y;
  }
  Mat<T> backward(const Mat<T>& dy, bool need_dx) override {
    const Mat<T> dd = alpha * dy;
    g.noalias() = dd * x.transpose();
    gb = -dd.rowwise().sum();
    if (!need_dx) return {};
    return wq.transpose() * dd;
  }
  void collect(std::vector<typename Network<T>::Param>& ps, const std::string& p) override {
    ps.push_back({p + "weight", w.data(), g.data(), static_cast<std::size_t>(w.size()), true});
    ps.push_back({p + "bias", b.data(), gb.data(), static_cast<std::size_t>(b.size()), false});
  }
};

template <typename T>
struct ConvL : LayerBase<T> {
  std::size_t in_c, out_c, h, wd;
  Mat<T> w, g, wq, col;  // col: (B*HW) x (in_c*9)

  ConvL(std::size_t in, std::size_t out, std::size_t height, std::size_t width, Rng& rng)
      : in_c(in), out_c(out), h(height), wd(width), w(out, in * 9), g(Mat<T>::Zero(out, in * 9)) {
    init_uniform(w, std::min(1.0, std::sqrt(6.0 / static_cast<double>(9 * (in + out)))), rng);
  }
  LayerKind kind() const override { return LayerKind::Conv; }

  Mat<T> forward(const Mat<T>& x, bool, const QuantConfig& q) override {
    const std::size_t hw = h * wd;
    const Eigen::Index n = x.cols();
    col.setZero(static_cast<Eigen::Index>(hw) * n, static_cast<Eigen::Index>(in_c * 9));
    for (std::size_t c = 0; c < in_c; ++c)
      for (std::size_t k = 0; k < 9; ++k) {
        const long dy = static_cast<long>(k / 3) - 1, dx = static_cast<long>(k % 3) - 1;
        auto dst = col.col(static_cast<Eigen::Index>(c * 9 + k));
        for (Eigen::Index b = 0; b < n; ++b)
          for (long y = 0; y < static_cast<long>(h); ++y) {
            const long sy = y + dy;
            if (sy < 0 || sy >= static_cast<long>(h)) continue;
            for (long xx = 0; xx < static_cast<long>(wd); ++xx) {
              const long sx = xx + dx;
              if (sx < 0 || sx >= static_cast<long>(wd)) continue;
              dst(b * static_cast<Eigen::Index>(hw) + y * static_cast<long>(wd) + xx) =
                  x(static_cast<Eigen::Index>(c * hw) + sy * static_cast<long>(wd) + sx, b);
            }
          }
      }
    wq = w.unaryExpr([&](T v) { return quantize_weight(v, q); });
    const Mat<T> yt = col * wq.transpose();
    Mat<T> out(static_cast<Eigen::Index>(out_c * hw), n);
    for (Eigen::Index b = 0; b < n; ++b)
      for (std::size_t o = 0; o < out_c; ++o)
        out.col(b).segment(static_cast<Eigen::Index>(o * hw), static_cast<Eigen::Index>(hw)) =
            yt.col(static_cast<Eigen::Index>(o)).segment(b * static_cast<Eigen::Index>(hw),
                                                         static_cast<Eigen::Index>(hw));
    return out;
  }

  Mat<T> backward(const Mat<T>& dy, bool need_dx) override {
    const std::size_t hw = h * wd;
    const Eigen::Index n = dy.cols();
    Mat<T> dyt(static_cast<Eigen::Index>(hw) * n, static_cast<Eigen::Index>(out_c));
    for (Eigen::Index b = 0; b < n; ++b)
      for (std::size_t o = 0; o < out_c; ++o)
        dyt.col(static_cast<Eigen::Index>(o)).segment(b * static_cast<Eigen::Index>(hw),
                                                      static_cast<Eigen::Index>(hw)) =
            dy.col(b).segment(static_cast<Eigen::Index>(o * hw), static_cast<Eigen::Index>(hw));
    g.noalias() = dyt.transpose() * col;
    if (!need_dx) return {};
    const Mat<T> dcol = dyt * wq;
    Mat<T> dx = Mat<T>::Zero(static_cast<Eigen::Index>(in_c * hw), n);
    for (std::size_t c = 0; c < in_c; ++c)
      for (std::size_t k = 0; k < 9; ++k) {
        const long ky = static_cast<long>(k / 3) - 1, kx = static_cast<long>(k % 3) - 1;
        auto src = dcol.col(static_cast<Eigen::Index>(c * 9 + k));
        for (Eigen::Index b = 0; b < n; ++b)
          for (long y = 0; y < static_cast<long>(h); ++y) {
            const long sy = y + ky;
            if (sy < 0 || sy >= static_cast<long>(h)) continue;
            for (long xx = 0; xx < static_cast<long>(wd); ++xx) {
              const long sx = xx + kx;
              if (sx < 0 || sx >= static_cast<long>(wd)) continue;
              dx(static_cast<Eigen::Index>(c * hw) + sy * static_cast<long>(wd) + sx, b) +=
                  src(b * static_cast<Eigen::Index>(hw) + y * static_cast<long>(wd) + xx);
            }
          }
      }
    return dx;
  }
  void collect(std::vector<typename Network<T>::Param>& ps, const std::string& p) override {
    ps.push_back({p + "weight", w.data(), g.data(), static_cast<std::size_t>(w.size()), true});
  }
};

template <typename T>
struct PoolL : LayerBase<T> {
  std::size_t c, h, wd;
  std::vector<Eigen::Index> arg;  // per output element (column-major), source row
  Eigen::Index in_rows = 0;

  PoolL(std::size_t ch, std::size_t height, std::size_t width) : c(ch), h(height), wd(width) {}
  LayerKind kind() const override { return LayerKind::Pool; }
  Mat<T> forward(const Mat<T>& x, bool, const QuantConfig&) override {
    const std::size_t oh = h / 2, ow = wd / 2;
    const Eigen::Index rows = static_cast<Eigen::Index>(c * oh * ow);
    Mat<T> out(rows, x.cols());
    arg.resize(static_cast<std::size_t>(rows * x.cols()));
    in_rows = x.rows();
    for (Eigen::Index b = 0; b < x.cols(); ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const Eigen::Index base = static_cast<Eigen::Index>((ch * h + 2 * y) * wd + 2 * xx);
            Eigen::Index best = base;
            for (Eigen::Index cand : {base + 1, base + static_cast<Eigen::Index>(wd),
                                      base + static_cast<Eigen::Index>(wd) + 1})
              if (x(cand, b) > x(best, b)) best = cand;
            const Eigen::Index r = static_cast<Eigen::Index>((ch * oh + y) * ow + xx);
            out(r, b) = x(best, b);
            arg[static_cast<std::size_t>(b * rows + r)] = best;
          }
    return out;
  }
  Mat<T> backward(const Mat<T>& dy, bool) override {
    Mat<T> dx = Mat<T>::Zero(in_rows, dy.cols());
    for (Eigen::Index b = 0; b < dy.cols(); ++b)
      for (Eigen::Index r = 0; r < dy.rows(); ++r)
        dx(arg[static_cast<std::size_t>(b * dy.rows() + r)], b) += dy(r, b);
    return dx;
  }
};

template <typename T>
struct BatchNormL : LayerBase<T> {
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;
  std::size_t c, s;
  std::vector<T> gamma, beta, ggamma, gbeta, run_mean, run_var, inv_std;
  Mat<T> xhat;

  BatchNormL(std::size_t channels, std::size_t spatial)
      : c(channels), s(spatial), gamma(channels, T(1)), beta(channels, T(0)), ggamma(channels),
        gbeta(channels), run_mean(channels, T(0)), run_var(channels, T(1)), inv_std(channels) {}
  LayerKind kind() const override { return LayerKind::BatchNorm; }

  Mat<T> forward(const Mat<T>& x, bool training, const QuantConfig&) override {
    const Eigen::Index n = x.cols(), S = static_cast<Eigen::Index>(s);
    xhat.resize(x.rows(), n);
    Mat<T> y(x.rows(), n);
    const double count = static_cast<double>(s) * static_cast<double>(n);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const auto blk = x.middleRows(static_cast<Eigen::Index>(ch) * S, S);
      T mean, var;
      if (training) {
        mean = blk.sum() / T(count);
        var = (blk.array() - mean).square().sum() / T(count);
        const double unbiased = count > 1 ? static_cast<double>(var) * count / (count - 1) : static_cast<double>(var);
        run_mean[ch] = T(kMomentum * run_mean[ch] + (1 - kMomentum) * static_cast<double>(mean));
        run_var[ch] = T(kMomentum * run_var[ch] + (1 - kMomentum) * unbiased);
      } else {
        mean = run_mean[ch];
        var = run_var[ch];
      }
      inv_std[ch] = T(1) / std::sqrt(var + T(kEps));
      auto xh = xhat.middleRows(static_cast<Eigen::Index>(ch) * S, S);
      xh = (blk.array() - mean) * inv_std[ch];
      y.middleRows(static_cast<Eigen::Index>(ch) * S, S) = (xh.array() * gamma[ch] + beta[ch]).matrix();
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, bool) override {
    const Eigen::Index n = dy.cols(), S = static_cast<Eigen::Index>(s);
    const T count = T(static_cast<double>(s) * static_cast<double>(n));
    Mat<T> dx(dy.rows(), n);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const auto d = dy.middleRows(static_cast<Eigen::Index>(ch) * S, S).array();
      const auto xh = xhat.middleRows(static_cast<Eigen::Index>(ch) * S, S).array();
      ggamma[ch] = (d * xh).sum();
      gbeta[ch] = d.sum();
      const auto dxh = d * gamma[ch];
      const T sum1 = dxh.sum();
      const T sum2 = (dxh * xh).sum();
      dx.middleRows(static_cast<Eigen::Index>(ch) * S, S) =
          ((dxh * count - sum1 - xh * sum2) * (inv_std[ch] / count)).matrix();
    }
    return dx;
  }
  void collect(std::vector<typename Network<T>::Param>& ps, const std::string& p) override {
    ps.push_back({p + "gamma", gamma.data(), ggamma.data(), c, false});
    ps.push_back({p + "beta", beta.data(), gbeta.data(), c, false});
  }
  void state(std::vector<std::vector<T>*>& st) override {
    st.push_back(&run_mean);
    st.push_back(&run_var);
  }
};

template <typename T>
struct ActL : LayerBase<T> {
  Mat<T> x;
  LayerKind kind() const override { return LayerKind::Act; }
  Mat<T> forward(const Mat<T>& in, bool, const QuantConfig& q) override {
    x = in;
    if (q.surrogate) return in.unaryExpr([](T v) { return std::clamp(v, T(-1), T(1)); });
    if (q.mode == Mode::TNN)
      return in.unaryExpr([&](T v) { return T(phi(static_cast<double>(v), q.act_delta)); });
    return in.unaryExpr([](T v) { return T(sign_activation(static_cast<double>(v))); });
  }
  Mat<T> backward(const Mat<T>& dy, bool) override {
    return dy.binaryExpr(x, [](T d, T v) { return std::abs(v) <= T(1) ? d : T(0); });
  }
};

}  // namespace

template <typename T>
Network<T>::Network(const InputSpec& input, const std::string& arch, const QuantConfig& quant,
                    std::uint64_t seed)
    : input_(input), quant_(quant) {
  if (input.size() == 0) throw ConfigError("network: empty input shape");
  const std::vector<ArchLayer> spec = parse_arch(arch);
  Rng rng = make_stream(seed, {});
  std::size_t c = input.channels, h = input.height, w = input.width;
  bool flat = false;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const ArchLayer& a = spec[i];
    const bool last = i + 1 == spec.size();
    if (a.kind == ArchLayer::Kind::Pool) throw ConfigError("arch: pool must follow a conv layer");
    if (a.kind == ArchLayer::Kind::Conv) {
      if (flat) throw ConfigError("arch: conv after dense");
      layers_.push_back(std::make_unique<ConvL<T>>(c, a.units, h, w, rng));
      c = a.units;
      while (i + 1 < spec.size() && spec[i + 1].kind == ArchLayer::Kind::Pool) {
        if (h < 2 || w < 2) throw ConfigError("arch: pool on a map smaller than 2x2");
        layers_.push_back(std::make_unique<PoolL<T>>(c, h, w));
        h /= 2;
        w /= 2;
        ++i;
      }
      layers_.push_back(std::make_unique<BatchNormL<T>>(c, h * w));
      layers_.push_back(std::make_unique<ActL<T>>());
    } else if (last) {
      layers_.push_back(std::make_unique<OutputL<T>>(c * h * w, a.units, rng));
      classes_ = a.units;
    } else {
      layers_.push_back(std::make_unique<DenseL<T>>(c * h * w, a.units, rng));
      c = a.units;
      h = w = 1;
      flat = true;
      layers_.push_back(std::make_unique<BatchNormL<T>>(c, 1));
      layers_.push_back(std::make_unique<ActL<T>>());
    }
  }
  for (const Param& p : params()) {
    m_.emplace_back(p.size, T(0));
    v_.emplace_back(p.size, T(0));
  }
}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
Mat<T> Network<T>::to_batch(std::span<const std::uint8_t> pixels, std::size_t count) {
  if (count == 0 || pixels.size() % count != 0) throw DomainError("to_batch: pixel count does not split into images");
  const std::size_t n = pixels.size() / count;
  Mat<T> x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  for (std::size_t b = 0; b < count; ++b)
    for (std::size_t i = 0; i < n; ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = static_cast<T>(pixels[b * n + i]);
  return x;
}

template <typename T>
T Network<T>::forward(const Mat<T>& x, std::span<const std::uint8_t> labels, bool training) {
  if (x.rows() != static_cast<Eigen::Index>(input_.size())) throw DomainError("network: input size mismatch");
  if (labels.size() != static_cast<std::size_t>(x.cols())) throw DomainError("network: label count mismatch");
  Mat<T> a = x;
  for (auto& layer : layers_) a = layer->forward(a, training, quant_);
  logits_ = std::move(a);
  labels_.assign(labels.begin(), labels.end());
  probs_.resize(logits_.rows(), logits_.cols());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < logits_.cols(); ++b) {
    if (labels[static_cast<std::size_t>(b)] >= classes_) throw DomainError("network: label out of range");
    const T mx = logits_.col(b).maxCoeff();
    probs_.col(b) = (logits_.col(b).array() - mx).exp().matrix();
    const T z = probs_.col(b).sum();
    probs_.col(b) /= z;
    loss -= static_cast<double>(logits_(labels[static_cast<std::size_t>(b)], b) - mx - std::log(z));
  }
  return T(loss / static_cast<double>(logits_.cols()));
}

template <typename T>
void Network<T>::backward() {
  Mat<T> d = probs_;
  for (Eigen::Index b = 0; b < d.cols(); ++b) d(labels_[static_cast<std::size_t>(b)], b) -= T(1);
  d /= T(static_cast<double>(d.cols()));
  backward_from(d);
}

template <typename T>
void Network<T>::backward_from(const Mat<T>& dlogits) {
  Mat<T> d = dlogits;
  for (std::size_t i = layers_.size(); i-- > 0;) d = layers_[i]->backward(d, i > 0);
}

template <typename T>
std::vector<typename Network<T>::Param> Network<T>::params() {
  std::vector<Param> ps;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(ps, "layer" + std::to_string(i) + ".");
  return ps;
}

template <typename T>
void Network<T>::adam_update(double lr, const AdamConfig& cfg) {
  ++step_;
  std::vector<Param> ps = params();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const Param& p = ps[k];
    adamw_step<T>(std::span<T>(p.value, p.size), std::span<const T>(p.grad, p.size), m_[k], v_[k], step_, lr, cfg,
                  p.latent ? cfg.weight_decay : 0.0, p.latent);
  }
}

template <typename T>
NetworkModel Network<T>::export_model() const {
  QuantConfig q = quant_;
  q.surrogate = false;
  NetworkModel m;
  m.input = input_;
  auto ternary = [&](const Mat<T>& w, std::vector<std::size_t> shape) {
    std::vector<std::int8_t> v(static_cast<std::size_t>(w.size()));
    // row-major [out, in] flattening
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        v[static_cast<std::size_t>(r * w.cols() + c)] = ternary_of(quantize_weight(w(r, c), q));
    return TernaryTensor(std::move(shape), v);
  };
  for (const auto& layer : layers_) {
    switch (layer->kind()) {
      case LayerKind::Conv: {
        const auto& l = static_cast<const ConvL<T>&>(*layer);
        m.layers.emplace_back(ConvLayer{l.in_c, l.out_c, ternary(l.w, {l.out_c, l.in_c, 3, 3}),
                                        std::vector<std::int32_t>(l.out_c, 0)});
        break;
      }
      case LayerKind::Dense: {
        const auto& l = static_cast<const DenseL<T>&>(*layer);
        const auto out = static_cast<std::size_t>(l.w.rows()), in = static_cast<std::size_t>(l.w.cols());
        m.layers.emplace_back(DenseLayer{in, out, ternary(l.w, {out, in}), std::vector<std::int32_t>(out, 0)});
        break;
      }
      case LayerKind::Output: {
        const auto& l = static_cast<const OutputL<T>&>(*layer);
        const auto out = static_cast<std::size_t>(l.w.rows()), in = static_cast<std::size_t>(l.w.cols());
        std::vector<std::int32_t> bias(out);
        for (std::size_t o = 0; o < out; ++o) {
          const double q16 = std::round(static_cast<double>(l.b(static_cast<Eigen::Index>(o))) * kFixedOne);
          if (!(std::abs(q16) <= std::numeric_limits<std::int32_t>::max()))
            throw TrainingError("export: output bias out of fixed-point range");
          bias[o] = static_cast<std::int32_t>(q16);
        }
        m.layers.emplace_back(DenseLayer{in, out, ternary(l.w, {out, in}), std::move(bias)});
        break;
      }
      case LayerKind::Pool:
        m.layers.emplace_back(MaxPoolLayer{});
        break;
      case LayerKind::BatchNorm: {
        const auto& l = static_cast<const BatchNormL<T>&>(*layer);
        std::vector<BatchNormParams> ps(l.c);
        for (std::size_t ch = 0; ch < l.c; ++ch)
          ps[ch] = {static_cast<double>(l.gamma[ch]), static_cast<double>(l.beta[ch]),
                    static_cast<double>(l.run_mean[ch]), static_cast<double>(l.run_var[ch]), BatchNormL<T>::kEps};
        m.layers.emplace_back(BatchNormLayer::quantize(ps));
        break;
      }
      case LayerKind::Act: {
        ActivationLayer a;
        a.kind = quant_.mode == Mode::TNN ? ActivationKind::Phi : ActivationKind::Sign;
        a.delta_q = static_cast<std::int32_t>(std::round(quant_.act_delta * kFixedOne));
        m.layers.emplace_back(std::move(a));
        break;
      }
    }
  }
  m.fold_thresholds();
  return m;
}

namespace {

constexpr char kCkptMagic[4] = {'T', 'N', 'S', '1'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.put(static_cast<char>(v >> (8 * k)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t& pos) {
  if (b.size() - pos < 8) throw FormatError("checkpoint: unexpected end of data", pos);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[pos + static_cast<std::size_t>(k)]) << (8 * k);
  pos += 8;
  return v;
}

template <typename T>
void put_values(std::ostream& out, const T* v, std::size_t n) {
  put_u64(out, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(v[i]);
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
  }
}

template <typename T>
void get_values(std::span<const std::uint8_t> b, std::size_t& pos, T* v, std::size_t n) {
  const std::size_t at = pos;
  if (get_u64(b, pos) != n) throw FormatError("checkpoint: tensor size does not match network", at);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = get_u64(b, pos);
    double d;
    std::memcpy(&d, &bits, 8);
    v[i] = static_cast<T>(d);
  }
}

}  // namespace

template <typename T>
void Network<T>::save_checkpoint(const std::filesystem::path& path) const {
  auto& self = const_cast<Network<T>&>(*this);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kCkptMagic, 4);
  put_u64(out, kCkptVersion);
  put_u64(out, step_);
  const std::vector<Param> ps = self.params();
  put_u64(out, ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k) {
    put_values(out, ps[k].value, ps[k].size);
    put_values(out, m_[k].data(), m_[k].size());
    put_values(out, v_[k].data(), v_[k].size());
  }
  std::vector<std::vector<T>*> st;
  for (const auto& l : layers_) l->state(st);
  put_u64(out, st.size());
  for (const auto* s : st) put_values(out, s->data(), s->size());
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <typename T>
void Network<T>::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (b.size() < 4 || std::memcmp(b.data(), kCkptMagic, 4) != 0) throw FormatError("checkpoint: bad magic", 0);
  std::size_t pos = 4;
  if (get_u64(b, pos) != kCkptVersion) throw FormatError("checkpoint: unsupported version", 4);
  const std::uint64_t step = get_u64(b, pos);
  const std::vector<Param> ps = params();
  std::size_t at = pos;
  if (get_u64(b, pos) != ps.size()) throw FormatError("checkpoint: parameter count does not match", at);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    get_values(b, pos, ps[k].value, ps[k].size);
    get_values(b, pos, m_[k].data(), m_[k].size());
    get_values(b, pos, v_[k].data(), v_[k].size());
  }
  std::vector<std::vector<T>*> st;
  for (const auto& l : layers_) l->state(st);
  at = pos;
  if (get_u64(b, pos) != st.size()) throw FormatError("checkpoint: state count does not match", at);
  for (auto* s : st) get_values(b, pos, s->data(), s->size());
  if (pos != b.size()) throw FormatError("checkpoint: trailing bytes", pos);
  step_ = step;
}

template class Network<float>;
template class Network<double>;

}  // namespace tnnsim::train

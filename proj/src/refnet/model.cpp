#include "afford/refnet/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "afford/core/errors.hpp"
#include "afford/core/rng.hpp"

namespace afford::refnet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

constexpr std::size_t kInputChannels = 3;
constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel;

std::size_t encoder_weight(std::size_t stage) { return 2 * (stage - 1); }
std::size_t decoder_weight(const ModelConfig& c, std::size_t stage) { return 2 * c.depth + 2 * (c.depth - stage); }
std::size_t head_weight(const ModelConfig& c) { return 4 * c.depth; }

// Rows are (channel, ky, kx); columns are output pixels.
void im2col(const double* in, std::size_t channels, std::size_t h, std::size_t w, double* col) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in + c * hw;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        double* row = col + ((c * kKernel + ky) * kKernel + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          double* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            dst[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t channels, std::size_t h, std::size_t w, double* in_grad) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = in_grad + c * hw;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const double* row = col + ((c * kKernel + ky) * kKernel + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* src = row + y * w;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

// out (cout x hw) = W (cout x rows) * in (rows x hw) + b
void linear_forward(const ParamTensor& weight, const ParamTensor& bias, const std::vector<double>& in, std::size_t rows,
                    std::size_t hw, std::vector<double>& out) {
  const std::size_t cout = bias.values.size();
  out.resize(cout * hw);
  MatrixMap o(out.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
  ConstMatrixMap wm(weight.values.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(rows));
  ConstMatrixMap im(in.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
  o.noalias() = wm * im;
  for (std::size_t c = 0; c < cout; ++c) {
    double* p = out.data() + c * hw;
    const double b = bias.values[c];
    for (std::size_t i = 0; i < hw; ++i) p[i] += b;
  }
}

// Accumulates dW += dout * in^T, db += rowsum(dout); returns din = W^T * dout.
void linear_backward(const ParamTensor& weight, const std::vector<double>& in, std::size_t rows, std::size_t hw,
                     const std::vector<double>& dout, ParamTensor& dweight, ParamTensor& dbias,
                     std::vector<double>& din) {
  const std::size_t cout = dbias.values.size();
  ConstMatrixMap d(dout.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
  ConstMatrixMap im(in.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
  ConstMatrixMap wm(weight.values.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(rows));
  MatrixMap dw(dweight.values.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(rows));
  dw.noalias() += d * im.transpose();
  for (std::size_t c = 0; c < cout; ++c) {
    const double* p = dout.data() + c * hw;
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += p[i];
    dbias.values[c] += s;
  }
  din.resize(rows * hw);
  MatrixMap di(din.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
  di.noalias() = wm.transpose() * d;
}

void relu(const std::vector<double>& z, std::vector<double>& a) {
  a.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward(const std::vector<double>& z, std::vector<double>& grad) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0)) grad[i] = 0.0;
  }
}

std::vector<double> avg_pool2(const std::vector<double>& in, std::size_t c, std::size_t h, std::size_t w) {
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = in.data() + ch * h * w;
    double* dst = out.data() + ch * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double* p = src + 2 * y * w + 2 * x;
        dst[y * ow + x] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
    }
  }
  return out;
}

void avg_pool2_backward_add(const std::vector<double>& dout, std::size_t c, std::size_t h, std::size_t w,
                            std::vector<double>& din) {
  const std::size_t oh = h / 2, ow = w / 2;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = dout.data() + ch * oh * ow;
    double* dst = din.data() + ch * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double g = 0.25 * src[y * ow + x];
        double* p = dst + 2 * y * w + 2 * x;
        p[0] += g;
        p[1] += g;
        p[w] += g;
        p[w + 1] += g;
      }
    }
  }
}

// Writes nearest-neighbour x2 upsampling of `in` (c x h x w) into dst (c x 2h x 2w).
void upsample2(const double* in, std::size_t c, std::size_t h, std::size_t w, double* dst) {
  const std::size_t oh = 2 * h, ow = 2 * w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = in + ch * h * w;
    double* out = dst + ch * oh * ow;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) out[y * ow + x] = src[(y / 2) * w + x / 2];
  }
}

std::vector<double> upsample2_backward(const double* dout, std::size_t c, std::size_t h, std::size_t w) {
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<double> din(c * h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = dout + ch * oh * ow;
    double* out = din.data() + ch * h * w;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) out[(y / 2) * w + x / 2] += src[y * ow + x];
  }
  return din;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ParamTensor make_tensor(std::string name, std::vector<std::size_t> shape, bool encoder) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return ParamTensor{std::move(name), std::move(shape), std::vector<double>(n, 0.0), encoder};
}

}  // namespace

std::size_t ModelConfig::encoder_channels(std::size_t stage) const {
  if (stage == 0) return kInputChannels;
  return encoder_width << (stage - 1);
}

void ModelConfig::validate() const {
  if (k < 1) throw ArgumentError("model k must be >= 1");
  if (depth < 1 || depth > 8) throw ArgumentError("model depth must be in [1, 8]");
  if (encoder_width < 1) throw ArgumentError("encoder width must be >= 1");
}

void ModelConfig::check_input(std::size_t height, std::size_t width) const {
  const std::size_t unit = std::size_t{1} << depth;
  if (height == 0 || width == 0 || height % unit != 0 || width % unit != 0) {
    throw ArgumentError("input " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not a positive multiple of " + std::to_string(unit) + " (depth " +
                        std::to_string(depth) + ")");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"k", c.k}, {"depth", c.depth}, {"encoder_width", c.encoder_width}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.k = j.at("k").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.encoder_width = j.at("encoder_width").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  const std::size_t depth = config.depth;
  for (std::size_t s = 1; s <= depth; ++s) {
    const std::string name = "enc" + std::to_string(s);
    p.tensors.push_back(make_tensor(name + ".weight",
                                    {config.encoder_channels(s), config.encoder_channels(s - 1), kKernel, kKernel}, true));
    p.tensors.push_back(make_tensor(name + ".bias", {config.encoder_channels(s)}, true));
  }
  const std::size_t r = config.refine_channels();
  for (std::size_t s = depth; s >= 1; --s) {
    const std::size_t deep = s == depth ? config.encoder_channels(depth) : r;
    const std::string name = "dec" + std::to_string(s);
    p.tensors.push_back(make_tensor(name + ".weight", {r, deep + config.encoder_channels(s), kKernel, kKernel}, false));
    p.tensors.push_back(make_tensor(name + ".bias", {r}, false));
  }
  p.tensors.push_back(make_tensor("head.weight", {kNumAffordances, r, 1, 1}, false));
  p.tensors.push_back(make_tensor("head.bias", {kNumAffordances}, false));
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& config) {
  ModelParams p = zeros(config);
  Rng rng(config.seed);
  for (auto& t : p.tensors) {
    if (t.shape.size() != 4) continue;  // biases stay zero
    const double taps = static_cast<double>(t.shape[2] * t.shape[3]);
    const double fan_in = static_cast<double>(t.shape[1]) * taps;
    const double fan_out = static_cast<double>(t.shape[0]) * taps;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.values) v = rng.uniform(-limit, limit);
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams p = *this;
  p.set_zero();
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

std::uint64_t ModelParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tensors) {
    for (double v : t.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 0x100000001b3ULL;
    }
    h = splitmix64(h ^ t.values.size());
  }
  return h;
}

void ModelParams::set_zero() {
  for (auto& t : tensors) std::fill(t.values.begin(), t.values.end(), 0.0);
}

void ModelParams::scale(double factor) {
  for (auto& t : tensors)
    for (double& v : t.values) v *= factor;
}

void ModelParams::add(const ModelParams& other) {
  if (other.tensors.size() != tensors.size()) throw ArgumentError("parameter sets differ in layout");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (other.tensors[i].values.size() != tensors[i].values.size()) throw ArgumentError("parameter sets differ in layout");
    for (std::size_t j = 0; j < tensors[i].values.size(); ++j) tensors[i].values[j] += other.tensors[i].values[j];
  }
}

std::vector<std::uint8_t> ForwardCache::relu_pattern() const {
  std::vector<std::uint8_t> out;
  for (const auto* stages : {&encoder_, &decoder_}) {
    for (const auto& s : *stages)
      for (double z : s.preact) out.push_back(z > 0.0 ? 1 : 0);
  }
  return out;
}

namespace {

void check_params(const ModelParams& params, const ModelConfig& config) {
  const ModelParams expected = ModelParams::zeros(config);
  if (params.tensors.size() != expected.tensors.size()) throw ArgumentError("parameters do not match model config");
  for (std::size_t i = 0; i < expected.tensors.size(); ++i) {
    if (params.tensors[i].shape != expected.tensors[i].shape ||
        params.tensors[i].values.size() != expected.tensors[i].values.size()) {
      throw ArgumentError("parameter tensor '" + expected.tensors[i].name + "' has the wrong shape");
    }
  }
}

}  // namespace

struct ForwardPass {
  static ForwardResult run(const ModelParams& params, const ModelConfig& config, const RgbRaster& image) {
    config.validate();
    check_params(params, config);
    const std::size_t h0 = image.height(), w0 = image.width();
    config.check_input(h0, w0);

    ForwardCache cache;
    cache.config_ = config;
    cache.fingerprint_ = params.fingerprint();
    cache.height_ = h0;
    cache.width_ = w0;

    const std::size_t depth = config.depth;
    cache.encoder_.resize(depth);
    cache.decoder_.resize(depth);

    std::vector<double> x(image.data().begin(), image.data().end());
    std::size_t h = h0, w = w0;
    for (std::size_t s = 1; s <= depth; ++s) {
      auto& st = cache.encoder_[s - 1];
      const std::size_t cin = config.encoder_channels(s - 1);
      st.channels = cin;
      st.height = h;
      st.width = w;
      st.input = std::move(x);
      st.columns.resize(cin * kTaps * h * w);
      im2col(st.input.data(), cin, h, w, st.columns.data());
      const std::size_t wi = encoder_weight(s);
      linear_forward(params.tensors[wi], params.tensors[wi + 1], st.columns, cin * kTaps, h * w, st.preact);
      relu(st.preact, st.activation);
      x = avg_pool2(st.activation, config.encoder_channels(s), h, w);
      h /= 2;
      w /= 2;
    }

    // x is the bottleneck (channels of the deepest encoder stage) at h x w.
    std::size_t deep_channels = config.encoder_channels(depth);
    for (std::size_t s = depth; s >= 1; --s) {
      auto& st = cache.decoder_[s - 1];
      const auto& skip = cache.encoder_[s - 1];
      const std::size_t oh = 2 * h, ow = 2 * w;
      const std::size_t skip_channels = config.encoder_channels(s);
      st.channels = deep_channels + skip_channels;
      st.height = oh;
      st.width = ow;
      st.input.resize(st.channels * oh * ow);
      upsample2(x.data(), deep_channels, h, w, st.input.data());
      std::copy(skip.activation.begin(), skip.activation.end(), st.input.begin() + deep_channels * oh * ow);
      st.columns.resize(st.channels * kTaps * oh * ow);
      im2col(st.input.data(), st.channels, oh, ow, st.columns.data());
      const std::size_t wi = decoder_weight(config, s);
      linear_forward(params.tensors[wi], params.tensors[wi + 1], st.columns, st.channels * kTaps, oh * ow, st.preact);
      relu(st.preact, st.activation);
      x = st.activation;
      deep_channels = config.refine_channels();
      h = oh;
      w = ow;
    }

    const std::size_t hi = head_weight(config);
    std::vector<double> logits;
    linear_forward(params.tensors[hi], params.tensors[hi + 1], cache.decoder_[0].activation, config.refine_channels(),
                   h0 * w0, logits);
    cache.output_.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) cache.output_[i] = sigmoid(logits[i]);

    AffordanceTensor out(h0, w0, cache.output_);
    return ForwardResult{std::move(out), std::move(cache)};
  }
};

struct BackwardPass {
  static void run(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_output,
                  ModelParams& grads, std::vector<double>* input_grad) {
    const ModelConfig& config = cache.config_;
    if (cache.encoder_.empty() || cache.output_.empty()) throw ArgumentError("backward on an empty cache");
    if (params.fingerprint() != cache.fingerprint_) {
      throw ArgumentError("stale cache: parameters changed since forward");
    }
    check_params(grads, config);
    const std::size_t h0 = cache.height_, w0 = cache.width_;
    const std::size_t hw0 = h0 * w0;
    if (grad_output.size() != kNumAffordances * hw0) throw ArgumentError("grad_output has the wrong size");

    const std::size_t depth = config.depth;
    const std::size_t r = config.refine_channels();

    // Through the sigmoid.
    std::vector<double> dlogits(grad_output.size());
    for (std::size_t i = 0; i < dlogits.size(); ++i) {
      const double y = cache.output_[i];
      dlogits[i] = grad_output[i] * y * (1.0 - y);
    }
    const std::size_t hi = head_weight(config);
    std::vector<double> dx;
    linear_backward(params.tensors[hi], cache.decoder_[0].activation, r, hw0, dlogits, grads.tensors[hi],
                    grads.tensors[hi + 1], dx);

    // Gradients flowing into each encoder activation through the skips.
    std::vector<std::vector<double>> skip_grads(depth);
    std::vector<double> dcols;
    for (std::size_t s = 1; s <= depth; ++s) {
      const auto& st = cache.decoder_[s - 1];
      const std::size_t hw = st.height * st.width;
      relu_backward(st.preact, dx);
      const std::size_t wi = decoder_weight(config, s);
      linear_backward(params.tensors[wi], st.columns, st.channels * kTaps, hw, dx, grads.tensors[wi],
                      grads.tensors[wi + 1], dcols);
      std::vector<double> dinput(st.channels * hw, 0.0);
      col2im_add(dcols.data(), st.channels, st.height, st.width, dinput.data());

      const std::size_t skip_channels = config.encoder_channels(s);
      const std::size_t deep_channels = st.channels - skip_channels;
      skip_grads[s - 1].assign(dinput.begin() + deep_channels * hw, dinput.end());
      dx = upsample2_backward(dinput.data(), deep_channels, st.height / 2, st.width / 2);
    }

    // dx now holds dL/d(bottleneck).
    for (std::size_t s = depth; s >= 1; --s) {
      const auto& st = cache.encoder_[s - 1];
      const std::size_t c = config.encoder_channels(s);
      std::vector<double> dact = std::move(skip_grads[s - 1]);
      avg_pool2_backward_add(dx, c, st.height, st.width, dact);
      relu_backward(st.preact, dact);
      const std::size_t wi = encoder_weight(s);
      const std::size_t hw = st.height * st.width;
      linear_backward(params.tensors[wi], st.columns, st.channels * kTaps, hw, dact, grads.tensors[wi],
                      grads.tensors[wi + 1], dcols);
      dx.assign(st.channels * hw, 0.0);
      col2im_add(dcols.data(), st.channels, st.height, st.width, dx.data());
    }
    if (input_grad != nullptr) *input_grad = std::move(dx);
  }
};

ForwardResult forward(const ModelParams& params, const ModelConfig& config, const RgbRaster& image) {
  return ForwardPass::run(params, config, image);
}

AffordanceTensor predict(const ModelParams& params, const ModelConfig& config, const RgbRaster& image) {
  return forward(params, config, image).output;
}

void backward_accumulate(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_output,
                         ModelParams& grads, std::vector<double>* input_grad) {
  BackwardPass::run(params, cache, grad_output, grads, input_grad);
}

BackwardResult backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_output) {
  BackwardResult result{params.zeros_like(), {}};
  BackwardPass::run(params, cache, grad_output, result.grads, &result.input_grad);
  return result;
}

}  // namespace afford::refnet

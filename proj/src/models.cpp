#include "crl/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace crl::models {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t shape_prod(const std::vector<std::size_t>& s) {
  return Tensor::numel_of(s);
}

}  // namespace

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = Kind::linear;
  s.in = in;
  s.out = out;
  return s;
}
LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch,
                            std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  LayerSpec s;
  s.kind = Kind::conv2d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}
LayerSpec LayerSpec::maxpool2d(std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = Kind::maxpool2d;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}
LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = Kind::relu;
  return s;
}
LayerSpec LayerSpec::dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout rate must be in [0,1)");
  LayerSpec s;
  s.kind = Kind::dropout;
  s.rate = rate;
  return s;
}
LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::flatten;
  return s;
}

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const = 0;
  virtual Tensor forward(const Tensor& x, bool train,
                         std::mt19937_64& rng) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
};

namespace {

class LinearLayer final : public Layer {
 public:
  LinearLayer(const LayerSpec& s) : spec_(s) {
    weight_ = Tensor({s.out, s.in});
    bias_ = Tensor({s.out});
    wgrad_ = Tensor({s.out, s.in});
    bgrad_ = Tensor({s.out});
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (shape_prod(in) != spec_.in)
      throw std::invalid_argument("linear: input size mismatch");
    return {spec_.out};
  }

  Tensor forward(const Tensor& x, bool train, std::mt19937_64&) override {
    const std::size_t n = x.shape[0];
    Tensor y({n, spec_.out});
    ConstMapMat xm(x.data.data(), n, spec_.in);
    ConstMapMat wm(weight_.data.data(), spec_.out, spec_.in);
    MapMat ym(y.data.data(), n, spec_.out);
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const Eigen::RowVectorXd> bm(bias_.data.data(), spec_.out);
    ym.rowwise() += bm;
    if (train) cached_input_ = x;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    const std::size_t n = gy.shape[0];
    ConstMapMat gym(gy.data.data(), n, spec_.out);
    ConstMapMat xm(cached_input_.data.data(), n, spec_.in);
    ConstMapMat wm(weight_.data.data(), spec_.out, spec_.in);
    MapMat gwm(wgrad_.data.data(), spec_.out, spec_.in);
    gwm.noalias() += gym.transpose() * xm;
    Eigen::Map<Eigen::RowVectorXd> gbm(bgrad_.data.data(), spec_.out);
    gbm += gym.colwise().sum();
    Tensor gx(cached_input_.shape);
    MapMat gxm(gx.data.data(), n, spec_.in);
    gxm.noalias() = gym * wm;
    return gx;
  }

  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> grads() override { return {&wgrad_, &bgrad_}; }

 private:
  LayerSpec spec_;
  Tensor weight_, bias_, wgrad_, bgrad_;
  Tensor cached_input_;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(const LayerSpec& s) : spec_(s) {
    weight_ = Tensor({s.out_ch, s.in_ch, s.kernel, s.kernel});
    bias_ = Tensor({s.out_ch});
    wgrad_ = Tensor(weight_.shape);
    bgrad_ = Tensor(bias_.shape);
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 3 || in[0] != spec_.in_ch)
      throw std::invalid_argument("conv2d: expected [in_ch, H, W] input");
    const std::size_t h = in[1] + 2 * spec_.padding;
    const std::size_t w = in[2] + 2 * spec_.padding;
    if (h < spec_.kernel || w < spec_.kernel)
      throw std::invalid_argument("conv2d: kernel larger than padded input");
    return {spec_.out_ch, (h - spec_.kernel) / spec_.stride + 1,
            (w - spec_.kernel) / spec_.stride + 1};
  }

  Tensor forward(const Tensor& x, bool train, std::mt19937_64&) override {
    const std::size_t n = x.shape[0], ci = x.shape[1], h = x.shape[2],
                      w = x.shape[3];
    const auto os = output_shape({ci, h, w});
    const std::size_t co = os[0], oh = os[1], ow = os[2];
    Tensor y({n, co, oh, ow});
    const std::size_t k = spec_.kernel, st = spec_.stride;
    const long pad = static_cast<long>(spec_.padding);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t oc = 0; oc < co; ++oc)
        for (std::size_t yy = 0; yy < oh; ++yy)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            double acc = bias_[oc];
            for (std::size_t ic = 0; ic < ci; ++ic)
              for (std::size_t kh = 0; kh < k; ++kh) {
                const long ih = static_cast<long>(yy * st + kh) - pad;
                if (ih < 0 || ih >= static_cast<long>(h)) continue;
                for (std::size_t kw = 0; kw < k; ++kw) {
                  const long iw = static_cast<long>(xx * st + kw) - pad;
                  if (iw < 0 || iw >= static_cast<long>(w)) continue;
                  acc += x.data[((ni * ci + ic) * h + ih) * w + iw] *
                         weight_.data[((oc * ci + ic) * k + kh) * k + kw];
                }
              }
            y.data[((ni * co + oc) * oh + yy) * ow + xx] = acc;
          }
    if (train) cached_input_ = x;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    const Tensor& x = cached_input_;
    const std::size_t n = x.shape[0], ci = x.shape[1], h = x.shape[2],
                      w = x.shape[3];
    const std::size_t co = gy.shape[1], oh = gy.shape[2], ow = gy.shape[3];
    const std::size_t k = spec_.kernel, st = spec_.stride;
    const long pad = static_cast<long>(spec_.padding);
    Tensor gx(x.shape);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t oc = 0; oc < co; ++oc)
        for (std::size_t yy = 0; yy < oh; ++yy)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const double g = gy.data[((ni * co + oc) * oh + yy) * ow + xx];
            bgrad_[oc] += g;
            for (std::size_t ic = 0; ic < ci; ++ic)
              for (std::size_t kh = 0; kh < k; ++kh) {
                const long ih = static_cast<long>(yy * st + kh) - pad;
                if (ih < 0 || ih >= static_cast<long>(h)) continue;
                for (std::size_t kw = 0; kw < k; ++kw) {
                  const long iw = static_cast<long>(xx * st + kw) - pad;
                  if (iw < 0 || iw >= static_cast<long>(w)) continue;
                  const std::size_t xi = ((ni * ci + ic) * h + ih) * w + iw;
                  const std::size_t wi = ((oc * ci + ic) * k + kh) * k + kw;
                  wgrad_.data[wi] += g * x.data[xi];
                  gx.data[xi] += g * weight_.data[wi];
                }
              }
          }
    return gx;
  }

  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<Tensor*> grads() override { return {&wgrad_, &bgrad_}; }

 private:
  LayerSpec spec_;
  Tensor weight_, bias_, wgrad_, bgrad_;
  Tensor cached_input_;
};

class MaxPool2dLayer final : public Layer {
 public:
  MaxPool2dLayer(const LayerSpec& s) : spec_(s) {}

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 3)
      throw std::invalid_argument("maxpool2d: expected [C, H, W] input");
    if (in[1] < spec_.kernel || in[2] < spec_.kernel)
      throw std::invalid_argument("maxpool2d: kernel larger than input");
    return {in[0], (in[1] - spec_.kernel) / spec_.stride + 1,
            (in[2] - spec_.kernel) / spec_.stride + 1};
  }

  Tensor forward(const Tensor& x, bool train, std::mt19937_64&) override {
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2],
                      w = x.shape[3];
    const auto os = output_shape({c, h, w});
    const std::size_t oh = os[1], ow = os[2];
    Tensor y({n, c, oh, ow});
    argmax_.assign(y.numel(), 0);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t yy = 0; yy < oh; ++yy)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            std::size_t best = ((ni * c + ch) * h + yy * spec_.stride) * w +
                               xx * spec_.stride;
            double bv = x.data[best];
            for (std::size_t kh = 0; kh < spec_.kernel; ++kh)
              for (std::size_t kw = 0; kw < spec_.kernel; ++kw) {
                const std::size_t idx =
                    ((ni * c + ch) * h + yy * spec_.stride + kh) * w +
                    xx * spec_.stride + kw;
                if (x.data[idx] > bv) {
                  bv = x.data[idx];
                  best = idx;
                }
              }
            const std::size_t oi = ((ni * c + ch) * oh + yy) * ow + xx;
            y.data[oi] = bv;
            argmax_[oi] = best;
          }
    if (train) input_shape_cache_ = x.shape;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    Tensor gx(input_shape_cache_);
    for (std::size_t i = 0; i < gy.numel(); ++i)
      gx.data[argmax_[i]] += gy.data[i];
    return gx;
  }

 private:
  LayerSpec spec_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> input_shape_cache_;
};

class ReluLayer final : public Layer {
 public:
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return in;
  }
  Tensor forward(const Tensor& x, bool train, std::mt19937_64&) override {
    Tensor y(x.shape);
    if (train) mask_.assign(x.numel(), 0);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (x.data[i] > 0.0) {
        y.data[i] = x.data[i];
        if (train) mask_[i] = 1;
      }
    }
    return y;
  }
  Tensor backward(const Tensor& gy) override {
    Tensor gx(gy.shape);
    for (std::size_t i = 0; i < gy.numel(); ++i)
      gx.data[i] = mask_[i] ? gy.data[i] : 0.0;
    return gx;
  }

 private:
  std::vector<unsigned char> mask_;
};

// Inverted dropout: surviving activations are scaled by 1/(1-rate) at train
// time so the eval path is a plain forward.
class DropoutLayer final : public Layer {
 public:
  DropoutLayer(const LayerSpec& s) : spec_(s) {}

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return in;
  }

  Tensor forward(const Tensor& x, bool train, std::mt19937_64& rng) override {
    if (!train || spec_.rate == 0.0) {
      if (train) mask_.assign(x.numel(), 1.0);
      return x;
    }
    const double keep_scale = 1.0 / (1.0 - spec_.rate);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    mask_.resize(x.numel());
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      mask_[i] = unif(rng) < spec_.rate ? 0.0 : keep_scale;
      y.data[i] = x.data[i] * mask_[i];
    }
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    Tensor gx(gy.shape);
    for (std::size_t i = 0; i < gy.numel(); ++i)
      gx.data[i] = gy.data[i] * mask_[i];
    return gx;
  }

 private:
  LayerSpec spec_;
  std::vector<double> mask_;
};

class FlattenLayer final : public Layer {
 public:
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return {shape_prod(in)};
  }
  Tensor forward(const Tensor& x, bool train, std::mt19937_64&) override {
    if (train) input_shape_cache_ = x.shape;
    std::size_t per = 1;
    for (std::size_t i = 1; i < x.shape.size(); ++i) per *= x.shape[i];
    return x.reshaped({x.shape[0], per});
  }
  Tensor backward(const Tensor& gy) override {
    return gy.reshaped(input_shape_cache_);
  }

 private:
  std::vector<std::size_t> input_shape_cache_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& s) {
  switch (s.kind) {
    case LayerSpec::Kind::linear: return std::make_unique<LinearLayer>(s);
    case LayerSpec::Kind::conv2d: return std::make_unique<Conv2dLayer>(s);
    case LayerSpec::Kind::maxpool2d:
      return std::make_unique<MaxPool2dLayer>(s);
    case LayerSpec::Kind::relu: return std::make_unique<ReluLayer>();
    case LayerSpec::Kind::dropout: return std::make_unique<DropoutLayer>(s);
    case LayerSpec::Kind::flatten: return std::make_unique<FlattenLayer>();
  }
  throw std::logic_error("bad layer kind");
}

}  // namespace

Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;
Model::~Model() = default;

Model::Model(std::vector<LayerSpec> specs, std::vector<std::size_t> input_shape,
             std::size_t class_count, std::uint64_t seed)
    : specs_(std::move(specs)),
      input_shape_(std::move(input_shape)),
      class_count_(class_count),
      seed_(seed),
      dropout_rng_(seed ^ 0x6a09e667f3bcc909ull) {
  if (specs_.empty()) throw std::invalid_argument("model: no layers");
  if (class_count_ < 2) throw std::invalid_argument("model: class_count < 2");

  for (const LayerSpec& s : specs_) layers_.push_back(make_layer(s));

  // Validate the shape algebra end to end before touching parameters.
  std::vector<std::size_t> shape = input_shape_;
  for (const auto& layer : layers_) shape = layer->output_shape(shape);
  if (shape_prod(shape) != class_count_)
    throw std::invalid_argument("model: final layer does not emit C logits");

  // He fan-in init for hidden layers (relu-adjacent mix), Xavier for the
  // final linear layer. Biases start at zero.
  std::size_t last_linear = specs_.size();
  for (std::size_t i = 0; i < specs_.size(); ++i)
    if (specs_[i].kind == LayerSpec::Kind::linear) last_linear = i;

  std::mt19937_64 rng(seed_);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto ps = layers_[i]->params();
    if (ps.empty()) continue;
    std::size_t fan_in = specs_[i].kind == LayerSpec::Kind::linear
                             ? specs_[i].in
                             : specs_[i].in_ch * specs_[i].kernel *
                                   specs_[i].kernel;
    const double scale = (i == last_linear)
                             ? std::sqrt(1.0 / static_cast<double>(fan_in))
                             : std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : ps[0]->data) v = scale * normal(rng);
    // ps[1] is the bias, left at zero.
  }
}

Tensor Model::forward(const Tensor& inputs) {
  if (inputs.shape.empty() || inputs.shape[0] == 0)
    throw std::invalid_argument("forward: empty batch");
  std::size_t per = 1;
  for (std::size_t i = 1; i < inputs.shape.size(); ++i) per *= inputs.shape[i];
  if (per != shape_prod(input_shape_))
    throw std::invalid_argument("forward: input shape mismatch");

  std::vector<std::size_t> full_shape;
  full_shape.push_back(inputs.shape[0]);
  for (std::size_t d : input_shape_) full_shape.push_back(d);
  Tensor x = inputs.reshaped(full_shape);
  for (auto& layer : layers_) x = layer->forward(x, training_, dropout_rng_);
  forward_cached_ = training_;
  return x.reshaped({inputs.shape[0], class_count_});
}

Tensor Model::backward(const Tensor& logit_grads) {
  if (!forward_cached_)
    throw std::logic_error("backward without a matching train-mode forward");
  Tensor g = logit_grads;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  forward_cached_ = false;
  grads_ready_ = true;
  return g;
}

void Model::zero_grads() {
  for (Tensor* g : grads()) std::fill(g->data.begin(), g->data.end(), 0.0);
  grads_ready_ = false;
}

std::vector<Tensor*> Model::params() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_)
    for (Tensor* t : layer->params()) out.push_back(t);
  return out;
}

std::vector<Tensor*> Model::grads() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_)
    for (Tensor* t : layer->grads()) out.push_back(t);
  return out;
}

std::vector<std::size_t> Model::predict(const Tensor& inputs) {
  if (training_) throw std::logic_error("predict requires eval mode");
  Tensor logits = forward(inputs);
  const std::size_t n = logits.shape[0];
  std::vector<std::size_t> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < class_count_; ++j)
      if (logits.data[i * class_count_ + j] >
          logits.data[i * class_count_ + best])
        best = j;
    preds[i] = best;
  }
  return preds;
}

void Model::reseed_dropout(std::uint64_t seed) {
  dropout_rng_.seed(seed ^ 0x6a09e667f3bcc909ull);
}

Model build_model(const std::string& preset,
                  std::vector<std::size_t> input_shape,
                  std::size_t class_count, std::uint64_t seed) {
  const std::size_t flat = shape_prod(input_shape);
  std::vector<LayerSpec> specs;
  if (preset == "logreg") {
    specs = {LayerSpec::linear(flat, class_count)};
  } else if (preset == "mlp") {
    specs = {LayerSpec::linear(flat, 256), LayerSpec::relu(),
             LayerSpec::dropout(0.5), LayerSpec::linear(256, class_count)};
  } else if (preset == "shallow_cnn") {
    if (input_shape.size() != 3)
      throw std::invalid_argument("shallow_cnn expects [C, H, W] input");
    const std::size_t ch = input_shape[0];
    specs = {LayerSpec::conv2d(ch, 32, 3, 1, 1), LayerSpec::relu(),
             LayerSpec::conv2d(32, 32, 3, 1, 1),  LayerSpec::relu(),
             LayerSpec::maxpool2d(2, 2),          LayerSpec::dropout(0.25),
             LayerSpec::conv2d(32, 64, 3, 1, 1),  LayerSpec::relu(),
             LayerSpec::conv2d(64, 64, 3, 1, 1),  LayerSpec::relu(),
             LayerSpec::maxpool2d(2, 2),          LayerSpec::dropout(0.25),
             LayerSpec::flatten()};
    const std::size_t h = input_shape[1] / 4, w = input_shape[2] / 4;
    specs.push_back(LayerSpec::linear(64 * h * w, 512));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::dropout(0.5));
    specs.push_back(LayerSpec::linear(512, class_count));
  } else {
    throw std::invalid_argument("unknown model preset: " + preset);
  }
  return Model(std::move(specs), std::move(input_shape), class_count, seed);
}

Model build_model(std::vector<LayerSpec> specs,
                  std::vector<std::size_t> input_shape,
                  std::size_t class_count, std::uint64_t seed) {
  return Model(std::move(specs), std::move(input_shape), class_count, seed);
}

// ---- checkpoint I/O -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'R', 'L', 'C'};
constexpr unsigned char kVersion = 1;

nlohmann::json spec_to_json(const LayerSpec& s) {
  using Kind = LayerSpec::Kind;
  nlohmann::json j;
  switch (s.kind) {
    case Kind::linear:
      j = {{"kind", "linear"}, {"in", s.in}, {"out", s.out}};
      break;
    case Kind::conv2d:
      j = {{"kind", "conv2d"},   {"in_ch", s.in_ch}, {"out_ch", s.out_ch},
           {"kernel", s.kernel}, {"stride", s.stride}, {"padding", s.padding}};
      break;
    case Kind::maxpool2d:
      j = {{"kind", "maxpool2d"}, {"kernel", s.kernel}, {"stride", s.stride}};
      break;
    case Kind::relu: j = {{"kind", "relu"}}; break;
    case Kind::dropout: j = {{"kind", "dropout"}, {"rate", s.rate}}; break;
    case Kind::flatten: j = {{"kind", "flatten"}}; break;
  }
  return j;
}

LayerSpec spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  if (kind == "linear") return LayerSpec::linear(j.at("in"), j.at("out"));
  if (kind == "conv2d")
    return LayerSpec::conv2d(j.at("in_ch"), j.at("out_ch"), j.at("kernel"),
                             j.at("stride"), j.at("padding"));
  if (kind == "maxpool2d")
    return LayerSpec::maxpool2d(j.at("kernel"), j.at("stride"));
  if (kind == "relu") return LayerSpec::relu();
  if (kind == "dropout") return LayerSpec::dropout(j.at("rate"));
  if (kind == "flatten") return LayerSpec::flatten();
  throw std::runtime_error("checkpoint: unknown layer kind " + kind);
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& os, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  nlohmann::json arch;
  arch["input_shape"] = model.input_shape();
  arch["class_count"] = model.class_count();
  arch["seed"] = model.seed();
  arch["layers"] = nlohmann::json::array();
  for (const LayerSpec& s : model.layer_specs())
    arch["layers"].push_back(spec_to_json(s));
  const std::string blob = arch.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " +
                                    path.string());
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  write_u32_le(os, static_cast<std::uint32_t>(blob.size()));
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  for (Tensor* t : model.params()) {
    write_u32_le(os, static_cast<std::uint32_t>(t->numel()));
    for (double d : t->data) write_f64_le(os, d);
  }
  if (!os) throw std::runtime_error("checkpoint write failed");
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const int version = is.get();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const std::uint32_t len = read_u32_le(is);
  std::string blob(len, '\0');
  is.read(blob.data(), len);
  if (!is) throw std::runtime_error("checkpoint: truncated header");

  const nlohmann::json arch = nlohmann::json::parse(blob);
  std::vector<LayerSpec> specs;
  for (const auto& j : arch.at("layers")) specs.push_back(spec_from_json(j));
  Model model(std::move(specs),
              arch.at("input_shape").get<std::vector<std::size_t>>(),
              arch.at("class_count").get<std::size_t>(),
              arch.at("seed").get<std::uint64_t>());
  for (Tensor* t : model.params()) {
    const std::uint32_t count = read_u32_le(is);
    if (count != t->numel())
      throw std::runtime_error("checkpoint: parameter size mismatch");
    for (double& d : t->data) d = read_f64_le(is);
  }
  if (!is) throw std::runtime_error("checkpoint: truncated parameters");
  return model;
}

}  // namespace crl::models

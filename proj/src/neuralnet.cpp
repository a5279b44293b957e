// Copyright 2026 The dkrc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dkrc/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dkrc/errors.hpp"
#include "dkrc/io.hpp"
#include "dkrc/random.hpp"

using nlohmann::json;

namespace dkrc {

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  int n = 1;
  for (int d : t.shape) n *= d;
  t.data = Eigen::VectorXd::Zero(n);
  return t;
}

Tensor Tensor::from_vector(const Eigen::VectorXd& v) {
  Tensor t;
  t.shape = {static_cast<int>(v.size())};
  t.data = v;
  return t;
}

int Tensor::size() const {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

// ---------------------------------------------------------------------------
// Activation
// ---------------------------------------------------------------------------

void Activation::validate() const {
  if (kind == ActKind::LeakyRelu && !(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidArgument("Activation: leaky_relu alpha must be in (0,1)");
  }
}

Eigen::MatrixXd Activation::apply(const Eigen::MatrixXd& z) const {
  switch (kind) {
    case ActKind::Linear:
      return z;
    case ActKind::Tanh:
      return z.array().tanh().matrix();
    case ActKind::LeakyRelu:
      return z.unaryExpr([a = alpha](double v) { return v > 0.0 ? v : a * v; });
    case ActKind::Sigmoid:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  throw InvalidArgument("Activation: unknown kind");
}

Eigen::MatrixXd Activation::derivative(const Eigen::MatrixXd& z) const {
  switch (kind) {
    case ActKind::Linear:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case ActKind::Tanh: {
      Eigen::ArrayXXd t = z.array().tanh();
      return (1.0 - t * t).matrix();
    }
    case ActKind::LeakyRelu:
      return z.unaryExpr([a = alpha](double v) { return v > 0.0 ? 1.0 : a; });
    case ActKind::Sigmoid:
      return z.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
  }
  throw InvalidArgument("Activation: unknown kind");
}

std::string act_name(ActKind kind) {
  switch (kind) {
    case ActKind::Linear:
      return "linear";
    case ActKind::Tanh:
      return "tanh";
    case ActKind::LeakyRelu:
      return "leaky_relu";
    case ActKind::Sigmoid:
      return "sigmoid";
  }
  return "unknown";
}

ActKind act_from_name(const std::string& name) {
  if (name == "linear") return ActKind::Linear;
  if (name == "tanh") return ActKind::Tanh;
  if (name == "leaky_relu") return ActKind::LeakyRelu;
  if (name == "sigmoid") return ActKind::Sigmoid;
  throw IoError("unknown activation name: " + name);
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

namespace {

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

class DenseLayer final : public Layer {
 public:
  DenseLayer(int in_dim, int out_dim, Activation act)
      : act_(act),
        W_(Eigen::MatrixXd::Zero(out_dim, in_dim)),
        b_(Eigen::VectorXd::Zero(out_dim)),
        dW_(Eigen::MatrixXd::Zero(out_dim, in_dim)),
        db_(Eigen::VectorXd::Zero(out_dim)) {
    act_.validate();
    if (in_dim < 1 || out_dim < 1) {
      throw InvalidArgument("DenseLayer: dimensions must be positive");
    }
  }

  std::unique_ptr<Layer> clone() const override {
    auto copy = std::make_unique<DenseLayer>(
        static_cast<int>(W_.cols()), static_cast<int>(W_.rows()), act_);
    copy->W_ = W_;
    copy->b_ = b_;
    return copy;
  }

  std::string type() const override { return "dense"; }
  Shape3 input_shape() const override { return {1, 1, static_cast<int>(W_.cols())}; }
  Shape3 output_shape() const override { return {1, 1, static_cast<int>(W_.rows())}; }
  const Activation* activation() const override { return &act_; }

  Eigen::MatrixXd infer(const Eigen::MatrixXd& in) const override {
    return act_.apply((W_ * in).colwise() + b_);
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& in) override {
    in_cache_ = in;
    z_cache_ = (W_ * in).colwise() + b_;
    cached_ = true;
    return act_.apply(z_cache_);
  }

  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override {
    if (!cached_) throw StateError("DenseLayer: backward without forward");
    const Eigen::MatrixXd dz =
        grad_out.cwiseProduct(act_.derivative(z_cache_));
    dW_ += dz * in_cache_.transpose();
    db_ += dz.rowwise().sum();
    cached_ = false;
    return W_.transpose() * dz;
  }

  bool has_cache() const override { return cached_; }
  void clear_cache() override {
    cached_ = false;
    in_cache_.resize(0, 0);
    z_cache_.resize(0, 0);
  }

  void collect_params(std::vector<ParamBlock>& blocks) override {
    blocks.push_back({W_.data(), dW_.data(), static_cast<int>(W_.size())});
    blocks.push_back({b_.data(), db_.data(), static_cast<int>(b_.size())});
  }

  void init_weights(std::mt19937_64& gen) override {
    const double bound =
        glorot_bound(static_cast<int>(W_.cols()), static_cast<int>(W_.rows()));
    for (Eigen::Index i = 0; i < W_.rows(); ++i) {
      for (Eigen::Index j = 0; j < W_.cols(); ++j) {
        W_(i, j) = uniform(gen, -bound, bound);
      }
    }
    b_.setZero();
  }

  Eigen::MatrixXd& weights() { return W_; }
  Eigen::VectorXd& bias() { return b_; }

 private:
  Activation act_;
  Eigen::MatrixXd W_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd dW_;
  Eigen::VectorXd db_;
  Eigen::MatrixXd in_cache_, z_cache_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Conv2d layer ('same' padding, per-axis stride)
// ---------------------------------------------------------------------------

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(Shape3 in_shape, int out_channels, int kernel_h, int kernel_w,
              int stride_y, int stride_x, Activation act)
      : in_(in_shape),
        oc_(out_channels),
        kh_(kernel_h),
        kw_(kernel_w),
        sy_(stride_y),
        sx_(stride_x),
        act_(act) {
    act_.validate();
    if (in_.c < 1 || in_.h < 1 || in_.w < 1 || oc_ < 1 || kh_ < 1 || kw_ < 1 ||
        sy_ < 1 || sx_ < 1) {
      throw InvalidArgument("Conv2dLayer: dimensions must be positive");
    }
    out_ = {oc_, conv_out_extent(in_.h, sy_), conv_out_extent(in_.w, sx_)};
    const int pad_h = std::max((out_.h - 1) * sy_ + kh_ - in_.h, 0);
    const int pad_w = std::max((out_.w - 1) * sx_ + kw_ - in_.w, 0);
    pad_top_ = pad_h / 2;
    pad_left_ = pad_w / 2;
    kernels_ = Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(oc_) * in_.c * kh_ * kw_);
    bias_ = Eigen::VectorXd::Zero(oc_);
    dk_ = Eigen::VectorXd::Zero(kernels_.size());
    db_ = Eigen::VectorXd::Zero(oc_);
  }

  std::unique_ptr<Layer> clone() const override {
    auto copy = std::make_unique<Conv2dLayer>(in_, oc_, kh_, kw_, sy_, sx_, act_);
    copy->kernels_ = kernels_;
    copy->bias_ = bias_;
    return copy;
  }

  std::string type() const override { return "conv2d"; }
  Shape3 input_shape() const override { return in_; }
  Shape3 output_shape() const override { return out_; }
  const Activation* activation() const override { return &act_; }
  int kernel_h() const { return kh_; }
  int kernel_w() const { return kw_; }
  int stride_y() const { return sy_; }
  int stride_x() const { return sx_; }

  Eigen::MatrixXd infer(const Eigen::MatrixXd& in) const override {
    return act_.apply(pre_activation(in));
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& in) override {
    in_cache_ = in;
    z_cache_ = pre_activation(in);
    cached_ = true;
    return act_.apply(z_cache_);
  }

  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override {
    if (!cached_) throw StateError("Conv2dLayer: backward without forward");
    const Eigen::MatrixXd dz = grad_out.cwiseProduct(act_.derivative(z_cache_));
    Eigen::MatrixXd din = Eigen::MatrixXd::Zero(in_.size(), dz.cols());
    for (Eigen::Index col = 0; col < dz.cols(); ++col) {
      for (int oc = 0; oc < oc_; ++oc) {
        for (int oy = 0; oy < out_.h; ++oy) {
          for (int ox = 0; ox < out_.w; ++ox) {
            const double g = dz(out_index(oc, oy, ox), col);
            if (g == 0.0) continue;
            db_(oc) += g;
            for (int ic = 0; ic < in_.c; ++ic) {
              for (int ky = 0; ky < kh_; ++ky) {
                const int iy = oy * sy_ - pad_top_ + ky;
                if (iy < 0 || iy >= in_.h) continue;
                for (int kx = 0; kx < kw_; ++kx) {
                  const int ix = ox * sx_ - pad_left_ + kx;
                  if (ix < 0 || ix >= in_.w) continue;
                  const Eigen::Index ii = in_index(ic, iy, ix);
                  dk_(kernel_index(oc, ic, ky, kx)) += g * in_cache_(ii, col);
                  din(ii, col) += g * kernels_(kernel_index(oc, ic, ky, kx));
                }
              }
            }
          }
        }
      }
    }
    cached_ = false;
    return din;
  }

  bool has_cache() const override { return cached_; }
  void clear_cache() override {
    cached_ = false;
    in_cache_.resize(0, 0);
    z_cache_.resize(0, 0);
  }

  void collect_params(std::vector<ParamBlock>& blocks) override {
    blocks.push_back(
        {kernels_.data(), dk_.data(), static_cast<int>(kernels_.size())});
    blocks.push_back({bias_.data(), db_.data(), static_cast<int>(bias_.size())});
  }

  void init_weights(std::mt19937_64& gen) override {
    const double bound = glorot_bound(in_.c * kh_ * kw_, oc_ * kh_ * kw_);
    for (Eigen::Index i = 0; i < kernels_.size(); ++i) {
      kernels_(i) = uniform(gen, -bound, bound);
    }
    bias_.setZero();
  }

 private:
  Eigen::Index in_index(int c, int y, int x) const {
    return (static_cast<Eigen::Index>(c) * in_.h + y) * in_.w + x;
  }
  Eigen::Index out_index(int c, int y, int x) const {
    return (static_cast<Eigen::Index>(c) * out_.h + y) * out_.w + x;
  }
  Eigen::Index kernel_index(int oc, int ic, int ky, int kx) const {
    return ((static_cast<Eigen::Index>(oc) * in_.c + ic) * kh_ + ky) * kw_ + kx;
  }

  Eigen::MatrixXd pre_activation(const Eigen::MatrixXd& in) const {
    if (in.rows() != in_.size()) {
      throw DimensionError("Conv2dLayer: input rows do not match shape");
    }
    Eigen::MatrixXd z(out_.size(), in.cols());
    for (Eigen::Index col = 0; col < in.cols(); ++col) {
      for (int oc = 0; oc < oc_; ++oc) {
        for (int oy = 0; oy < out_.h; ++oy) {
          for (int ox = 0; ox < out_.w; ++ox) {
            double acc = bias_(oc);
            for (int ic = 0; ic < in_.c; ++ic) {
              for (int ky = 0; ky < kh_; ++ky) {
                const int iy = oy * sy_ - pad_top_ + ky;
                if (iy < 0 || iy >= in_.h) continue;
                for (int kx = 0; kx < kw_; ++kx) {
                  const int ix = ox * sx_ - pad_left_ + kx;
                  if (ix < 0 || ix >= in_.w) continue;
                  acc += kernels_(kernel_index(oc, ic, ky, kx)) *
                         in(in_index(ic, iy, ix), col);
                }
              }
            }
            z(out_index(oc, oy, ox), col) = acc;
          }
        }
      }
    }
    return z;
  }

  Shape3 in_, out_;
  int oc_, kh_, kw_, sy_, sx_;
  int pad_top_ = 0, pad_left_ = 0;
  Activation act_;
  Eigen::VectorXd kernels_, bias_, dk_, db_;
  Eigen::MatrixXd in_cache_, z_cache_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Shape adapters
// ---------------------------------------------------------------------------

// Flatten and unflatten only relabel the per-sample shape; columns are
// already stored flat in row-major order.
class ReshapeLayer final : public Layer {
 public:
  ReshapeLayer(Shape3 in, Shape3 out, bool flatten) : in_(in), out_(out), flatten_(flatten) {
    if (in.size() != out.size()) {
      throw DimensionError("ReshapeLayer: element counts differ");
    }
  }

  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ReshapeLayer>(in_, out_, flatten_);
  }
  std::string type() const override { return flatten_ ? "flatten" : "unflatten"; }
  Shape3 input_shape() const override { return in_; }
  Shape3 output_shape() const override { return out_; }

  Eigen::MatrixXd infer(const Eigen::MatrixXd& in) const override { return in; }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& in) override {
    cached_ = true;
    return in;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override {
    if (!cached_) throw StateError("ReshapeLayer: backward without forward");
    cached_ = false;
    return grad_out;
  }
  bool has_cache() const override { return cached_; }
  void clear_cache() override { cached_ = false; }

 private:
  Shape3 in_, out_;
  bool flatten_;
  bool cached_ = false;
};

}  // namespace

int conv_out_extent(int in, int stride) { return (in + stride - 1) / stride; }

std::unique_ptr<Layer> make_dense(int in_dim, int out_dim, Activation act) {
  return std::make_unique<DenseLayer>(in_dim, out_dim, act);
}

std::unique_ptr<Layer> make_conv2d(Shape3 in_shape, int out_channels,
                                   int kernel_h, int kernel_w, int stride_y,
                                   int stride_x, Activation act) {
  return std::make_unique<Conv2dLayer>(in_shape, out_channels, kernel_h,
                                       kernel_w, stride_y, stride_x, act);
}

std::unique_ptr<Layer> make_flatten(Shape3 in_shape) {
  return std::make_unique<ReshapeLayer>(in_shape,
                                        Shape3{1, 1, in_shape.size()}, true);
}

std::unique_ptr<Layer> make_unflatten(Shape3 out_shape) {
  return std::make_unique<ReshapeLayer>(Shape3{1, 1, out_shape.size()},
                                        out_shape, false);
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Network::Network(const Network& other) { *this = other; }

Network& Network::operator=(const Network& other) {
  if (this == &other) return *this;
  layers_.clear();
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
  latent_boundary_ = other.latent_boundary_;
  return *this;
}

void Network::add(std::unique_ptr<Layer> layer) {
  if (!layers_.empty()) {
    const Shape3 prev = layers_.back()->output_shape();
    if (!(prev == layer->input_shape())) {
      throw DimensionError("Network: layer shapes do not compose (" +
                           layers_.back()->type() + " -> " + layer->type() +
                           ")");
    }
  }
  layers_.push_back(std::move(layer));
}

void Network::set_latent_boundary(int boundary) {
  if (boundary < 1 || boundary > layer_count()) {
    throw InvalidArgument("Network: latent boundary outside layer list");
  }
  latent_boundary_ = boundary;
}

int Network::input_size() const {
  if (layers_.empty()) throw StateError("Network: empty");
  return layers_.front()->input_shape().size();
}

int Network::output_size() const {
  if (layers_.empty()) throw StateError("Network: empty");
  return layers_.back()->output_shape().size();
}

int Network::latent_size() const {
  if (latent_boundary_ < 1) throw StateError("Network: latent boundary unset");
  return layers_[static_cast<std::size_t>(latent_boundary_) - 1]
      ->output_shape()
      .size();
}

Shape3 Network::input_shape() const {
  if (layers_.empty()) throw StateError("Network: empty");
  return layers_.front()->input_shape();
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& in) {
  if (in.rows() != input_size()) {
    throw DimensionError("Network: input rows do not match first layer");
  }
  Eigen::MatrixXd x = in;
  for (auto& layer : layers_) x = layer->forward(x);
  return x;
}

Eigen::MatrixXd Network::backward(const Eigen::MatrixXd& loss_grad) {
  if (layers_.empty()) throw StateError("Network: empty");
  if (!has_cache()) {
    throw StateError("Network: backward called without forward cache");
  }
  Eigen::MatrixXd g = loss_grad;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
  }
  return g;
}

Eigen::MatrixXd Network::infer(const Eigen::MatrixXd& in) const {
  if (in.rows() != input_size()) {
    throw DimensionError("Network: input rows do not match first layer");
  }
  Eigen::MatrixXd x = in;
  for (const auto& layer : layers_) x = layer->infer(x);
  return x;
}

Eigen::MatrixXd Network::encode(const Eigen::MatrixXd& in) const {
  if (latent_boundary_ < 1) throw StateError("Network: latent boundary unset");
  if (in.rows() != input_size()) {
    throw DimensionError("Network: input rows do not match first layer");
  }
  Eigen::MatrixXd x = in;
  for (int i = 0; i < latent_boundary_; ++i) {
    x = layers_[static_cast<std::size_t>(i)]->infer(x);
  }
  return x;
}

Eigen::MatrixXd Network::decode(const Eigen::MatrixXd& latent) const {
  if (latent_boundary_ < 1) throw StateError("Network: latent boundary unset");
  Eigen::MatrixXd x = latent;
  for (int i = latent_boundary_; i < layer_count(); ++i) {
    x = layers_[static_cast<std::size_t>(i)]->infer(x);
  }
  return x;
}

Tensor Network::forward(const Tensor& in) {
  if (in.size() != input_size()) {
    throw DimensionError("Network: tensor size does not match first layer");
  }
  const Shape3 expect = input_shape();
  if (in.shape.size() == 3 &&
      !(in.shape[0] == expect.c && in.shape[1] == expect.h &&
        in.shape[2] == expect.w)) {
    throw DimensionError("Network: tensor shape does not match first layer");
  }
  const Eigen::MatrixXd out = forward(Eigen::MatrixXd(in.data));
  const Shape3 os = layers_.back()->output_shape();
  Tensor t;
  t.shape = (os.c == 1 && os.h == 1) ? std::vector<int>{os.w}
                                     : std::vector<int>{os.c, os.h, os.w};
  t.data = out.col(0);
  return t;
}

Tensor Network::encode(const Tensor& in) const {
  if (in.size() != input_size()) {
    throw DimensionError("Network: tensor size does not match first layer");
  }
  Tensor t;
  t.shape = {latent_size()};
  t.data = encode(Eigen::MatrixXd(in.data)).col(0);
  return t;
}

std::vector<ParamBlock> Network::param_blocks() {
  std::vector<ParamBlock> blocks;
  for (auto& layer : layers_) layer->collect_params(blocks);
  return blocks;
}

int Network::param_count() const {
  int n = 0;
  for (const auto& layer : layers_) {
    std::vector<ParamBlock> blocks;
    layer->collect_params(blocks);
    for (const auto& b : blocks) n += b.n;
  }
  return n;
}

Eigen::VectorXd Network::parameters() const {
  Eigen::VectorXd theta(param_count());
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    std::vector<ParamBlock> blocks;
    layer->collect_params(blocks);
    for (const auto& b : blocks) {
      for (int i = 0; i < b.n; ++i) theta(at++) = b.value[i];
    }
  }
  return theta;
}

void Network::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != param_count()) {
    throw DimensionError("Network: parameter vector length mismatch");
  }
  Eigen::Index at = 0;
  for (auto& layer : layers_) {
    std::vector<ParamBlock> blocks;
    layer->collect_params(blocks);
    for (auto& b : blocks) {
      for (int i = 0; i < b.n; ++i) b.value[i] = theta(at++);
    }
  }
}

Eigen::VectorXd Network::gradients() const {
  Eigen::VectorXd g(param_count());
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    std::vector<ParamBlock> blocks;
    layer->collect_params(blocks);
    for (const auto& b : blocks) {
      for (int i = 0; i < b.n; ++i) g(at++) = b.grad[i];
    }
  }
  return g;
}

void Network::zero_grad() {
  for (auto& layer : layers_) {
    std::vector<ParamBlock> blocks;
    layer->collect_params(blocks);
    for (auto& b : blocks) std::fill(b.grad, b.grad + b.n, 0.0);
  }
}

void Network::init_weights(std::mt19937_64& gen) {
  for (auto& layer : layers_) layer->init_weights(gen);
}

bool Network::has_cache() const {
  for (const auto& layer : layers_) {
    if (layer->has_cache()) return true;
  }
  return false;
}

void Network::clear_cache() {
  for (auto& layer : layers_) layer->clear_cache();
}

void Network::check_composition() const {
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (!(layers_[i - 1]->output_shape() == layers_[i]->input_shape())) {
      throw DimensionError("Network: layer shapes do not compose");
    }
  }
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw InvalidArgument("TrainConfig: learning_rate must be > 0");
  }
  if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) {
    throw InvalidArgument("TrainConfig: batch_size must be >= 1");
  }
  if (workers < 1) throw InvalidArgument("TrainConfig: workers must be >= 1");
}

double loss_value(LossKind kind, const Eigen::MatrixXd& pred,
                  const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("loss_value: shape mismatch");
  }
  const double batch = static_cast<double>(pred.cols());
  if (kind == LossKind::Mse) {
    return (pred - target).squaredNorm() / batch;
  }
  return (pred - target).cwiseAbs().sum() / batch;
}

Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& pred,
                              const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("loss_gradient: shape mismatch");
  }
  const double batch = static_cast<double>(pred.cols());
  if (kind == LossKind::Mse) {
    return 2.0 / batch * (pred - target);
  }
  return (pred - target)
             .unaryExpr([](double v) {
               return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
             }) /
         batch;
}

// ---------------------------------------------------------------------------
// Adam trainer
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;

  explicit AdamState(int n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void step(Network& net, const TrainConfig& cfg, double lr) {
    ++t;
    auto blocks = net.param_blocks();
    Eigen::Index at = 0;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    for (auto& b : blocks) {
      for (int i = 0; i < b.n; ++i, ++at) {
        const double g = b.grad[i];
        m(at) = cfg.adam_beta1 * m(at) + (1.0 - cfg.adam_beta1) * g;
        v(at) = cfg.adam_beta2 * v(at) + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = m(at) / c1;
        const double vhat = v(at) / c2;
        b.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
    }
  }
};

double full_data_loss(const Network& net, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, LossKind kind) {
  return loss_value(kind, net.infer(inputs), targets);
}

}  // namespace

TrainResult train(Network& net, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.cols() != targets.cols()) {
    throw DimensionError("train: inputs/targets batch count mismatch");
  }
  if (inputs.cols() == 0) throw InsufficientData("train: empty batch");

  const Eigen::VectorXd theta0 = net.parameters();
  const Eigen::Index n_samples = inputs.cols();

  TrainResult best;
  Eigen::VectorXd best_theta;
  bool have_best = false;

  for (int attempt = 0; attempt <= 3; ++attempt) {
    net.set_parameters(theta0);
    const double lr = cfg.learning_rate / std::pow(2.0, attempt);
    std::mt19937_64 gen(mix_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));

    TrainResult result;
    result.lr_retries = attempt;
    result.initial_loss = full_data_loss(net, inputs, targets, cfg.loss);

    AdamState adam(net.param_count());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_samples));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (cfg.shuffle) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[uniform_index(gen, i)]);
        }
      }
      double epoch_loss = 0.0;
      int n_batches = 0;
      for (Eigen::Index start = 0; start < n_samples;
           start += cfg.batch_size) {
        const Eigen::Index count =
            std::min<Eigen::Index>(cfg.batch_size, n_samples - start);
        Eigen::MatrixXd bin(inputs.rows(), count);
        Eigen::MatrixXd btg(targets.rows(), count);
        for (Eigen::Index j = 0; j < count; ++j) {
          bin.col(j) = inputs.col(order[static_cast<std::size_t>(start + j)]);
          btg.col(j) = targets.col(order[static_cast<std::size_t>(start + j)]);
        }

        net.zero_grad();
        double batch_loss_sum = 0.0;
        const Eigen::Index shard = (count + cfg.workers - 1) / cfg.workers;
        for (Eigen::Index s = 0; s < count; s += shard) {
          const Eigen::Index len = std::min(shard, count - s);
          const Eigen::MatrixXd pred = net.forward(bin.middleCols(s, len));
          const Eigen::MatrixXd& tgt = btg.middleCols(s, len);
          if (cfg.loss == LossKind::Mse) {
            batch_loss_sum += (pred - tgt).squaredNorm();
            net.backward(2.0 / static_cast<double>(count) * (pred - tgt));
          } else {
            batch_loss_sum += (pred - tgt).cwiseAbs().sum();
            net.backward(((pred - tgt).unaryExpr([](double v) {
                           return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                         })) /
                         static_cast<double>(count));
          }
        }
        adam.step(net, cfg, lr);
        epoch_loss += batch_loss_sum / static_cast<double>(count);
        ++n_batches;
      }
      epoch_loss /= static_cast<double>(n_batches);
      if (!std::isfinite(epoch_loss)) {
        throw DivergenceError(
            "train: loss became non-finite at epoch " + std::to_string(epoch),
            epoch);
      }
      result.loss_history.push_back(epoch_loss);
    }

    result.final_loss = full_data_loss(net, inputs, targets, cfg.loss);
    if (!std::isfinite(result.final_loss)) {
      throw DivergenceError("train: final loss non-finite", cfg.epochs - 1);
    }

    if (!have_best || result.final_loss < best.final_loss) {
      best = result;
      best_theta = net.parameters();
      have_best = true;
    }
    if (result.final_loss <= result.initial_loss) break;
  }

  net.set_parameters(best_theta);
  net.clear_cache();
  return best;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

Network build_cae(int image_h, int image_w, int latent_dim,
                  const TrainConfig& cfg, const CaeArch& arch) {
  if (image_h < 1 || image_w < 1 || latent_dim < 1) {
    throw InvalidArgument("build_cae: dimensions must be positive");
  }
  const Activation leaky{ActKind::LeakyRelu, arch.leaky_alpha};
  const Shape3 in{1, image_h, image_w};
  Network net;
  net.add(make_conv2d(in, arch.conv1_filters, arch.kernel, arch.kernel,
                      arch.stride, arch.stride, leaky));
  const Shape3 c1 = net.layer(0).output_shape();
  net.add(make_conv2d(c1, arch.conv2_filters, arch.kernel, arch.kernel,
                      arch.stride, arch.stride, leaky));
  const Shape3 c2 = net.layer(1).output_shape();
  net.add(make_flatten(c2));
  net.add(make_dense(c2.size(), latent_dim, Activation{ActKind::Linear}));
  net.add(make_dense(latent_dim, c2.size(), leaky));
  net.add(make_dense(c2.size(), image_h * image_w, Activation{ActKind::Sigmoid}));
  net.add(make_unflatten(in));
  net.set_latent_boundary(4);
  std::mt19937_64 gen(cfg.seed);
  net.init_weights(gen);
  return net;
}

Network build_ae(int input_dim, int lift_dim, const TrainConfig& cfg) {
  if (input_dim < 1) throw InvalidArgument("build_ae: input_dim must be >= 1");
  if (lift_dim < input_dim + 1) {
    throw InvalidArgument(
        "build_ae: lift_dim must be at least input_dim + 1 (got " +
        std::to_string(lift_dim) + " for input " + std::to_string(input_dim) +
        ")");
  }
  Network net;
  net.add(make_dense(input_dim, lift_dim, Activation{ActKind::Tanh}));
  net.add(make_dense(lift_dim, input_dim, Activation{ActKind::Linear}));
  net.set_latent_boundary(1);
  std::mt19937_64 gen(cfg.seed);
  net.init_weights(gen);
  return net;
}

// ---------------------------------------------------------------------------
// Standardizer
// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.cols() < 1) throw InsufficientData("Standardizer: no samples");
  Standardizer s;
  s.mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - s.mean;
  s.stddev = (centered.array().square().rowwise().sum() /
              static_cast<double>(samples.cols()))
                 .sqrt()
                 .matrix();
  for (Eigen::Index i = 0; i < s.stddev.size(); ++i) {
    if (s.stddev(i) < 1e-12) s.stddev(i) = 1.0;  // constant channel
  }
  return s;
}

Standardizer Standardizer::identity(int dim) {
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.stddev = Eigen::VectorXd::Ones(dim);
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) {
    throw DimensionError("Standardizer: dimension mismatch");
  }
  return (x.colwise() - mean).array().colwise() / stddev.array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) {
    throw DimensionError("Standardizer: dimension mismatch");
  }
  return ((x.array().colwise() * stddev.array()).matrix().colwise() + mean);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

json layer_to_json(const Layer& layer) {
  json j;
  j["type"] = layer.type();
  const Shape3 in = layer.input_shape();
  const Shape3 out = layer.output_shape();
  if (layer.type() == "dense") {
    j["in"] = in.w;
    j["out"] = out.w;
  } else if (layer.type() == "conv2d") {
    const auto& conv = dynamic_cast<const Conv2dLayer&>(layer);
    j["in"] = {in.c, in.h, in.w};
    j["out_channels"] = out.c;
    j["kernel"] = {conv.kernel_h(), conv.kernel_w()};
    j["stride"] = {conv.stride_y(), conv.stride_x()};
  } else if (layer.type() == "flatten") {
    j["in"] = {in.c, in.h, in.w};
  } else if (layer.type() == "unflatten") {
    j["out"] = {out.c, out.h, out.w};
  }
  if (const Activation* act = layer.activation()) {
    j["activation"] = {{"kind", act_name(act->kind)}, {"alpha", act->alpha}};
  }
  return j;
}

std::unique_ptr<Layer> layer_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  Activation act;
  if (j.contains("activation")) {
    act.kind = act_from_name(j["activation"].at("kind").get<std::string>());
    act.alpha = j["activation"].value("alpha", 0.1);
  }
  if (type == "dense") {
    return make_dense(j.at("in").get<int>(), j.at("out").get<int>(), act);
  }
  if (type == "conv2d") {
    const auto in = j.at("in").get<std::vector<int>>();
    const auto kernel = j.at("kernel").get<std::vector<int>>();
    const auto stride = j.at("stride").get<std::vector<int>>();
    return make_conv2d({in.at(0), in.at(1), in.at(2)},
                       j.at("out_channels").get<int>(), kernel.at(0),
                       kernel.at(1), stride.at(0), stride.at(1), act);
  }
  if (type == "flatten") {
    const auto in = j.at("in").get<std::vector<int>>();
    return make_flatten({in.at(0), in.at(1), in.at(2)});
  }
  if (type == "unflatten") {
    const auto out = j.at("out").get<std::vector<int>>();
    return make_unflatten({out.at(0), out.at(1), out.at(2)});
  }
  throw IoError("model file: unknown layer type " + type);
}

}  // namespace

std::string serialize_model(const ModelFile& model) {
  json j;
  j["version"] = 1;
  j["kind"] = model.kind;
  j["seed"] = model.seed;
  j["latent_boundary"] = model.network.latent_boundary();
  j["layers"] = json::array();
  for (int i = 0; i < model.network.layer_count(); ++i) {
    j["layers"].push_back(layer_to_json(model.network.layer(i)));
  }
  j["normalization"] = {
      {"mean", std::vector<double>(model.input_norm.mean.data(),
                                   model.input_norm.mean.data() +
                                       model.input_norm.mean.size())},
      {"stddev", std::vector<double>(model.input_norm.stddev.data(),
                                     model.input_norm.stddev.data() +
                                         model.input_norm.stddev.size())}};
  j["dtype"] = "float64-le";
  const Eigen::VectorXd theta = model.network.parameters();
  j["params_b64"] = base64_encode_doubles(
      std::vector<double>(theta.data(), theta.data() + theta.size()));
  return j.dump(2) + "\n";
}

ModelFile deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("model file: bad JSON: ") + e.what());
  }
  if (!j.contains("version")) throw IoError("model file: missing version");
  if (j["version"].get<int>() != 1) {
    throw IoError("model file: unsupported version");
  }
  ModelFile model;
  model.kind = j.value("kind", "");
  model.seed = j.value("seed", std::uint64_t{0});
  for (const auto& lj : j.at("layers")) {
    model.network.add(layer_from_json(lj));
  }
  model.network.set_latent_boundary(j.at("latent_boundary").get<int>());
  const auto mean = j.at("normalization").at("mean").get<std::vector<double>>();
  const auto sd = j.at("normalization").at("stddev").get<std::vector<double>>();
  model.input_norm.mean =
      Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  model.input_norm.stddev =
      Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  const auto params = base64_decode_doubles(j.at("params_b64").get<std::string>());
  model.network.set_parameters(Eigen::Map<const Eigen::VectorXd>(
      params.data(), static_cast<Eigen::Index>(params.size())));
  return model;
}

}  // namespace dkrc

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

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dkrc {

// ---------------------------------------------------------------------------
// Tensors and activations
// ---------------------------------------------------------------------------

// Row-major flat tensor; the batch APIs below flatten each sample into
// one matrix column in this order.
struct Tensor {
  std::vector<int> shape;
  Eigen::VectorXd data;

  static Tensor zeros(std::vector<int> shape);
  static Tensor from_vector(const Eigen::VectorXd& v);
  int size() const;
};

enum class ActKind { Linear, Tanh, LeakyRelu, Sigmoid };

struct Activation {
  ActKind kind = ActKind::Linear;
  double alpha = 0.1;  // LeakyRelu slope, in (0, 1)

  Eigen::MatrixXd apply(const Eigen::MatrixXd& z) const;
  // Derivative with respect to the pre-activation, evaluated at z.
  Eigen::MatrixXd derivative(const Eigen::MatrixXd& z) const;
  void validate() const;
};

std::string act_name(ActKind kind);
ActKind act_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

// Feature-map shape of one sample; dense layers use (1, 1, n).
struct Shape3 {
  int c = 1;
  int h = 1;
  int w = 1;
  int size() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
};

struct ParamBlock {
  double* value;
  double* grad;
  int n;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string type() const = 0;

  virtual Shape3 input_shape() const = 0;
  virtual Shape3 output_shape() const = 0;

  // Inference path; never caches.
  virtual Eigen::MatrixXd infer(const Eigen::MatrixXd& in) const = 0;
  // Training path; caches pre-activations for backward.
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& in) = 0;
  // Consumes the cache; returns dL/d(input), accumulates parameter grads.
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) = 0;
  virtual bool has_cache() const { return false; }
  virtual void clear_cache() {}

  virtual void collect_params(std::vector<ParamBlock>& blocks) {}
  virtual void init_weights(std::mt19937_64&) {}
  virtual const Activation* activation() const { return nullptr; }
};

std::unique_ptr<Layer> make_dense(int in_dim, int out_dim, Activation act);
std::unique_ptr<Layer> make_conv2d(Shape3 in_shape, int out_channels,
                                   int kernel_h, int kernel_w, int stride_y,
                                   int stride_x, Activation act);
std::unique_ptr<Layer> make_flatten(Shape3 in_shape);
std::unique_ptr<Layer> make_unflatten(Shape3 out_shape);

// 'Same' padding output extent: ceil(in / stride).
int conv_out_extent(int in, int stride);

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer);
  void set_latent_boundary(int boundary);
  int latent_boundary() const { return latent_boundary_; }

  int layer_count() const { return static_cast<int>(layers_.size()); }
  const Layer& layer(int i) const { return *layers_[static_cast<std::size_t>(i)]; }

  int input_size() const;
  int output_size() const;
  int latent_size() const;
  Shape3 input_shape() const;

  // Batch interfaces: one flattened sample per column.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& in);   // caches
  Eigen::MatrixXd backward(const Eigen::MatrixXd& loss_grad);  // needs cache
  Eigen::MatrixXd infer(const Eigen::MatrixXd& in) const;
  Eigen::MatrixXd encode(const Eigen::MatrixXd& in) const;
  Eigen::MatrixXd decode(const Eigen::MatrixXd& latent) const;

  // Single-sample convenience used by the public Tensor API.
  Tensor forward(const Tensor& in);
  Tensor encode(const Tensor& in) const;

  std::vector<ParamBlock> param_blocks();
  int param_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  Eigen::VectorXd gradients() const;
  void zero_grad();
  void init_weights(std::mt19937_64& gen);

  bool has_cache() const;
  void clear_cache();

 private:
  void check_composition() const;
  std::vector<std::unique_ptr<Layer>> layers_;
  int latent_boundary_ = 0;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class LossKind { Mse, Mae };

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Mse;
  bool shuffle = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Simulated data-parallel workers; gradients are accumulated shard by
  // shard in fixed order, so results are reproducible per worker count.
  int workers = 1;

  void validate() const;
};

// Loss over a batch: sum over feature dims, mean over samples.
double loss_value(LossKind kind, const Eigen::MatrixXd& pred,
                  const Eigen::MatrixXd& target);
Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& pred,
                              const Eigen::MatrixXd& target);

struct TrainResult {
  std::vector<double> loss_history;  // per-epoch mean minibatch loss
  double initial_loss = 0.0;         // full-data loss before training
  double final_loss = 0.0;           // full-data loss after training
  int lr_retries = 0;                // halvings applied after regressions
};

// Trains in place. If the full-data loss got worse, restarts from the
// initial weights with a halved learning rate, up to 3 times, keeping
// the best attempt. Throws DivergenceError when the loss turns NaN.
TrainResult train(Network& net, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

struct CaeArch {
  int conv1_filters = 8;
  int conv2_filters = 16;
  int kernel = 3;
  int stride = 2;
  double leaky_alpha = 0.1;
};

// Convolutional autoencoder for single-channel images: two strided
// LeakyReLU convolutions, flatten, linear dense bottleneck; dense
// decoder finishing in a Sigmoid back to pixel space.
Network build_cae(int image_h, int image_w, int latent_dim,
                  const TrainConfig& cfg, const CaeArch& arch = {});

// Lifting autoencoder: single tanh dense encoder to lift_dim, linear
// dense decoder back to input_dim. Requires lift_dim >= input_dim + 1.
Network build_ae(int input_dim, int lift_dim, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Input standardization
// ---------------------------------------------------------------------------

// Per-channel zero-mean/unit-variance transform; statistics are stored
// with trained models so inference is self-contained.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  static Standardizer fit(const Eigen::MatrixXd& samples);  // columns = samples
  static Standardizer identity(int dim);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const;
  int dim() const { return static_cast<int>(mean.size()); }
};

// ---------------------------------------------------------------------------
// Model persistence (JSON header + base64 little-endian float64 blob)
// ---------------------------------------------------------------------------

struct ModelFile {
  Network network;
  Standardizer input_norm;  // identity when unused
  std::uint64_t seed = 0;
  std::string kind;  // "ae", "cae", ...
};

std::string serialize_model(const ModelFile& model);
ModelFile deserialize_model(const std::string& text);

}  // namespace dkrc

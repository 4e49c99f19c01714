#pragma once

// TPN-style temporal convolution encoder, nonlinear projection head and linear
// classifier, with hand-written backward passes and an Adam optimizer.
//
// Batched activations are stored row-major as [B * T x F]: the rows of sample
// b occupy [b * T, (b + 1) * T), which is also the contiguous [B x T x F]
// tensor layout. Inputs follow the same convention as [B x W x C].

#include "clustercl/common.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clustercl {

struct EncoderConfig {
  std::vector<int> conv_filters = {32, 64, 96};
  std::vector<int> kernel_sizes = {24, 16, 8};
  double dropout_rate = 0.1;

  void validate() const;
  int output_dim() const { return conv_filters.back(); }
  // Shortest window the valid-padding convolutions accept.
  int min_window() const;
};

struct ProjectionConfig {
  std::vector<int> layer_dims = {96, 96, 96};

  void validate() const;
  int output_dim() const { return layer_dims.back(); }
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const ProjectionConfig& c);
void from_json(const nlohmann::json& j, ProjectionConfig& c);

template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int in, int out, Rng& rng);

  // x: [B x in] -> [B x out]
  Matrix<T> forward(const Matrix<T>& x);
  // Accumulates parameter gradients when trainable; returns d/dx if requested.
  Matrix<T> backward(const Matrix<T>& dy, bool need_input_grad);

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  const Param<T>& weight() const { return weight_; }
  const Param<T>& bias() const { return bias_; }
  int in_dim() const { return static_cast<int>(weight_.value.cols()); }
  int out_dim() const { return static_cast<int>(weight_.value.rows()); }

 private:
  Param<T> weight_;  // [out x in]
  Param<T> bias_;    // [1 x out]
  Matrix<T> input_;
};

template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::string name, int in_channels, int filters, int kernel, Rng& rng);

  // x: contiguous [B x len x in_channels] -> [B * (len - kernel + 1) x filters]
  Matrix<T> forward(const T* x, Eigen::Index batch, Eigen::Index len);
  // dy: [B * out_len x filters]; x must be the buffer passed to forward.
  // Returns d/dx as [B * len x in_channels] when requested, else an empty matrix.
  Matrix<T> backward(const T* x, const Matrix<T>& dy, bool need_input_grad);

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  const Param<T>& weight() const { return weight_; }
  const Param<T>& bias() const { return bias_; }
  int kernel() const { return kernel_; }
  int in_channels() const { return in_channels_; }
  int filters() const { return static_cast<int>(weight_.value.rows()); }

 private:
  Param<T> weight_;  // [filters x kernel * in_channels], tap-major
  Param<T> bias_;    // [1 x filters]
  int kernel_ = 0;
  int in_channels_ = 0;
  Eigen::Index batch_ = 0;
  Eigen::Index len_ = 0;
};

enum class FreezeMode { linear_eval, fine_tune };
FreezeMode parse_freeze_mode(const std::string& s);
std::string to_string(FreezeMode m);

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, int in_channels, Rng& rng);

  // x: contiguous [B x W x C]. Dropout draws from `rng` only when `train`.
  Matrix<T> forward(std::span<const T> x, Eigen::Index batch, Eigen::Index window, bool train, Rng* rng = nullptr);
  // dh: [B x D_enc]. Propagates only as deep as the lowest trainable block
  // unless the input gradient is requested.
  Matrix<T> backward(const Matrix<T>& dh, bool need_input_grad = false);

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  // Freezes every block below the trailing `count` parameterized blocks.
  void set_trainable_blocks(int count);
  std::size_t trainable_parameter_count() const;

  const EncoderConfig& config() const { return cfg_; }
  int in_channels() const { return in_channels_; }
  int output_dim() const { return cfg_.output_dim(); }
  std::vector<Conv1d<T>>& blocks() { return convs_; }
  const std::vector<Conv1d<T>>& blocks() const { return convs_; }

 private:
  EncoderConfig cfg_;
  int in_channels_ = 0;
  std::vector<Conv1d<T>> convs_;
  std::vector<T> input_;
  std::vector<Matrix<T>> acts_;   // post ReLU+dropout per block
  std::vector<Matrix<T>> masks_;  // inverted-dropout scale per block (empty in eval)
  Matrix<Eigen::Index> argmax_;   // [B x F] time index of the pooled maximum
  std::vector<Eigen::Index> lens_;
  Eigen::Index batch_ = 0;
};

template <typename T>
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(const ProjectionConfig& cfg, int in_dim, Rng& rng);

  // Un-normalized head output z.
  Matrix<T> forward(const Matrix<T>& h);
  Matrix<T> backward(const Matrix<T>& dz);

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  const ProjectionConfig& config() const { return cfg_; }
  std::vector<Dense<T>>& layers() { return layers_; }

 private:
  ProjectionConfig cfg_;
  std::vector<Dense<T>> layers_;
  std::vector<Matrix<T>> hidden_;  // post-ReLU outputs for backward
};

// Row-wise L2 normalization; throws DegenerateRepresentation on a zero row.
template <typename T>
Matrix<T> l2_normalize_rows(const Matrix<T>& z);
// Given z and d/dp for p = z / |z|, returns d/dz.
template <typename T>
Matrix<T> l2_normalize_backward(const Matrix<T>& z, const Matrix<T>& dp);

template <typename T>
class LinearClassifier {
 public:
  LinearClassifier() = default;
  LinearClassifier(int in_dim, int num_classes, Rng& rng);

  Matrix<T> forward(const Matrix<T>& h) { return dense_.forward(h); }
  Matrix<T> backward(const Matrix<T>& dlogits, bool need_input_grad) { return dense_.backward(dlogits, need_input_grad); }
  std::vector<Param<T>*> parameters() { return {&dense_.weight(), &dense_.bias()}; }
  int num_classes() const { return dense_.out_dim(); }
  Dense<T>& dense() { return dense_; }

 private:
  Dense<T> dense_;
};

// Applies the downstream freezing rule: linear_eval trains no encoder
// parameters; fine_tune unfreezes the last two conv blocks.
template <typename T>
void apply_freeze_policy(Encoder<T>& encoder, FreezeMode mode);

template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Updates trainable parameters from their accumulated gradients.
  void step(const std::vector<Param<T>*>& params);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

// Mean softmax cross-entropy over rows; returns d/dlogits (already divided by B).
template <typename T>
T softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> targets, Matrix<T>* dlogits);

// Encoder + projection head, as produced by pre-training.
struct Checkpoint {
  Encoder<float> encoder;
  ProjectionHead<float> head;
  nlohmann::json config;  // experiment config that produced it
  int epoch = 0;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Eval-mode features [n x D_enc] for a contiguous [n x W x C] buffer, in chunks.
MatrixF encode_all(Encoder<float>& encoder, std::span<const float> x, Eigen::Index n, Eigen::Index window,
                   Eigen::Index chunk = 256);

}  // namespace clustercl

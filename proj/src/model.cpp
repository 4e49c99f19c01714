#include "clustercl/model.hpp"

#include "clustercl/archive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clustercl {

void EncoderConfig::validate() const {
  if (conv_filters.empty() || conv_filters.size() != kernel_sizes.size()) {
    throw ConfigError("model: conv_filters and kernel_sizes must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    if (conv_filters[i] < 1 || kernel_sizes[i] < 1) throw ConfigError("model: filters and kernels must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("model: dropout_rate must lie in [0, 1)");
}

int EncoderConfig::min_window() const {
  int w = 1;
  for (int k : kernel_sizes) w += k - 1;
  return w;
}

void ProjectionConfig::validate() const {
  if (layer_dims.empty()) throw ConfigError("model: projection layer_dims must be non-empty");
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("model: projection dims must be positive");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"conv_filters", c.conv_filters}, {"kernel_sizes", c.kernel_sizes}, {"dropout_rate", c.dropout_rate}};
}
void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("conv_filters").get_to(c.conv_filters);
  j.at("kernel_sizes").get_to(c.kernel_sizes);
  j.at("dropout_rate").get_to(c.dropout_rate);
}
void to_json(nlohmann::json& j, const ProjectionConfig& c) { j = {{"layer_dims", c.layer_dims}}; }
void from_json(const nlohmann::json& j, ProjectionConfig& c) { j.at("layer_dims").get_to(c.layer_dims); }

FreezeMode parse_freeze_mode(const std::string& s) {
  if (s == "linear_eval" || s == "linear") return FreezeMode::linear_eval;
  if (s == "fine_tune" || s == "finetune") return FreezeMode::fine_tune;
  throw ConfigError("unknown eval mode '" + s + "' (expected linear|finetune)");
}

std::string to_string(FreezeMode m) { return m == FreezeMode::linear_eval ? "linear_eval" : "fine_tune"; }

namespace {

template <typename T>
Matrix<T> glorot(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
  return m;
}

template <typename T>
Param<T> make_param(std::string name, Matrix<T> value) {
  Param<T> p;
  p.name = std::move(name);
  p.value = std::move(value);
  p.zero_grad();
  return p;
}

}  // namespace

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::string name, int in, int out, Rng& rng)
    : weight_(make_param<T>(name + ".weight", glorot<T>(out, in, in, out, rng))),
      bias_(make_param<T>(name + ".bias", Matrix<T>::Zero(1, out))) {}

template <typename T>
Matrix<T> Dense<T>::forward(const Matrix<T>& x) {
  if (x.cols() != weight_.value.cols()) throw std::invalid_argument("dense: input width mismatch");
  input_ = x;
  Matrix<T> y = x * weight_.value.transpose();
  y.rowwise() += bias_.value.row(0);
  return y;
}

template <typename T>
Matrix<T> Dense<T>::backward(const Matrix<T>& dy, bool need_input_grad) {
  if (weight_.trainable) {
    weight_.grad.noalias() += dy.transpose() * input_;
    bias_.grad += dy.colwise().sum();
  }
  if (!need_input_grad) return {};
  return dy * weight_.value;
}

// ---------------------------------------------------------------- Conv1d

template <typename T>
Conv1d<T>::Conv1d(std::string name, int in_channels, int filters, int kernel, Rng& rng)
    : weight_(make_param<T>(name + ".weight",
                            glorot<T>(filters, kernel * in_channels, kernel * in_channels, kernel * filters, rng))),
      bias_(make_param<T>(name + ".bias", Matrix<T>::Zero(1, filters))),
      kernel_(kernel),
      in_channels_(in_channels) {}

template <typename T>
Matrix<T> Conv1d<T>::forward(const T* x, Eigen::Index batch, Eigen::Index len) {
  using InMap = Eigen::Map<const Matrix<T>, 0, Eigen::OuterStride<>>;
  const Eigen::Index out_len = len - kernel_ + 1;
  if (out_len < 1) throw std::invalid_argument("conv1d: input shorter than kernel");
  batch_ = batch;
  len_ = len;
  const Eigen::Index F = filters();
  Matrix<T> y(batch * out_len, F);
  for (Eigen::Index b = 0; b < batch; ++b) {
    InMap cols(x + b * len * in_channels_, out_len, kernel_ * in_channels_, Eigen::OuterStride<>(in_channels_));
    y.middleRows(b * out_len, out_len).noalias() = cols * weight_.value.transpose();
  }
  y.rowwise() += bias_.value.row(0);
  return y;
}

template <typename T>
Matrix<T> Conv1d<T>::backward(const T* x, const Matrix<T>& dy, bool need_input_grad) {
  using InMap = Eigen::Map<const Matrix<T>, 0, Eigen::OuterStride<>>;
  const Eigen::Index out_len = len_ - kernel_ + 1;
  const Eigen::Index span = kernel_ * in_channels_;
  Matrix<T> dx;
  if (need_input_grad) dx = Matrix<T>::Zero(batch_ * len_, in_channels_);
  Matrix<T> dcols;
  for (Eigen::Index b = 0; b < batch_; ++b) {
    const auto dyb = dy.middleRows(b * out_len, out_len);
    if (weight_.trainable) {
      InMap cols(x + b * len_ * in_channels_, out_len, span, Eigen::OuterStride<>(in_channels_));
      weight_.grad.noalias() += dyb.transpose() * cols;
    }
    if (need_input_grad) {
      dcols.noalias() = dyb * weight_.value;
      T* base = dx.data() + b * len_ * in_channels_;
      for (Eigen::Index t = 0; t < out_len; ++t) {
        Eigen::Map<Vector<T>>(base + t * in_channels_, span) += dcols.row(t).transpose();
      }
    }
  }
  if (weight_.trainable) bias_.grad += dy.colwise().sum();
  return dx;
}

// ---------------------------------------------------------------- Encoder

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg, int in_channels, Rng& rng) : cfg_(cfg), in_channels_(in_channels) {
  cfg_.validate();
  if (in_channels < 1) throw ConfigError("model: encoder needs at least one input channel");
  int c = in_channels;
  for (std::size_t l = 0; l < cfg_.conv_filters.size(); ++l) {
    convs_.emplace_back("encoder.conv" + std::to_string(l), c, cfg_.conv_filters[l], cfg_.kernel_sizes[l], rng);
    c = cfg_.conv_filters[l];
  }
}

template <typename T>
Matrix<T> Encoder<T>::forward(std::span<const T> x, Eigen::Index batch, Eigen::Index window, bool train, Rng* rng) {
  if (static_cast<Eigen::Index>(x.size()) != batch * window * in_channels_) {
    throw std::invalid_argument("encode: input is not [B x W x " + std::to_string(in_channels_) + "]");
  }
  if (window < cfg_.min_window()) {
    throw std::invalid_argument("encode: window " + std::to_string(window) + " shorter than receptive field " +
                                std::to_string(cfg_.min_window()));
  }
  const bool dropout = train && cfg_.dropout_rate > 0.0;
  if (dropout && rng == nullptr) throw std::invalid_argument("encode: train mode with dropout needs an rng");
  batch_ = batch;
  input_.assign(x.begin(), x.end());
  acts_.assign(convs_.size(), {});
  masks_.assign(convs_.size(), {});
  lens_.assign(convs_.size() + 1, 0);
  lens_[0] = window;

  const T keep_scale = static_cast<T>(1.0 / (1.0 - cfg_.dropout_rate));
  std::bernoulli_distribution drop(cfg_.dropout_rate);
  const T* cur = input_.data();
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    Matrix<T> a = convs_[l].forward(cur, batch, lens_[l]).cwiseMax(T(0));
    if (dropout) {
      Matrix<T> mask(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = drop(*rng) ? T(0) : keep_scale;
      a.array() *= mask.array();
      masks_[l] = std::move(mask);
    }
    acts_[l] = std::move(a);
    lens_[l + 1] = lens_[l] - convs_[l].kernel() + 1;
    cur = acts_[l].data();
  }

  const Matrix<T>& last = acts_.back();
  const Eigen::Index len = lens_.back();
  const Eigen::Index F = last.cols();
  Matrix<T> h(batch, F);
  argmax_.resize(batch, F);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index f = 0; f < F; ++f) {
      Eigen::Index best = 0;
      T best_v = last(b * len, f);
      for (Eigen::Index t = 1; t < len; ++t) {
        const T v = last(b * len + t, f);
        if (v > best_v) {
          best_v = v;
          best = t;
        }
      }
      h(b, f) = best_v;
      argmax_(b, f) = best;
    }
  }
  return h;
}

template <typename T>
Matrix<T> Encoder<T>::backward(const Matrix<T>& dh, bool need_input_grad) {
  const auto L = static_cast<int>(convs_.size());
  int lowest = L;
  for (int l = 0; l < L; ++l) {
    if (convs_[static_cast<std::size_t>(l)].weight().trainable) {
      lowest = l;
      break;
    }
  }
  if (need_input_grad) lowest = 0;
  if (lowest == L) return {};

  const Eigen::Index len = lens_.back();
  Matrix<T> d = Matrix<T>::Zero(acts_.back().rows(), acts_.back().cols());
  for (Eigen::Index b = 0; b < batch_; ++b) {
    for (Eigen::Index f = 0; f < d.cols(); ++f) d(b * len + argmax_(b, f), f) = dh(b, f);
  }
  for (int l = L - 1; l >= lowest; --l) {
    const auto k = static_cast<std::size_t>(l);
    if (masks_[k].size() > 0) d.array() *= masks_[k].array();
    d = (acts_[k].array() > T(0)).select(d, T(0));
    const T* x = l == 0 ? input_.data() : acts_[k - 1].data();
    const bool need_in = l > lowest || need_input_grad;
    d = convs_[k].backward(x, d, need_in);
  }
  return need_input_grad ? d : Matrix<T>{};
}

template <typename T>
std::vector<Param<T>*> Encoder<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight());
    out.push_back(&c.bias());
  }
  return out;
}

template <typename T>
std::vector<const Param<T>*> Encoder<T>::parameters() const {
  std::vector<const Param<T>*> out;
  for (const auto& c : convs_) {
    out.push_back(&c.weight());
    out.push_back(&c.bias());
  }
  return out;
}

template <typename T>
void Encoder<T>::set_trainable_blocks(int count) {
  const auto L = static_cast<int>(convs_.size());
  for (int l = 0; l < L; ++l) {
    const bool on = l >= L - count;
    convs_[static_cast<std::size_t>(l)].weight().trainable = on;
    convs_[static_cast<std::size_t>(l)].bias().trainable = on;
  }
}

template <typename T>
std::size_t Encoder<T>::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) {
    if (p->trainable) n += static_cast<std::size_t>(p->value.size());
  }
  return n;
}

template <typename T>
void apply_freeze_policy(Encoder<T>& encoder, FreezeMode mode) {
  encoder.set_trainable_blocks(mode == FreezeMode::linear_eval ? 0 : 2);
}

// ---------------------------------------------------------------- ProjectionHead

template <typename T>
ProjectionHead<T>::ProjectionHead(const ProjectionConfig& cfg, int in_dim, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int d = in_dim;
  for (std::size_t i = 0; i < cfg_.layer_dims.size(); ++i) {
    layers_.emplace_back("head.dense" + std::to_string(i), d, cfg_.layer_dims[i], rng);
    d = cfg_.layer_dims[i];
  }
}

template <typename T>
Matrix<T> ProjectionHead<T>::forward(const Matrix<T>& h) {
  hidden_.assign(layers_.size(), {});
  Matrix<T> x = h;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x);
    if (i + 1 < layers_.size()) {
      x = x.cwiseMax(T(0));
      hidden_[i] = x;
    }
  }
  return x;
}

template <typename T>
Matrix<T> ProjectionHead<T>::backward(const Matrix<T>& dz) {
  Matrix<T> d = dz;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) d = (hidden_[i].array() > T(0)).select(d, T(0));
    d = layers_[i].backward(d, true);
  }
  return d;
}

template <typename T>
std::vector<Param<T>*> ProjectionHead<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

template <typename T>
std::vector<const Param<T>*> ProjectionHead<T>::parameters() const {
  std::vector<const Param<T>*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

template <typename T>
Matrix<T> l2_normalize_rows(const Matrix<T>& z) {
  Matrix<T> p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const T n = z.row(i).norm();
    if (!(n > T(0))) throw DegenerateRepresentation("projection row " + std::to_string(i) + " is the zero vector");
    p.row(i) = z.row(i) / n;
  }
  return p;
}

template <typename T>
Matrix<T> l2_normalize_backward(const Matrix<T>& z, const Matrix<T>& dp) {
  Matrix<T> dz(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const T n = z.row(i).norm();
    const auto p = z.row(i) / n;
    dz.row(i) = (dp.row(i) - p * p.dot(dp.row(i))) / n;
  }
  return dz;
}

template <typename T>
LinearClassifier<T>::LinearClassifier(int in_dim, int num_classes, Rng& rng) : dense_("classifier", in_dim, num_classes, rng) {
  if (num_classes < 2) throw ConfigError("classifier needs at least two classes");
}

// ---------------------------------------------------------------- Adam

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T step = static_cast<T>(lr_ / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    if (!p.trainable) continue;
    m_[i] = b1 * m_[i] + (T(1) - b1) * p.grad;
    v_[i] = b2 * v_[i] + (T(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
  }
}

template <typename T>
T softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> targets, Matrix<T>* dlogits) {
  const Eigen::Index B = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != B) throw std::invalid_argument("cross-entropy: target count mismatch");
  if (dlogits) dlogits->resize(B, logits.cols());
  T total = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const T mx = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - mx).exp();
    const T sum = e.sum();
    const int y = targets[static_cast<std::size_t>(i)];
    total += std::log(sum) - (logits(i, y) - mx);
    if (dlogits) {
      dlogits->row(i) = e / sum / static_cast<T>(B);
      (*dlogits)(i, y) -= T(1) / static_cast<T>(B);
    }
  }
  return total / static_cast<T>(B);
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  TensorArchive ar;
  auto& m = ar.meta();
  m["format"] = "clustercl.checkpoint/1";
  m["config_hash"] = ckpt.config_hash;
  m["epoch"] = ckpt.epoch;
  m["in_channels"] = ckpt.encoder.in_channels();
  m["encoder"] = ckpt.encoder.config();
  m["projection"] = ckpt.head.config();
  m["config"] = ckpt.config;
  auto put = [&](const Param<float>& p) {
    ar.put_f32(p.name, {p.value.rows(), p.value.cols()}, std::span<const float>(p.value.data(), static_cast<std::size_t>(p.value.size())));
  };
  for (const auto* p : ckpt.encoder.parameters()) put(*p);
  for (const auto* p : ckpt.head.parameters()) put(*p);
  ar.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint '" + path.string() + "' does not exist");
  const TensorArchive ar = TensorArchive::load(path);
  const auto& m = ar.meta();
  if (m.value("format", "") != "clustercl.checkpoint/1") throw ConfigError("'" + path.string() + "' is not a checkpoint");
  Checkpoint ck;
  ck.config_hash = m.at("config_hash").get<std::string>();
  ck.epoch = m.at("epoch").get<int>();
  ck.config = m.at("config");
  Rng rng(0);
  const auto enc_cfg = m.at("encoder").get<EncoderConfig>();
  const auto proj_cfg = m.at("projection").get<ProjectionConfig>();
  ck.encoder = Encoder<float>(enc_cfg, m.at("in_channels").get<int>(), rng);
  ck.head = ProjectionHead<float>(proj_cfg, enc_cfg.output_dim(), rng);
  auto fill = [&](Param<float>& p) {
    const auto shape = ar.shape(p.name);
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw std::runtime_error("checkpoint: tensor '" + p.name + "' has the wrong shape");
    }
    const auto data = ar.get_f32(p.name);
    p.value = Eigen::Map<const MatrixF>(data.data(), p.value.rows(), p.value.cols());
  };
  for (auto* p : ck.encoder.parameters()) fill(*p);
  for (auto* p : ck.head.parameters()) fill(*p);
  return ck;
}

MatrixF encode_all(Encoder<float>& encoder, std::span<const float> x, Eigen::Index n, Eigen::Index window,
                   Eigen::Index chunk) {
  const Eigen::Index per = window * encoder.in_channels();
  MatrixF out(n, encoder.output_dim());
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index b = std::min(chunk, n - start);
    out.middleRows(start, b) =
        encoder.forward(x.subspan(static_cast<std::size_t>(start * per), static_cast<std::size_t>(b * per)), b, window, false);
  }
  return out;
}

#define CLUSTERCL_INSTANTIATE(T)                                                                        \
  template class Dense<T>;                                                                              \
  template class Conv1d<T>;                                                                             \
  template class Encoder<T>;                                                                            \
  template class ProjectionHead<T>;                                                                     \
  template class LinearClassifier<T>;                                                                   \
  template class Adam<T>;                                                                               \
  template void apply_freeze_policy<T>(Encoder<T>&, FreezeMode);                                        \
  template Matrix<T> l2_normalize_rows<T>(const Matrix<T>&);                                            \
  template Matrix<T> l2_normalize_backward<T>(const Matrix<T>&, const Matrix<T>&);                      \
  template T softmax_cross_entropy<T>(const Matrix<T>&, std::span<const int>, Matrix<T>*);

CLUSTERCL_INSTANTIATE(float)
CLUSTERCL_INSTANTIATE(double)

}  // namespace clustercl

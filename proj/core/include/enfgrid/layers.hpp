#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "enfgrid/rng.hpp"
#include "enfgrid/tensor.hpp"

namespace enfgrid {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

enum class Padding : std::uint8_t { Same, Valid };

// One node of the recorded forward graph. forward() caches whatever the
// matching backward() needs; backward() throws GraphNotRecorded when no
// forward pass is cached and consumes the cache (one backward per forward).
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor<T> forward(const Tensor<T>& input, bool training) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;

    virtual std::vector<Param<T>*> params() { return {}; }
    // non-trainable tensors that still belong in a checkpoint (BN running stats)
    virtual std::vector<std::pair<std::string, Tensor<T>*>> state() { return {}; }

    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------

// 1-D convolution over (batch, time, channels). Same padding follows the
// ceil(T/stride) convention (extra pad goes to the right).
template <typename T>
class Conv1d : public Layer<T> {
public:
    Conv1d(std::string name, std::size_t in_channels, std::size_t out_channels,
           std::size_t kernel, std::size_t stride, Padding padding);

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override;
    std::string name() const override { return name_; }

    void init_he_uniform(Rng& rng);

    std::size_t out_time(std::size_t in_time) const;

    Param<T> weight_; // (kernel * in_channels) x out_channels
    Param<T> bias_;   // out_channels

private:
    std::size_t pad_left(std::size_t in_time) const;

    std::string name_;
    std::size_t in_channels_, out_channels_, kernel_, stride_;
    Padding padding_;

    Tensor<T> cached_cols_; // im2col of the last forward input
    std::vector<std::size_t> cached_input_shape_;
    bool recorded_ = false;
};

// Per-channel batch normalization over (batch, time, channels). Train mode
// uses batch statistics (batch >= 2) and updates running stats with momentum;
// inference uses the running stats.
template <typename T>
class BatchNorm1d : public Layer<T> {
public:
    BatchNorm1d(std::string name, std::size_t channels, T momentum = T(0.1),
                T epsilon = T(1e-5));

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::pair<std::string, Tensor<T>*>> state() override {
        return {{name_ + ".running_mean", &running_mean_},
                {name_ + ".running_var", &running_var_}};
    }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override {
        return input;
    }
    std::string name() const override { return name_; }

    Param<T> gamma_;
    Param<T> beta_;
    Tensor<T> running_mean_;
    Tensor<T> running_var_;

private:
    std::string name_;
    std::size_t channels_;
    T momentum_, epsilon_;

    Tensor<T> cached_xhat_;
    std::vector<T> cached_invstd_;
    bool recorded_ = false;
};

template <typename T>
class LeakyRelu : public Layer<T> {
public:
    LeakyRelu(std::string name, T slope);

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override {
        return input;
    }
    std::string name() const override { return name_; }

private:
    std::string name_;
    T slope_;
    Tensor<T> cached_input_;
    bool recorded_ = false;
};

// Max pooling over time, (batch, time, channels). Ceil mode pads virtually
// with -inf so the last partial window still emits an output.
template <typename T>
class MaxPool1d : public Layer<T> {
public:
    MaxPool1d(std::string name, std::size_t pool, std::size_t stride, bool ceil_mode);

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override;
    std::string name() const override { return name_; }

    std::size_t out_time(std::size_t in_time) const;

private:
    std::string name_;
    std::size_t pool_, stride_;
    bool ceil_mode_;

    std::vector<std::size_t> cached_argmax_;
    std::vector<std::size_t> cached_input_shape_;
    bool recorded_ = false;
};

// Fully connected (batch, features) -> (batch, units).
template <typename T>
class Dense : public Layer<T> {
public:
    Dense(std::string name, std::size_t in_features, std::size_t units);

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override;
    std::string name() const override { return name_; }

    void init_he_uniform(Rng& rng);

    Param<T> weight_; // in_features x units
    Param<T> bias_;   // units

private:
    std::string name_;
    std::size_t in_features_, units_;
    Tensor<T> cached_input_;
    bool recorded_ = false;
};

// GRU over (batch, time, channels); emits only the final hidden state
// (batch, units). Gate equations:
//   r = sigmoid(x Wr + h Ur + br)
//   z = sigmoid(x Wz + h Uz + bz)
//   n = tanh(x Wn + r * (h Un) + bn)
//   h' = (1 - z) * n + z * h
template <typename T>
class Gru : public Layer<T> {
public:
    Gru(std::string name, std::size_t in_features, std::size_t units);

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Param<T>*> params() override {
        return {&w_r_, &w_z_, &w_n_, &u_r_, &u_z_, &u_n_, &b_r_, &b_z_, &b_n_};
    }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override;
    std::string name() const override { return name_; }

    // He-uniform input kernels, orthogonal recurrent kernels, zero biases.
    void init(Rng& rng);

    Param<T> w_r_, w_z_, w_n_; // in_features x units
    Param<T> u_r_, u_z_, u_n_; // units x units
    Param<T> b_r_, b_z_, b_n_; // units

private:
    std::string name_;
    std::size_t in_features_, units_;

    // per-step caches, each (time) entries of (batch, units)
    std::vector<Tensor<T>> cached_r_, cached_z_, cached_n_, cached_hprev_, cached_hun_;
    Tensor<T> cached_input_;
    bool recorded_ = false;
};

// Residual block: conv path of one or two Conv+BN pairs, LeakyReLU between
// them, identity or 1x1-projection skip, LeakyReLU after the add, then max
// pooling.
template <typename T>
class ResidualBlock : public Layer<T> {
public:
    ResidualBlock(std::string name, std::size_t in_channels, std::size_t out_channels,
                  int num_convs, std::size_t kernel, T slope, std::size_t pool,
                  std::size_t pool_stride);

    Tensor<T> forward(const Tensor<T>& input, bool training) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Param<T>*> params() override;
    std::vector<std::pair<std::string, Tensor<T>*>> state() override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input) const override;
    std::string name() const override { return name_; }

    void init(Rng& rng);

    std::unique_ptr<Conv1d<T>> conv1_;
    std::unique_ptr<BatchNorm1d<T>> bn1_;
    std::unique_ptr<Conv1d<T>> conv2_; // null when num_convs == 1
    std::unique_ptr<BatchNorm1d<T>> bn2_;
    std::unique_ptr<Conv1d<T>> projection_; // null for identity skip
    std::unique_ptr<LeakyRelu<T>> relu_mid_;
    std::unique_ptr<LeakyRelu<T>> relu_out_;
    std::unique_ptr<MaxPool1d<T>> pool_;

private:
    std::string name_;
    int num_convs_;
    Tensor<T> cached_skip_input_;
    bool recorded_ = false;
};

// ---------------------------------------------------------------------------

// Numerically stable softmax (max subtraction), rows of (batch, n).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// -log p[label] with p clamped at 1e-12; mean over the batch.
template <typename T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels);

// Fused loss for training: mean cross-entropy over the batch plus the
// gradient w.r.t. the logits, (p - onehot) / batch.
template <typename T>
std::pair<double, Tensor<T>> softmax_cross_entropy(const Tensor<T>& logits,
                                                   const std::vector<int>& labels);

} // namespace enfgrid

#include "enfgrid/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "enfgrid/errors.hpp"

namespace enfgrid {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedCMap =
    Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <typename T>
void require_rank3(const Tensor<T>& x, std::size_t channels, const std::string& who) {
    if (x.rank() != 3)
        raise(ErrorCode::ShapeMismatch, who + ": expected (batch, time, channels) input");
    if (x.dim(2) != channels)
        raise(ErrorCode::ShapeMismatch, who + ": got " + std::to_string(x.dim(2)) +
                                            " channels, expected " + std::to_string(channels));
}

template <typename T>
T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

} // namespace

// --- Conv1d -----------------------------------------------------------------

template <typename T>
Conv1d<T>::Conv1d(std::string name, std::size_t in_channels, std::size_t out_channels,
                  std::size_t kernel, std::size_t stride, Padding padding)
    : weight_(name + ".w", {kernel * in_channels, out_channels}),
      bias_(name + ".b", {out_channels}),
      name_(std::move(name)),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
    if (kernel_ < 1 || stride_ < 1 || out_channels_ < 1 || in_channels_ < 1)
        raise(ErrorCode::ConfigInvalid, name_ + ": kernel, stride, channels must be >= 1");
}

template <typename T>
void Conv1d<T>::init_he_uniform(Rng& rng) {
    const double fan_in = static_cast<double>(kernel_ * in_channels_);
    const double limit = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < weight_.value.size(); ++i)
        weight_.value[i] = static_cast<T>(rng.uniform(-limit, limit));
    bias_.value.zero();
}

template <typename T>
std::size_t Conv1d<T>::out_time(std::size_t in_time) const {
    if (padding_ == Padding::Same)
        return (in_time + stride_ - 1) / stride_;
    if (in_time < kernel_)
        raise(ErrorCode::ShapeMismatch,
              name_ + ": input time " + std::to_string(in_time) + " < kernel");
    return (in_time - kernel_) / stride_ + 1;
}

template <typename T>
std::size_t Conv1d<T>::pad_left(std::size_t in_time) const {
    if (padding_ == Padding::Valid) return 0;
    const std::size_t t_out = out_time(in_time);
    const std::size_t span = (t_out - 1) * stride_ + kernel_;
    const std::size_t total = span > in_time ? span - in_time : 0;
    return total / 2; // extra padding goes to the right
}

template <typename T>
std::vector<std::size_t> Conv1d<T>::output_shape(const std::vector<std::size_t>& input) const {
    return {input[0], out_time(input[1]), out_channels_};
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& input, bool) {
    require_rank3(input, in_channels_, name_);
    const std::size_t batch = input.dim(0), in_time = input.dim(1);
    const std::size_t t_out = out_time(in_time);
    const std::size_t pl = pad_left(in_time);
    const std::size_t cols_width = kernel_ * in_channels_;

    cached_cols_ = Tensor<T>({batch * t_out, cols_width});
    for (std::size_t b = 0; b < batch; ++b) {
        const T* x = input.data() + b * in_time * in_channels_;
        for (std::size_t t = 0; t < t_out; ++t) {
            T* row = cached_cols_.data() + (b * t_out + t) * cols_width;
            const std::ptrdiff_t start =
                static_cast<std::ptrdiff_t>(t * stride_) - static_cast<std::ptrdiff_t>(pl);
            for (std::size_t kk = 0; kk < kernel_; ++kk) {
                const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(kk);
                T* dst = row + kk * in_channels_;
                if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(in_time))
                    std::copy_n(x + idx * in_channels_, in_channels_, dst);
                else
                    std::fill_n(dst, in_channels_, T{});
            }
        }
    }

    Tensor<T> output({batch, t_out, out_channels_});
    CMapMat<T> cols(cached_cols_.data(), batch * t_out, cols_width);
    CMapMat<T> w(weight_.value.data(), cols_width, out_channels_);
    MapMat<T> y(output.data(), batch * t_out, out_channels_);
    y.noalias() = cols * w;
    Eigen::Map<const Eigen::RowVectorX<T>> b(bias_.value.data(), out_channels_);
    y.rowwise() += b;

    cached_input_shape_ = input.shape();
    recorded_ = true;
    return output;
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;

    const std::size_t batch = cached_input_shape_[0], in_time = cached_input_shape_[1];
    const std::size_t t_out = out_time(in_time);
    const std::size_t pl = pad_left(in_time);
    const std::size_t cols_width = kernel_ * in_channels_;
    if (grad_output.shape() != output_shape(cached_input_shape_))
        raise(ErrorCode::ShapeMismatch, name_ + ": gradient shape mismatch");

    CMapMat<T> dy(grad_output.data(), batch * t_out, out_channels_);
    CMapMat<T> cols(cached_cols_.data(), batch * t_out, cols_width);
    MapMat<T> dw(weight_.grad.data(), cols_width, out_channels_);
    dw.noalias() += cols.transpose() * dy;
    Eigen::Map<Eigen::RowVectorX<T>> db(bias_.grad.data(), out_channels_);
    db += dy.colwise().sum();

    RowMat<T> dcols = dy * CMapMat<T>(weight_.value.data(), cols_width, out_channels_).transpose();

    Tensor<T> dx(cached_input_shape_);
    for (std::size_t b = 0; b < batch; ++b) {
        T* dxb = dx.data() + b * in_time * in_channels_;
        for (std::size_t t = 0; t < t_out; ++t) {
            const T* row = dcols.data() + (b * t_out + t) * cols_width;
            const std::ptrdiff_t start =
                static_cast<std::ptrdiff_t>(t * stride_) - static_cast<std::ptrdiff_t>(pl);
            for (std::size_t kk = 0; kk < kernel_; ++kk) {
                const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(kk);
                if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(in_time)) continue;
                const T* src = row + kk * in_channels_;
                T* dst = dxb + idx * in_channels_;
                for (std::size_t c = 0; c < in_channels_; ++c) dst[c] += src[c];
            }
        }
    }
    cached_cols_ = Tensor<T>();
    return dx;
}

// --- BatchNorm1d ------------------------------------------------------------

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::string name, std::size_t channels, T momentum, T epsilon)
    : gamma_(name + ".gamma", {channels}),
      beta_(name + ".beta", {channels}),
      running_mean_({channels}),
      running_var_({channels}),
      name_(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      epsilon_(epsilon) {
    gamma_.value.fill(T(1));
    running_var_.fill(T(1));
}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& input, bool training) {
    require_rank3(input, channels_, name_);
    const std::size_t batch = input.dim(0), time = input.dim(1);

    Tensor<T> output(input.shape());
    if (!training) {
        std::vector<T> scale(channels_), shift(channels_);
        for (std::size_t c = 0; c < channels_; ++c) {
            const T invstd = T(1) / std::sqrt(running_var_[c] + epsilon_);
            scale[c] = gamma_.value[c] * invstd;
            shift[c] = beta_.value[c] - running_mean_[c] * scale[c];
        }
        for (std::size_t i = 0; i < input.size(); ++i) {
            const std::size_t c = i % channels_;
            output[i] = input[i] * scale[c] + shift[c];
        }
        return output;
    }

    if (batch < 2)
        raise(ErrorCode::DegenerateBatch,
              name_ + ": training needs batch >= 2, got " + std::to_string(batch));

    const std::size_t m = batch * time;
    std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
    for (std::size_t i = 0; i < input.size(); ++i) mean[i % channels_] += input[i];
    for (double& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const std::size_t c = i % channels_;
        const double d = input[i] - mean[c];
        var[c] += d * d;
    }
    for (double& v : var) v /= static_cast<double>(m);

    cached_xhat_ = Tensor<T>(input.shape());
    cached_invstd_.assign(channels_, T{});
    for (std::size_t c = 0; c < channels_; ++c)
        cached_invstd_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + epsilon_));

    for (std::size_t i = 0; i < input.size(); ++i) {
        const std::size_t c = i % channels_;
        const T xhat = (input[i] - static_cast<T>(mean[c])) * cached_invstd_[c];
        cached_xhat_[i] = xhat;
        output[i] = gamma_.value[c] * xhat + beta_.value[c];
    }

    // running stats use the unbiased variance
    const double bessel = m > 1 ? static_cast<double>(m) / (m - 1) : 1.0;
    for (std::size_t c = 0; c < channels_; ++c) {
        running_mean_[c] = (T(1) - momentum_) * running_mean_[c] +
                           momentum_ * static_cast<T>(mean[c]);
        running_var_[c] = (T(1) - momentum_) * running_var_[c] +
                          momentum_ * static_cast<T>(var[c] * bessel);
    }
    recorded_ = true;
    return output;
}

template <typename T>
Tensor<T> BatchNorm1d<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;
    if (!grad_output.same_shape(cached_xhat_))
        raise(ErrorCode::ShapeMismatch, name_ + ": gradient shape mismatch");

    const std::size_t m = grad_output.dim(0) * grad_output.dim(1);
    std::vector<double> sum_dy(channels_, 0.0), sum_dy_xhat(channels_, 0.0);
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        const std::size_t c = i % channels_;
        sum_dy[c] += grad_output[i];
        sum_dy_xhat[c] += static_cast<double>(grad_output[i]) * cached_xhat_[i];
    }

    for (std::size_t c = 0; c < channels_; ++c) {
        gamma_.grad[c] += static_cast<T>(sum_dy_xhat[c]);
        beta_.grad[c] += static_cast<T>(sum_dy[c]);
    }

    Tensor<T> dx(grad_output.shape());
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        const std::size_t c = i % channels_;
        const double term = static_cast<double>(grad_output[i]) -
                            inv_m * sum_dy[c] -
                            inv_m * sum_dy_xhat[c] * cached_xhat_[i];
        dx[i] = static_cast<T>(gamma_.value[c] * cached_invstd_[c] * term);
    }
    cached_xhat_ = Tensor<T>();
    return dx;
}

// --- LeakyRelu ----------------------------------------------------------------

template <typename T>
LeakyRelu<T>::LeakyRelu(std::string name, T slope) : name_(std::move(name)), slope_(slope) {
    if (!(slope > T(0) && slope < T(1)))
        raise(ErrorCode::ConfigInvalid, name_ + ": slope must lie in (0, 1)");
}

template <typename T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& input, bool) {
    Tensor<T> output(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i)
        output[i] = input[i] >= T(0) ? input[i] : slope_ * input[i];
    cached_input_ = input;
    recorded_ = true;
    return output;
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;
    if (!grad_output.same_shape(cached_input_))
        raise(ErrorCode::ShapeMismatch, name_ + ": gradient shape mismatch");
    Tensor<T> dx(grad_output.shape());
    for (std::size_t i = 0; i < grad_output.size(); ++i)
        dx[i] = cached_input_[i] >= T(0) ? grad_output[i] : slope_ * grad_output[i];
    cached_input_ = Tensor<T>();
    return dx;
}

// --- MaxPool1d ----------------------------------------------------------------

template <typename T>
MaxPool1d<T>::MaxPool1d(std::string name, std::size_t pool, std::size_t stride, bool ceil_mode)
    : name_(std::move(name)), pool_(pool), stride_(stride), ceil_mode_(ceil_mode) {
    if (pool_ < 1 || stride_ < 1)
        raise(ErrorCode::ConfigInvalid, name_ + ": pool and stride must be >= 1");
}

template <typename T>
std::size_t MaxPool1d<T>::out_time(std::size_t in_time) const {
    if (ceil_mode_) return (in_time + stride_ - 1) / stride_;
    if (in_time < pool_)
        raise(ErrorCode::ShapeMismatch, name_ + ": input shorter than pool window");
    return (in_time - pool_) / stride_ + 1;
}

template <typename T>
std::vector<std::size_t> MaxPool1d<T>::output_shape(const std::vector<std::size_t>& input) const {
    return {input[0], out_time(input[1]), input[2]};
}

template <typename T>
Tensor<T> MaxPool1d<T>::forward(const Tensor<T>& input, bool) {
    if (input.rank() != 3)
        raise(ErrorCode::ShapeMismatch, name_ + ": expected (batch, time, channels)");
    const std::size_t batch = input.dim(0), in_time = input.dim(1), ch = input.dim(2);
    const std::size_t t_out = out_time(in_time);

    Tensor<T> output({batch, t_out, ch});
    cached_argmax_.assign(batch * t_out * ch, 0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < t_out; ++t) {
            const std::size_t begin = t * stride_;
            const std::size_t end = std::min(begin + pool_, in_time);
            for (std::size_t c = 0; c < ch; ++c) {
                T best = -std::numeric_limits<T>::infinity();
                std::size_t best_idx = begin;
                for (std::size_t i = begin; i < end; ++i) {
                    const T v = input.at(b, i, c);
                    if (v > best) {
                        best = v;
                        best_idx = i;
                    }
                }
                output.at(b, t, c) = best;
                cached_argmax_[(b * t_out + t) * ch + c] = best_idx;
            }
        }
    }
    cached_input_shape_ = input.shape();
    recorded_ = true;
    return output;
}

template <typename T>
Tensor<T> MaxPool1d<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;
    if (grad_output.shape() != output_shape(cached_input_shape_))
        raise(ErrorCode::ShapeMismatch, name_ + ": gradient shape mismatch");

    const std::size_t batch = cached_input_shape_[0], ch = cached_input_shape_[2];
    const std::size_t t_out = grad_output.dim(1);
    Tensor<T> dx(cached_input_shape_);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < t_out; ++t)
            for (std::size_t c = 0; c < ch; ++c)
                dx.at(b, cached_argmax_[(b * t_out + t) * ch + c], c) +=
                    grad_output.at(b, t, c);
    return dx;
}

// --- Dense --------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in_features, std::size_t units)
    : weight_(name + ".w", {in_features, units}),
      bias_(name + ".b", {units}),
      name_(std::move(name)),
      in_features_(in_features),
      units_(units) {
    if (in_features_ < 1 || units_ < 1)
        raise(ErrorCode::ConfigInvalid, name_ + ": features and units must be >= 1");
}

template <typename T>
void Dense<T>::init_he_uniform(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_features_));
    for (std::size_t i = 0; i < weight_.value.size(); ++i)
        weight_.value[i] = static_cast<T>(rng.uniform(-limit, limit));
    bias_.value.zero();
}

template <typename T>
std::vector<std::size_t> Dense<T>::output_shape(const std::vector<std::size_t>& input) const {
    return {input[0], units_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input, bool) {
    if (input.rank() != 2 || input.dim(1) != in_features_)
        raise(ErrorCode::ShapeMismatch, name_ + ": expected (batch, " +
                                            std::to_string(in_features_) + ") input");
    const std::size_t batch = input.dim(0);
    Tensor<T> output({batch, units_});
    CMapMat<T> x(input.data(), batch, in_features_);
    CMapMat<T> w(weight_.value.data(), in_features_, units_);
    MapMat<T> y(output.data(), batch, units_);
    y.noalias() = x * w;
    y.rowwise() += Eigen::Map<const Eigen::RowVectorX<T>>(bias_.value.data(), units_);
    cached_input_ = input;
    recorded_ = true;
    return output;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;
    const std::size_t batch = cached_input_.dim(0);
    if (grad_output.rank() != 2 || grad_output.dim(0) != batch || grad_output.dim(1) != units_)
        raise(ErrorCode::ShapeMismatch, name_ + ": gradient shape mismatch");

    CMapMat<T> x(cached_input_.data(), batch, in_features_);
    CMapMat<T> dy(grad_output.data(), batch, units_);
    MapMat<T> dw(weight_.grad.data(), in_features_, units_);
    dw.noalias() += x.transpose() * dy;
    Eigen::Map<Eigen::RowVectorX<T>> db(bias_.grad.data(), units_);
    db += dy.colwise().sum();

    Tensor<T> dx({batch, in_features_});
    MapMat<T> dxm(dx.data(), batch, in_features_);
    dxm.noalias() = dy * CMapMat<T>(weight_.value.data(), in_features_, units_).transpose();
    cached_input_ = Tensor<T>();
    return dx;
}

// --- Gru ------------------------------------------------------------------------

template <typename T>
Gru<T>::Gru(std::string name, std::size_t in_features, std::size_t units)
    : w_r_(name + ".w_r", {in_features, units}),
      w_z_(name + ".w_z", {in_features, units}),
      w_n_(name + ".w_n", {in_features, units}),
      u_r_(name + ".u_r", {units, units}),
      u_z_(name + ".u_z", {units, units}),
      u_n_(name + ".u_n", {units, units}),
      b_r_(name + ".b_r", {units}),
      b_z_(name + ".b_z", {units}),
      b_n_(name + ".b_n", {units}),
      name_(std::move(name)),
      in_features_(in_features),
      units_(units) {
    if (in_features_ < 1 || units_ < 1)
        raise(ErrorCode::ConfigInvalid, name_ + ": features and units must be >= 1");
}

template <typename T>
void Gru<T>::init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_features_));
    for (Param<T>* p : {&w_r_, &w_z_, &w_n_})
        for (std::size_t i = 0; i < p->value.size(); ++i)
            p->value[i] = static_cast<T>(rng.uniform(-limit, limit));

    // orthogonal recurrent kernels: QR of a Gaussian matrix, signs fixed by
    // the R diagonal
    const auto n = static_cast<Eigen::Index>(units_);
    for (Param<T>* p : {&u_r_, &u_z_, &u_n_}) {
        RowMat<T> g(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) g(i, j) = static_cast<T>(rng.gaussian());
        Eigen::HouseholderQR<RowMat<T>> qr(g);
        RowMat<T> q = qr.householderQ() * RowMat<T>::Identity(n, n);
        RowMat<T> r = qr.matrixQR().template triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < n; ++j)
            if (r(j, j) < T(0)) q.col(j) = -q.col(j);
        std::copy_n(q.data(), p->value.size(), p->value.data());
    }
    b_r_.value.zero();
    b_z_.value.zero();
    b_n_.value.zero();
}

template <typename T>
std::vector<std::size_t> Gru<T>::output_shape(const std::vector<std::size_t>& input) const {
    return {input[0], units_};
}

template <typename T>
Tensor<T> Gru<T>::forward(const Tensor<T>& input, bool) {
    require_rank3(input, in_features_, name_);
    const std::size_t batch = input.dim(0), time = input.dim(1);
    const auto bn = static_cast<Eigen::Index>(batch);
    const auto un = static_cast<Eigen::Index>(units_);

    CMapMat<T> wr(w_r_.value.data(), in_features_, units_);
    CMapMat<T> wz(w_z_.value.data(), in_features_, units_);
    CMapMat<T> wn(w_n_.value.data(), in_features_, units_);
    CMapMat<T> ur(u_r_.value.data(), units_, units_);
    CMapMat<T> uz(u_z_.value.data(), units_, units_);
    CMapMat<T> un_m(u_n_.value.data(), units_, units_);
    Eigen::Map<const Eigen::RowVectorX<T>> br(b_r_.value.data(), un);
    Eigen::Map<const Eigen::RowVectorX<T>> bz(b_z_.value.data(), un);
    Eigen::Map<const Eigen::RowVectorX<T>> bnv(b_n_.value.data(), un);

    cached_r_.assign(time, Tensor<T>());
    cached_z_.assign(time, Tensor<T>());
    cached_n_.assign(time, Tensor<T>());
    cached_hprev_.assign(time, Tensor<T>());
    cached_hun_.assign(time, Tensor<T>());

    RowMat<T> h = RowMat<T>::Zero(bn, un);
    for (std::size_t t = 0; t < time; ++t) {
        StridedCMap<T> xt(input.data() + t * in_features_, bn,
                          static_cast<Eigen::Index>(in_features_),
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(time * in_features_)));

        RowMat<T> r = ((xt * wr + h * ur).rowwise() + br).unaryExpr([](T v) { return sigmoid(v); });
        RowMat<T> z = ((xt * wz + h * uz).rowwise() + bz).unaryExpr([](T v) { return sigmoid(v); });
        RowMat<T> hun = h * un_m;
        RowMat<T> n =
            ((xt * wn + r.cwiseProduct(hun)).rowwise() + bnv).unaryExpr([](T v) { return std::tanh(v); });

        auto stash = [&](std::vector<Tensor<T>>& cache, const RowMat<T>& m) {
            cache[t] = Tensor<T>({batch, units_});
            std::copy_n(m.data(), cache[t].size(), cache[t].data());
        };
        stash(cached_r_, r);
        stash(cached_z_, z);
        stash(cached_n_, n);
        stash(cached_hprev_, h);
        stash(cached_hun_, hun);

        h = (RowMat<T>::Ones(bn, un) - z).cwiseProduct(n) + z.cwiseProduct(h);
    }

    cached_input_ = input;
    recorded_ = true;
    Tensor<T> output({batch, units_});
    std::copy_n(h.data(), output.size(), output.data());
    return output;
}

template <typename T>
Tensor<T> Gru<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;
    const std::size_t batch = cached_input_.dim(0), time = cached_input_.dim(1);
    if (grad_output.rank() != 2 || grad_output.dim(0) != batch || grad_output.dim(1) != units_)
        raise(ErrorCode::ShapeMismatch, name_ + ": gradient shape mismatch");
    const auto bn = static_cast<Eigen::Index>(batch);
    const auto un = static_cast<Eigen::Index>(units_);

    CMapMat<T> wr(w_r_.value.data(), in_features_, units_);
    CMapMat<T> wz(w_z_.value.data(), in_features_, units_);
    CMapMat<T> wn(w_n_.value.data(), in_features_, units_);
    CMapMat<T> ur(u_r_.value.data(), units_, units_);
    CMapMat<T> uz(u_z_.value.data(), units_, units_);
    CMapMat<T> un_m(u_n_.value.data(), units_, units_);

    MapMat<T> dwr(w_r_.grad.data(), in_features_, units_);
    MapMat<T> dwz(w_z_.grad.data(), in_features_, units_);
    MapMat<T> dwn(w_n_.grad.data(), in_features_, units_);
    MapMat<T> dur(u_r_.grad.data(), units_, units_);
    MapMat<T> duz(u_z_.grad.data(), units_, units_);
    MapMat<T> dun(u_n_.grad.data(), units_, units_);
    Eigen::Map<Eigen::RowVectorX<T>> dbr(b_r_.grad.data(), un);
    Eigen::Map<Eigen::RowVectorX<T>> dbz(b_z_.grad.data(), un);
    Eigen::Map<Eigen::RowVectorX<T>> dbn(b_n_.grad.data(), un);

    Tensor<T> dx({batch, time, in_features_});
    RowMat<T> dh(bn, un);
    std::copy_n(grad_output.data(), grad_output.size(), dh.data());

    for (std::size_t t = time; t-- > 0;) {
        CMapMat<T> r(cached_r_[t].data(), batch, units_);
        CMapMat<T> z(cached_z_[t].data(), batch, units_);
        CMapMat<T> n(cached_n_[t].data(), batch, units_);
        CMapMat<T> hprev(cached_hprev_[t].data(), batch, units_);
        CMapMat<T> hun(cached_hun_[t].data(), batch, units_);
        StridedCMap<T> xt(cached_input_.data() + t * in_features_, bn,
                          static_cast<Eigen::Index>(in_features_),
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(time * in_features_)));

        RowMat<T> dn = dh.cwiseProduct(RowMat<T>::Ones(bn, un) - z);
        RowMat<T> dz = dh.cwiseProduct(hprev - n);
        RowMat<T> dhprev = dh.cwiseProduct(z);

        RowMat<T> dan = dn.cwiseProduct(RowMat<T>::Ones(bn, un) - n.cwiseProduct(n));
        RowMat<T> dr = dan.cwiseProduct(hun);
        RowMat<T> dhun = dan.cwiseProduct(r);
        RowMat<T> dar = dr.cwiseProduct(r).cwiseProduct(RowMat<T>::Ones(bn, un) - r);
        RowMat<T> daz = dz.cwiseProduct(z).cwiseProduct(RowMat<T>::Ones(bn, un) - z);

        dwn.noalias() += xt.transpose() * dan;
        dun.noalias() += hprev.transpose() * dhun;
        dbn += dan.colwise().sum();
        dwr.noalias() += xt.transpose() * dar;
        dur.noalias() += hprev.transpose() * dar;
        dbr += dar.colwise().sum();
        dwz.noalias() += xt.transpose() * daz;
        duz.noalias() += hprev.transpose() * daz;
        dbz += daz.colwise().sum();

        RowMat<T> dxt = dan * wn.transpose() + dar * wr.transpose() + daz * wz.transpose();
        for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(dxt.data() + static_cast<std::size_t>(dxt.cols()) * b, in_features_,
                        dx.data() + (b * time + t) * in_features_);

        dhprev.noalias() += dhun * un_m.transpose();
        dhprev.noalias() += dar * ur.transpose();
        dhprev.noalias() += daz * uz.transpose();
        dh = dhprev;
    }

    cached_input_ = Tensor<T>();
    cached_r_.clear();
    cached_z_.clear();
    cached_n_.clear();
    cached_hprev_.clear();
    cached_hun_.clear();
    return dx;
}

// --- ResidualBlock ----------------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, std::size_t in_channels,
                                std::size_t out_channels, int num_convs, std::size_t kernel,
                                T slope, std::size_t pool, std::size_t pool_stride)
    : name_(std::move(name)), num_convs_(num_convs) {
    if (num_convs_ < 1 || num_convs_ > 2)
        raise(ErrorCode::ConfigInvalid, name_ + ": residual blocks take 1 or 2 convs");

    conv1_ = std::make_unique<Conv1d<T>>(name_ + ".conv1", in_channels, out_channels, kernel,
                                         1, Padding::Same);
    bn1_ = std::make_unique<BatchNorm1d<T>>(name_ + ".bn1", out_channels);
    if (num_convs_ == 2) {
        relu_mid_ = std::make_unique<LeakyRelu<T>>(name_ + ".relu1", slope);
        conv2_ = std::make_unique<Conv1d<T>>(name_ + ".conv2", out_channels, out_channels,
                                             kernel, 1, Padding::Same);
        bn2_ = std::make_unique<BatchNorm1d<T>>(name_ + ".bn2", out_channels);
    }
    if (in_channels != out_channels)
        projection_ = std::make_unique<Conv1d<T>>(name_ + ".proj", in_channels, out_channels,
                                                  1, 1, Padding::Same);
    relu_out_ = std::make_unique<LeakyRelu<T>>(name_ + ".relu_out", slope);
    pool_ = std::make_unique<MaxPool1d<T>>(name_ + ".pool", pool, pool_stride, true);
}

template <typename T>
void ResidualBlock<T>::init(Rng& rng) {
    conv1_->init_he_uniform(rng);
    if (conv2_) conv2_->init_he_uniform(rng);
    if (projection_) projection_->init_he_uniform(rng);
}

template <typename T>
std::vector<Param<T>*> ResidualBlock<T>::params() {
    std::vector<Param<T>*> out;
    auto absorb = [&out](Layer<T>* layer) {
        if (!layer) return;
        for (Param<T>* p : layer->params()) out.push_back(p);
    };
    absorb(conv1_.get());
    absorb(bn1_.get());
    absorb(conv2_.get());
    absorb(bn2_.get());
    absorb(projection_.get());
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ResidualBlock<T>::state() {
    std::vector<std::pair<std::string, Tensor<T>*>> out = bn1_->state();
    if (bn2_) {
        auto s2 = bn2_->state();
        out.insert(out.end(), s2.begin(), s2.end());
    }
    return out;
}

template <typename T>
std::vector<std::size_t> ResidualBlock<T>::output_shape(
    const std::vector<std::size_t>& input) const {
    std::vector<std::size_t> shape = conv1_->output_shape(input);
    return pool_->output_shape(shape);
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& input, bool training) {
    Tensor<T> path = bn1_->forward(conv1_->forward(input, training), training);
    if (num_convs_ == 2) {
        path = relu_mid_->forward(path, training);
        path = bn2_->forward(conv2_->forward(path, training), training);
    }
    Tensor<T> skip = projection_ ? projection_->forward(input, training) : input;
    if (!path.same_shape(skip))
        raise(ErrorCode::ShapeMismatch, name_ + ": skip path shape mismatch");
    for (std::size_t i = 0; i < path.size(); ++i) path[i] += skip[i];
    recorded_ = true;
    return pool_->forward(relu_out_->forward(path, training), training);
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& grad_output) {
    if (!recorded_) raise(ErrorCode::GraphNotRecorded, name_ + ": backward before forward");
    recorded_ = false;

    Tensor<T> dadd = relu_out_->backward(pool_->backward(grad_output));

    Tensor<T> dpath = dadd;
    if (num_convs_ == 2) {
        dpath = relu_mid_->backward(conv2_->backward(bn2_->backward(dpath)));
    }
    Tensor<T> dx = conv1_->backward(bn1_->backward(dpath));

    if (projection_) {
        Tensor<T> dskip = projection_->backward(dadd);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dskip[i];
    } else {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dadd[i];
    }
    return dx;
}

// --- loss helpers ------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.rank() != 2)
        raise(ErrorCode::ShapeMismatch, "softmax expects (batch, classes)");
    const std::size_t batch = logits.dim(0), n = logits.dim(1);
    Tensor<T> probs(logits.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits.data() + b * n;
        T* out = probs.data() + b * n;
        T max_v = row[0];
        for (std::size_t i = 1; i < n; ++i) max_v = std::max(max_v, row[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = std::exp(row[i] - max_v);
            sum += out[i];
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
    }
    return probs;
}

template <typename T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2 || probs.dim(0) != labels.size())
        raise(ErrorCode::ShapeMismatch, "cross_entropy batch mismatch");
    const std::size_t n = probs.dim(1);
    double loss = 0.0;
    for (std::size_t b = 0; b < labels.size(); ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= n)
            raise(ErrorCode::LabelOutOfRange, "label " + std::to_string(labels[b]));
        const double p = std::max(static_cast<double>(probs[b * n + labels[b]]), 1e-12);
        loss -= std::log(p);
    }
    return loss / static_cast<double>(labels.size());
}

template <typename T>
std::pair<double, Tensor<T>> softmax_cross_entropy(const Tensor<T>& logits,
                                                   const std::vector<int>& labels) {
    Tensor<T> probs = softmax(logits);
    const double loss = cross_entropy(probs, labels);
    const std::size_t batch = logits.dim(0), n = logits.dim(1);
    Tensor<T> grad = probs;
    const T inv_b = static_cast<T>(1.0 / static_cast<double>(batch));
    for (std::size_t b = 0; b < batch; ++b) {
        grad[b * n + labels[b]] -= T(1);
        for (std::size_t i = 0; i < n; ++i) grad[b * n + i] *= inv_b;
    }
    return {loss, std::move(grad)};
}

// --- explicit instantiations ---------------------------------------------------------

template class Conv1d<float>;
template class Conv1d<double>;
template class BatchNorm1d<float>;
template class BatchNorm1d<double>;
template class LeakyRelu<float>;
template class LeakyRelu<double>;
template class MaxPool1d<float>;
template class MaxPool1d<double>;
template class Dense<float>;
template class Dense<double>;
template class Gru<float>;
template class Gru<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;

template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template double cross_entropy(const Tensor<float>&, const std::vector<int>&);
template double cross_entropy(const Tensor<double>&, const std::vector<int>&);
template std::pair<double, Tensor<float>> softmax_cross_entropy(const Tensor<float>&,
                                                                const std::vector<int>&);
template std::pair<double, Tensor<double>> softmax_cross_entropy(const Tensor<double>&,
                                                                 const std::vector<int>&);

} // namespace enfgrid

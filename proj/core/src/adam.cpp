#include "enfgrid/adam.hpp"

#include <cmath>

#include "enfgrid/errors.hpp"

namespace enfgrid {

template <typename T>
Adam<T>::Adam(AdamSettings settings) : settings_(settings) {
    if (!(settings_.lr > 0.0))
        raise(ErrorCode::ConfigInvalid, "adam: learning rate must be positive");
    if (settings_.beta1 < 0.0 || settings_.beta1 >= 1.0 ||
        settings_.beta2 < 0.0 || settings_.beta2 >= 1.0)
        raise(ErrorCode::ConfigInvalid, "adam: betas must lie in [0, 1)");
    if (!(settings_.epsilon > 0.0))
        raise(ErrorCode::ConfigInvalid, "adam: epsilon must be positive");
}

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Param<T>* p : params) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }
    if (m_.size() != params.size())
        raise(ErrorCode::ShapeMismatch, "adam: parameter list changed size");

    ++step_count_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Param<T>& p = *params[i];
        if (!p.value.same_shape(m_[i]))
            raise(ErrorCode::ShapeMismatch, "adam: state shape mismatch for " + p.name);
        Tensor<T>& m = m_[i];
        Tensor<T>& v = v_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            const double mj = b1 * m[j] + (1.0 - b1) * g;
            const double vj = b2 * v[j] + (1.0 - b2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double m_hat = mj / bc1;
            const double v_hat = vj / bc2;
            p.value[j] = static_cast<T>(p.value[j] -
                                        settings_.lr * m_hat /
                                            (std::sqrt(v_hat) + settings_.epsilon));
        }
    }
}

template <typename T>
void Adam<T>::zero_grads(const std::vector<Param<T>*>& params) const {
    for (Param<T>* p : params) p->grad.zero();
}

template class Adam<float>;
template class Adam<double>;

} // namespace enfgrid

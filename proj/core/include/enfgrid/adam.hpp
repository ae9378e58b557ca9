#pragma once

#include <cstdint>
#include <vector>

#include "enfgrid/layers.hpp"

namespace enfgrid {

struct AdamSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are keyed by parameter order, so the
// same optimizer must be reused against the same parameter list.
template <typename T>
class Adam {
public:
    explicit Adam(AdamSettings settings); // throws ConfigInvalid on bad settings

    void step(const std::vector<Param<T>*>& params); // throws ShapeMismatch
    void zero_grads(const std::vector<Param<T>*>& params) const;

    std::uint64_t step_count() const { return step_count_; }
    const AdamSettings& settings() const { return settings_; }

    // exposed for inspection in tests
    const std::vector<Tensor<T>>& first_moments() const { return m_; }
    const std::vector<Tensor<T>>& second_moments() const { return v_; }

private:
    AdamSettings settings_;
    std::uint64_t step_count_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

} // namespace enfgrid

#pragma once

// Central-finite-difference gradient checking against the layers' analytic
// backward passes. Runs in double precision; the scalar objective is a fixed
// random weighting of the layer output so every output element contributes.
//
// Input fillers keep the probe point away from non-differentiable spots
// (ReLU kinks, pooling ties), where finite differences are meaningless.

#include <functional>
#include <string>
#include <vector>

#include "enfgrid/layers.hpp"
#include "enfgrid/rng.hpp"
#include "enfgrid/tensor.hpp"
#include "test_util.hpp"

namespace testutil {

using InputFiller = std::function<void(enfgrid::Tensor<double>&, enfgrid::Rng&)>;

inline void fill_uniform(enfgrid::Tensor<double>& x, enfgrid::Rng& rng) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
}

// magnitudes in [0.05, 1]: no entry sits within h of a ReLU kink
inline void fill_away_from_zero(enfgrid::Tensor<double>& x, enfgrid::Rng& rng) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double mag = rng.uniform(0.05, 1.0);
        x[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
}

// pairwise gaps >= 0.09 along every (batch, channel) time column: pooling
// argmaxes cannot flip under an h-sized nudge
inline void fill_spaced(enfgrid::Tensor<double>& x, enfgrid::Rng& rng) {
    const std::size_t batch = x.dim(0), time = x.dim(1), ch = x.dim(2);
    std::vector<std::size_t> ranks(time);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            for (std::size_t t = 0; t < time; ++t) ranks[t] = t;
            for (std::size_t t = time; t > 1; --t)
                std::swap(ranks[t - 1], ranks[static_cast<std::size_t>(
                                            rng.uniform_int(0, static_cast<std::int64_t>(t) - 1))]);
            for (std::size_t t = 0; t < time; ++t)
                x.at(b, t, c) = 0.1 * static_cast<double>(ranks[t]) + rng.uniform(0.0, 0.01);
        }
    }
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;
};

// loss(x) = sum(w .* layer(x)) with fixed random w
inline GradCheckResult grad_check_layer(enfgrid::Layer<double>& layer,
                                        std::vector<std::size_t> input_shape,
                                        std::uint64_t seed, double h = 1e-3,
                                        const InputFiller& filler = fill_uniform) {
    using enfgrid::Tensor;
    enfgrid::Rng rng(seed);

    Tensor<double> input(input_shape);
    filler(input, rng);

    Tensor<double> probe = layer.forward(input, true);
    Tensor<double> loss_weights(probe.shape());
    for (std::size_t i = 0; i < loss_weights.size(); ++i)
        loss_weights[i] = rng.uniform(-1.0, 1.0);

    auto loss_of = [&](const Tensor<double>& x) {
        Tensor<double> y = layer.forward(x, true);
        double loss = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) loss += loss_weights[i] * y[i];
        // zero-seed backward consumes the recording without touching grads
        layer.backward(Tensor<double>(y.shape()));
        return loss;
    };

    // analytic pass
    for (enfgrid::Param<double>* p : layer.params()) p->grad.zero();
    Tensor<double> out = layer.forward(input, true);
    Tensor<double> seed_grad(out.shape());
    for (std::size_t i = 0; i < seed_grad.size(); ++i) seed_grad[i] = loss_weights[i];
    Tensor<double> dx = layer.backward(seed_grad);

    GradCheckResult result;
    auto fd_at = [&](double* slot, double step) {
        const double saved = *slot;
        *slot = saved + step;
        const double up = loss_of(input);
        *slot = saved - step;
        const double down = loss_of(input);
        *slot = saved;
        return (up - down) / (2.0 * step);
    };
    auto check_entry = [&](double analytic, double* slot, const std::string& name,
                           std::size_t index) {
        double err = rel_error(analytic, fd_at(slot, h));
        // A ReLU kink or pooling-argmax flip inside the FD interval poisons
        // the difference quotient. Shrinking the step moves the interval off
        // the kink; a genuine backward bug stays put.
        for (double step = h / 10.0; err > 1e-5 && step > h / 1.0e4; step /= 10.0)
            err = std::min(err, rel_error(analytic, fd_at(slot, step)));
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst = name + "[" + std::to_string(index) + "] analytic " +
                           std::to_string(analytic);
        }
    };

    for (enfgrid::Param<double>* p : layer.params())
        for (std::size_t i = 0; i < p->value.size(); ++i)
            check_entry(p->grad[i], &p->value[i], p->name, i);
    for (std::size_t i = 0; i < input.size(); ++i)
        check_entry(dx[i], &input[i], "input", i);

    return result;
}

// every layer kind at small shapes; returns the worst error over the suite
struct LayerCase {
    std::string name;
    std::function<GradCheckResult(std::uint64_t seed)> run;
};

std::vector<LayerCase> standard_layer_cases();

} // namespace testutil

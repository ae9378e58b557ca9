#include "enfgrid/nas.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "enfgrid/errors.hpp"

namespace enfgrid {

namespace {

RawNetConfig sample_config(const RawNetConfig& base, const SearchSpace& space, Rng& rng) {
    RawNetConfig c = base;
    c.conv_layers = static_cast<int>(rng.uniform_int(space.conv_layers_min, space.conv_layers_max));
    c.front_filters = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(space.filters_min),
                        static_cast<std::int64_t>(space.filters_max)));
    c.block2_filters = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(space.filters_min),
                        static_cast<std::int64_t>(space.filters_max)));
    c.gru_units = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(space.gru_min),
                        static_cast<std::int64_t>(space.gru_max)));
    c.dense_units = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(space.dense_min),
                        static_cast<std::int64_t>(space.dense_max)));
    c.lr = rng.log_uniform(space.lr_min, space.lr_max);
    c.beta1 = rng.uniform(space.beta1_min, space.beta1_max);
    c.beta2 = rng.uniform(space.beta2_min, space.beta2_max);
    return c;
}

std::size_t config_param_count(const RawNetConfig& config) {
    RawNet<float> net(config, /*init_seed=*/0);
    return net.param_count();
}

} // namespace

NasResult nas_search(const RawNetConfig& base, const LabeledFrames& data,
                     const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                     const TrainOptions& options) {
    if (budget < 1) raise(ErrorCode::ConfigInvalid, "nas budget must be >= 1");

    Rng sampler(derive_seed(seed, "nas-sampler"));
    NasResult result;
    result.best_val_accuracy = -1.0;
    std::size_t best_params = 0;

    for (std::size_t trial_id = 0; trial_id < budget; ++trial_id) {
        NasTrial trial;
        trial.trial_id = static_cast<int>(trial_id);
        trial.config = sample_config(base, space, sampler);

        const auto t0 = std::chrono::steady_clock::now();
        try {
            RawNet<float> net(trial.config, derive_seed(seed, "nas-trial", trial_id));
            TrainOptions trial_options = options;
            trial_options.seed = derive_seed(seed, "nas-trial-train", trial_id);
            TrainReport report = train_model(net, data, trial_options);
            trial.val_accuracy = report.best_val_accuracy;
        } catch (const Error& e) {
            trial.failed = true;
            trial.error = e.what();
            std::fprintf(stderr, "nas trial %d failed: %s\n", trial.trial_id, e.what());
        }
        trial.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (!trial.failed) {
            const std::size_t params = config_param_count(trial.config);
            const bool better =
                trial.val_accuracy > result.best_val_accuracy ||
                (trial.val_accuracy == result.best_val_accuracy && params < best_params);
            if (better) {
                result.best = trial.config;
                result.best_val_accuracy = trial.val_accuracy;
                best_params = params;
            }
        }
        result.trials.push_back(std::move(trial));
    }

    if (result.best_val_accuracy < 0.0)
        raise(ErrorCode::EmptyInput, "every nas trial failed");
    return result;
}

void save_trials_csv(const NasResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << "trial_id,conv_layers,front_filters,block2_filters,gru_units,dense_units,"
           "lr,beta1,beta2,val_accuracy,wall_seconds,failed\n";
    char buf[256];
    for (const NasTrial& t : result.trials) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%zu,%zu,%zu,%zu,%.8g,%.8g,%.8g,%.6f,%.3f,%d\n",
                      t.trial_id, t.config.conv_layers, t.config.front_filters,
                      t.config.block2_filters, t.config.gru_units, t.config.dense_units,
                      t.config.lr, t.config.beta1, t.config.beta2, t.val_accuracy,
                      t.wall_seconds, t.failed ? 1 : 0);
        out << buf;
    }
}

} // namespace enfgrid

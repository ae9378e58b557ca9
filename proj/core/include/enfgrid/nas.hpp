#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enfgrid/train.hpp"

namespace enfgrid {

// Random-search ranges. Learning rate samples log-uniform, everything else
// uniform.
struct SearchSpace {
    int conv_layers_min = 3, conv_layers_max = 5;
    std::size_t filters_min = 128, filters_max = 256;
    std::size_t gru_min = 512, gru_max = 1024;
    std::size_t dense_min = 64, dense_max = 512;
    double lr_min = 1e-4, lr_max = 1e-2;
    double beta1_min = 0.9, beta1_max = 0.999;
    double beta2_min = 0.99, beta2_max = 0.999;
};

struct NasTrial {
    int trial_id = 0;
    RawNetConfig config;
    double val_accuracy = 0.0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;
};

struct NasResult {
    RawNetConfig best;
    double best_val_accuracy = 0.0;
    std::vector<NasTrial> trials;
};

// Uniform random search over `space`: samples `budget` configs, trains each
// for the capped options.epochs, returns the best validation accuracy
// (ties broken toward fewer parameters). Per-trial failures are recorded,
// not fatal. base supplies the fields the search does not touch
// (input_len, num_classes, kernel, pool, ...).
NasResult nas_search(const RawNetConfig& base, const LabeledFrames& data,
                     const SearchSpace& space, std::size_t budget,
                     std::uint64_t seed, const TrainOptions& options);

// trial_id, sampled params, val_accuracy, wall_time
void save_trials_csv(const NasResult& result, const std::filesystem::path& path);

} // namespace enfgrid

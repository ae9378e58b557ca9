#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enfgrid/rawnet.hpp"
#include "enfgrid/signal.hpp"

namespace enfgrid {

struct TrainOptions {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double val_fraction = 0.2;
    std::size_t patience = 10; // early stop on validation-accuracy plateau
    std::uint64_t seed = 1;
    bool quiet = false;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
    double wall_seconds = 0.0;
    std::string checkpoint_path;
};

// Labeled frame set for one data group.
struct LabeledFrames {
    Tensor<float> frames; // (num_frames, frame_len)
    std::vector<int> labels;
};

// Minimizes cross-entropy with Adam(config.lr, beta1, beta2). Splits off a
// stratified validation fraction, shuffles per epoch, stops early when the
// validation accuracy has not improved for `patience` epochs, and restores
// the best parameters. Deterministic under a fixed seed.
// Throws LabelOutOfRange / EmptyClass / ShapeMismatch.
TrainReport train_model(RawNet<float>& net, const LabeledFrames& data,
                        const TrainOptions& options);

void save_report_csv(const TrainReport& report, const std::filesystem::path& path);

// frame accuracy of the trained net on a labeled set (inference mode)
double evaluate_frames(RawNet<float>& net, const LabeledFrames& data,
                       std::size_t batch_size = 32);

} // namespace enfgrid

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "enfgrid/adam.hpp"
#include "enfgrid/layers.hpp"
#include "enfgrid/types.hpp"

namespace enfgrid {

// Architecture and optimizer hyperparameters for one data group's model.
//
// conv_layers counts the front strided conv plus the residual-block convs:
// 5 = front + two 2-conv blocks (the reference topology), 4 = front + a
// 2-conv block + a 1-conv block, 3 = front + one 2-conv block. With a single
// block its width is block2_filters.
struct RawNetConfig {
    std::size_t input_len = 15999;
    int conv_layers = 5;
    std::size_t front_filters = 128;
    std::size_t block2_filters = 256;
    std::size_t gru_units = 1024;
    std::size_t dense_units = 128;
    std::size_t num_classes = 3;
    double leaky_slope = 0.01;
    std::size_t conv_kernel = 3;
    std::size_t front_stride = 3;
    std::size_t pool = 9;

    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;

    void validate() const; // throws ConfigInvalid
    AdamSettings adam_settings() const { return {lr, beta1, beta2, 1e-8}; }
};

// Tuned optimizer defaults per data group.
RawNetConfig default_config(const DataGroupId& group);

// flat key=value text, one pair per line
std::string serialize_config(const RawNetConfig& config);
RawNetConfig parse_config(const std::string& text);
void save_config(const RawNetConfig& config, const std::filesystem::path& path);
RawNetConfig load_config(const std::filesystem::path& path);

std::uint64_t config_hash(const RawNetConfig& config); // FNV-1a of the serialization

// The assembled classifier. Layer chain:
//   input (input_len x 1)
//   -> Conv1d(kernel, front_stride, front_filters, same) + BN + LeakyReLU
//   -> ResidualBlock(s) each ending in MaxPool(pool, pool)
//   -> GRU(gru_units) -> Dense(dense_units) -> Dense(num_classes)
// forward() emits logits; predict paths apply softmax.
template <typename T>
class RawNet {
public:
    explicit RawNet(const RawNetConfig& config, std::uint64_t init_seed = 1);

    Tensor<T> forward(const Tensor<T>& input, bool training); // (B, L, 1) -> (B, n)
    void backward(const Tensor<T>& grad_logits);
    std::vector<Param<T>*> params();
    std::vector<std::pair<std::string, Tensor<T>*>> state_tensors();
    void zero_grads();

    // Shapes after: front block, each residual block, the GRU, each dense
    // layer. Computed symbolically from the config.
    std::vector<std::vector<std::size_t>> shape_trace() const;
    std::size_t param_count() const;

    const RawNetConfig& config() const { return config_; }

    // probabilities for one normalized frame of length config.input_len
    std::vector<double> predict_frame(const float* frame, std::size_t len);
    std::vector<double> predict_frame(const std::vector<float>& frame);

private:
    RawNetConfig config_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::size_t trace_front_ = 0; // layer indices closing each traced stage
    std::vector<std::size_t> trace_points_;
};

// The exact reference shape chain for the strict check:
// 5333x128 -> 593x128 -> 66x256 -> 128 -> n.
std::vector<std::vector<std::size_t>> reference_shape_chain(std::size_t num_classes);

// Builds the model; strict mode rejects any config whose symbolic trace does
// not reproduce the reference chain (throws ConfigInvalid).
template <typename T>
std::unique_ptr<RawNet<T>> build_rawnet(const RawNetConfig& config, bool strict = false,
                                        std::uint64_t init_seed = 1);

// Checkpoint file: header {magic "EGNW", config hash u64, tensor count u32},
// then per tensor {name length u32, name, dtype u8, rank u8, dims u32...,
// little-endian payload}. Parameters and BN running stats are stored.
void save_checkpoint(RawNet<float>& net, const std::filesystem::path& path);
std::unique_ptr<RawNet<float>> load_checkpoint(const RawNetConfig& config,
                                               const std::filesystem::path& path);

} // namespace enfgrid

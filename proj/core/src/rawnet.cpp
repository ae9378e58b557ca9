#include "enfgrid/rawnet.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "binio.hpp"

namespace enfgrid {

void RawNetConfig::validate() const {
    if (input_len < conv_kernel)
        raise(ErrorCode::ConfigInvalid, "input_len shorter than the conv kernel");
    if (conv_layers < 3 || conv_layers > 5)
        raise(ErrorCode::ConfigInvalid, "conv_layers must lie in [3, 5]");
    if (front_filters < 1 || block2_filters < 1 || gru_units < 1 || dense_units < 1)
        raise(ErrorCode::ConfigInvalid, "layer widths must be >= 1");
    if (num_classes < 2)
        raise(ErrorCode::ConfigInvalid, "num_classes must be >= 2");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
        raise(ErrorCode::ConfigInvalid, "leaky_slope must lie in (0, 1)");
    if (conv_kernel < 1 || front_stride < 1 || pool < 1)
        raise(ErrorCode::ConfigInvalid, "kernel, stride and pool must be >= 1");
    if (!(lr > 0.0))
        raise(ErrorCode::ConfigInvalid, "learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        raise(ErrorCode::ConfigInvalid, "betas must lie in [0, 1)");
}

RawNetConfig default_config(const DataGroupId& group) {
    RawNetConfig config;
    config.num_classes = group_num_classes(group);
    if (group.rec_type == RecType::Audio && group.nominal == Nominal::Hz50) {
        config.lr = 6.5e-4;
        config.beta1 = 0.96;
        config.beta2 = 0.998;
    } else if (group.rec_type == RecType::Audio && group.nominal == Nominal::Hz60) {
        config.lr = 7.0e-4;
        config.beta1 = 0.97;
        config.beta2 = 0.998;
    } else if (group.rec_type == RecType::Power && group.nominal == Nominal::Hz50) {
        config.lr = 1.1e-3;
        config.beta1 = 0.98;
        config.beta2 = 0.992;
    } else {
        config.lr = 9.7e-4;
        config.beta1 = 0.98;
        config.beta2 = 0.993;
    }
    return config;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string serialize_config(const RawNetConfig& c) {
    std::ostringstream out;
    out << "input_len=" << c.input_len << '\n'
        << "conv_layers=" << c.conv_layers << '\n'
        << "front_filters=" << c.front_filters << '\n'
        << "block2_filters=" << c.block2_filters << '\n'
        << "gru_units=" << c.gru_units << '\n'
        << "dense_units=" << c.dense_units << '\n'
        << "num_classes=" << c.num_classes << '\n'
        << "leaky_slope=" << format_double(c.leaky_slope) << '\n'
        << "conv_kernel=" << c.conv_kernel << '\n'
        << "front_stride=" << c.front_stride << '\n'
        << "pool=" << c.pool << '\n'
        << "lr=" << format_double(c.lr) << '\n'
        << "beta1=" << format_double(c.beta1) << '\n'
        << "beta2=" << format_double(c.beta2) << '\n';
    return out.str();
}

RawNetConfig parse_config(const std::string& text) {
    RawNetConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::ConfigInvalid, "config line without '=': " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "input_len") c.input_len = std::stoul(value);
            else if (key == "conv_layers") c.conv_layers = std::stoi(value);
            else if (key == "front_filters") c.front_filters = std::stoul(value);
            else if (key == "block2_filters") c.block2_filters = std::stoul(value);
            else if (key == "gru_units") c.gru_units = std::stoul(value);
            else if (key == "dense_units") c.dense_units = std::stoul(value);
            else if (key == "num_classes") c.num_classes = std::stoul(value);
            else if (key == "leaky_slope") c.leaky_slope = std::stod(value);
            else if (key == "conv_kernel") c.conv_kernel = std::stoul(value);
            else if (key == "front_stride") c.front_stride = std::stoul(value);
            else if (key == "pool") c.pool = std::stoul(value);
            else if (key == "lr") c.lr = std::stod(value);
            else if (key == "beta1") c.beta1 = std::stod(value);
            else if (key == "beta2") c.beta2 = std::stod(value);
            else raise(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            raise(ErrorCode::ConfigInvalid, "bad value for '" + key + "': " + value);
        }
    }
    return c;
}

void save_config(const RawNetConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << serialize_config(config);
}

RawNetConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::uint64_t config_hash(const RawNetConfig& config) {
    const std::string text = serialize_config(config);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

// --- model assembly ----------------------------------------------------------

namespace {

struct BlockPlan {
    std::size_t filters;
    int num_convs;
};

// conv_layers = front conv + block convs
std::vector<BlockPlan> plan_blocks(const RawNetConfig& c) {
    switch (c.conv_layers) {
        case 3: return {{c.block2_filters, 2}};
        case 4: return {{c.front_filters, 2}, {c.block2_filters, 1}};
        default: return {{c.front_filters, 2}, {c.block2_filters, 2}};
    }
}

} // namespace

template <typename T>
RawNet<T>::RawNet(const RawNetConfig& config, std::uint64_t init_seed) : config_(config) {
    config_.validate();
    Rng rng(derive_seed(init_seed, "rawnet-init"));

    const auto slope = static_cast<T>(config_.leaky_slope);
    auto front_conv = std::make_unique<Conv1d<T>>("front.conv", 1, config_.front_filters,
                                                  config_.conv_kernel, config_.front_stride,
                                                  Padding::Same);
    front_conv->init_he_uniform(rng);
    layers_.push_back(std::move(front_conv));
    layers_.push_back(std::make_unique<BatchNorm1d<T>>("front.bn", config_.front_filters));
    layers_.push_back(std::make_unique<LeakyRelu<T>>("front.relu", slope));
    trace_points_.push_back(layers_.size() - 1);

    std::size_t channels = config_.front_filters;
    int block_index = 0;
    for (const BlockPlan& plan : plan_blocks(config_)) {
        ++block_index;
        auto block = std::make_unique<ResidualBlock<T>>(
            "block" + std::to_string(block_index), channels, plan.filters, plan.num_convs,
            config_.conv_kernel, slope, config_.pool, config_.pool);
        block->init(rng);
        channels = plan.filters;
        layers_.push_back(std::move(block));
        trace_points_.push_back(layers_.size() - 1);
    }

    auto gru = std::make_unique<Gru<T>>("gru", channels, config_.gru_units);
    gru->init(rng);
    layers_.push_back(std::move(gru));
    trace_points_.push_back(layers_.size() - 1);

    auto fc1 = std::make_unique<Dense<T>>("fc1", config_.gru_units, config_.dense_units);
    fc1->init_he_uniform(rng);
    layers_.push_back(std::move(fc1));
    trace_points_.push_back(layers_.size() - 1);

    auto out = std::make_unique<Dense<T>>("out", config_.dense_units, config_.num_classes);
    out->init_he_uniform(rng);
    layers_.push_back(std::move(out));
    trace_points_.push_back(layers_.size() - 1);
}

template <typename T>
Tensor<T> RawNet<T>::forward(const Tensor<T>& input, bool training) {
    if (input.rank() != 3 || input.dim(1) != config_.input_len || input.dim(2) != 1)
        raise(ErrorCode::ShapeMismatch,
              "rawnet: expected (batch, " + std::to_string(config_.input_len) + ", 1) input");
    Tensor<T> x = input;
    for (auto& layer : layers_) x = layer->forward(x, training);
    return x;
}

template <typename T>
void RawNet<T>::backward(const Tensor<T>& grad_logits) {
    Tensor<T> g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

template <typename T>
std::vector<Param<T>*> RawNet<T>::params() {
    std::vector<Param<T>*> out;
    for (auto& layer : layers_)
        for (Param<T>* p : layer->params()) out.push_back(p);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> RawNet<T>::state_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (auto& layer : layers_)
        for (auto& s : layer->state()) out.push_back(s);
    return out;
}

template <typename T>
void RawNet<T>::zero_grads() {
    for (Param<T>* p : params()) p->grad.zero();
}

template <typename T>
std::vector<std::vector<std::size_t>> RawNet<T>::shape_trace() const {
    std::vector<std::vector<std::size_t>> trace;
    std::vector<std::size_t> shape = {1, config_.input_len, 1};
    std::size_t next_point = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        shape = layers_[i]->output_shape(shape);
        if (next_point < trace_points_.size() && trace_points_[next_point] == i) {
            // drop the batch dimension in the reported trace
            trace.emplace_back(shape.begin() + 1, shape.end());
            ++next_point;
        }
    }
    return trace;
}

template <typename T>
std::size_t RawNet<T>::param_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers_)
        for (Param<T>* p : const_cast<Layer<T>*>(layer.get())->params())
            count += p->value.size();
    return count;
}

template <typename T>
std::vector<double> RawNet<T>::predict_frame(const float* frame, std::size_t len) {
    if (len != config_.input_len)
        raise(ErrorCode::ShapeMismatch, "frame length " + std::to_string(len) +
                                            " != input_len " +
                                            std::to_string(config_.input_len));
    Tensor<T> input({1, config_.input_len, 1});
    for (std::size_t i = 0; i < len; ++i) input[i] = static_cast<T>(frame[i]);
    Tensor<T> logits = forward(input, false);
    Tensor<T> probs = softmax(logits);
    std::vector<double> out(config_.num_classes);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(probs[i]);
    return out;
}

template <typename T>
std::vector<double> RawNet<T>::predict_frame(const std::vector<float>& frame) {
    return predict_frame(frame.data(), frame.size());
}

std::vector<std::vector<std::size_t>> reference_shape_chain(std::size_t num_classes) {
    return {{5333, 128}, {593, 128}, {66, 256}, {128}, {num_classes}};
}

template <typename T>
std::unique_ptr<RawNet<T>> build_rawnet(const RawNetConfig& config, bool strict,
                                        std::uint64_t init_seed) {
    auto net = std::make_unique<RawNet<T>>(config, init_seed);
    if (strict) {
        auto trace = net->shape_trace();
        // drop the GRU stage: the documented chain lists the conv stages, the
        // first dense width, and the class count
        std::vector<std::vector<std::size_t>> checked;
        for (std::size_t i = 0; i + 3 < trace.size(); ++i) checked.push_back(trace[i]);
        checked.push_back(trace[trace.size() - 2]);
        checked.push_back(trace.back());
        if (checked != reference_shape_chain(config.num_classes))
            raise(ErrorCode::ConfigInvalid,
                  "config does not reproduce the reference shape chain");
    }
    return net;
}

// --- checkpoint io -------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'E', 'G', 'N', 'W'};
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> checkpoint_tensors(RawNet<T>& net) {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (Param<T>* p : net.params()) out.emplace_back(p->name, &p->value);
    for (auto& s : net.state_tensors()) out.push_back(s);
    return out;
}

} // namespace

void save_checkpoint(RawNet<float>& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());

    auto tensors = checkpoint_tensors(net);
    binio::write_bytes(out, kCheckpointMagic, 4);
    binio::write_le<std::uint64_t>(out, config_hash(net.config()));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));

    for (auto& [name, tensor] : tensors) {
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        binio::write_bytes(out, name.data(), name.size());
        binio::write_le<std::uint8_t>(out, kDtypeF32);
        binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor->rank()));
        for (std::size_t d : tensor->shape())
            binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        binio::write_bytes(out, tensor->data(), tensor->size() * sizeof(float));
    }
    if (!out) raise(ErrorCode::IoError, "short write to " + path.string());
}

std::unique_ptr<RawNet<float>> load_checkpoint(const RawNetConfig& config,
                                               const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());

    char magic[4];
    std::uint64_t hash = 0;
    std::uint32_t count = 0;
    if (!binio::read_bytes(in, magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        raise(ErrorCode::MalformedCheckpoint, "bad magic in " + path.string());
    if (!binio::read_le(in, hash) || !binio::read_le(in, count))
        raise(ErrorCode::MalformedCheckpoint, "truncated header in " + path.string());
    if (hash != config_hash(config))
        raise(ErrorCode::CheckpointMismatch,
              "checkpoint was written for a different config: " + path.string());

    auto net = std::make_unique<RawNet<float>>(config, /*init_seed=*/0);
    auto tensors = checkpoint_tensors(*net);
    if (tensors.size() != count)
        raise(ErrorCode::CheckpointMismatch,
              "tensor count mismatch in " + path.string());

    for (auto& [expected_name, tensor] : tensors) {
        std::uint32_t name_len = 0;
        if (!binio::read_le(in, name_len))
            raise(ErrorCode::MalformedCheckpoint, "truncated tensor header");
        std::string name(name_len, '\0');
        if (!binio::read_bytes(in, name.data(), name_len))
            raise(ErrorCode::MalformedCheckpoint, "truncated tensor name");
        if (name != expected_name)
            raise(ErrorCode::CheckpointMismatch,
                  "tensor '" + name + "' where '" + expected_name + "' was expected");

        std::uint8_t dtype = 0, rank = 0;
        if (!binio::read_le(in, dtype) || !binio::read_le(in, rank))
            raise(ErrorCode::MalformedCheckpoint, "truncated tensor header");
        if (dtype != kDtypeF32)
            raise(ErrorCode::MalformedCheckpoint, "unsupported dtype in checkpoint");
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) {
            std::uint32_t v = 0;
            if (!binio::read_le(in, v))
                raise(ErrorCode::MalformedCheckpoint, "truncated dims");
            d = v;
        }
        if (dims != tensor->shape())
            raise(ErrorCode::CheckpointMismatch, "shape mismatch for tensor '" + name + "'");
        if (!binio::read_bytes(in, tensor->data(), tensor->size() * sizeof(float)))
            raise(ErrorCode::MalformedCheckpoint, "truncated payload for '" + name + "'");
    }
    return net;
}

template class RawNet<float>;
template class RawNet<double>;
template std::unique_ptr<RawNet<float>> build_rawnet<float>(const RawNetConfig&, bool,
                                                            std::uint64_t);
template std::unique_ptr<RawNet<double>> build_rawnet<double>(const RawNetConfig&, bool,
                                                              std::uint64_t);

} // namespace enfgrid

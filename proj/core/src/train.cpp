#include "enfgrid/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "enfgrid/errors.hpp"

namespace enfgrid {

namespace {

// stratified split so every class keeps at least one training sample
void split_indices(const std::vector<int>& labels, std::size_t num_classes,
                   double val_fraction, Rng& rng, std::vector<std::size_t>& train_idx,
                   std::vector<std::size_t>& val_idx) {
    std::vector<std::vector<std::size_t>> per_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<std::size_t>(labels[i])].push_back(i);

    for (auto& bucket : per_class) {
        // Fisher-Yates with our own rng
        for (std::size_t i = bucket.size(); i > 1; --i)
            std::swap(bucket[i - 1],
                      bucket[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        std::size_t n_val = static_cast<std::size_t>(
            std::floor(val_fraction * static_cast<double>(bucket.size())));
        if (n_val >= bucket.size()) n_val = bucket.size() - 1; // keep one for training
        for (std::size_t i = 0; i < bucket.size(); ++i)
            (i < n_val ? val_idx : train_idx).push_back(bucket[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

Tensor<float> gather_batch(const Tensor<float>& frames,
                           const std::vector<std::size_t>& indices, std::size_t begin,
                           std::size_t count) {
    const std::size_t frame_len = frames.dim(1);
    Tensor<float> batch({count, frame_len, 1});
    for (std::size_t i = 0; i < count; ++i)
        std::copy_n(frames.data() + indices[begin + i] * frame_len, frame_len,
                    batch.data() + i * frame_len);
    return batch;
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalResult evaluate_split(RawNet<float>& net, const Tensor<float>& frames,
                          const std::vector<int>& labels,
                          const std::vector<std::size_t>& indices, std::size_t batch_size) {
    if (indices.empty()) return {};
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < indices.size(); begin += batch_size) {
        const std::size_t count = std::min(batch_size, indices.size() - begin);
        Tensor<float> batch = gather_batch(frames, indices, begin, count);
        std::vector<int> batch_labels(count);
        for (std::size_t i = 0; i < count; ++i)
            batch_labels[i] = labels[indices[begin + i]];
        Tensor<float> logits = net.forward(batch, false);
        Tensor<float> probs = softmax(logits);
        loss_sum += cross_entropy(probs, batch_labels) * static_cast<double>(count);
        const std::size_t n = probs.dim(1);
        for (std::size_t i = 0; i < count; ++i) {
            const float* row = probs.data() + i * n;
            const std::size_t argmax = static_cast<std::size_t>(
                std::max_element(row, row + n) - row);
            if (static_cast<int>(argmax) == batch_labels[i]) ++correct;
        }
    }
    return {loss_sum / static_cast<double>(indices.size()),
            static_cast<double>(correct) / static_cast<double>(indices.size())};
}

std::vector<Tensor<float>> snapshot_params(RawNet<float>& net) {
    std::vector<Tensor<float>> out;
    for (Param<float>* p : net.params()) out.push_back(p->value);
    return out;
}

void restore_params(RawNet<float>& net, const std::vector<Tensor<float>>& snapshot) {
    auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
}

std::vector<Tensor<float>> snapshot_state(RawNet<float>& net) {
    std::vector<Tensor<float>> out;
    for (auto& [name, tensor] : net.state_tensors()) out.push_back(*tensor);
    return out;
}

void restore_state(RawNet<float>& net, const std::vector<Tensor<float>>& snapshot) {
    auto state = net.state_tensors();
    for (std::size_t i = 0; i < state.size(); ++i) *state[i].second = snapshot[i];
}

} // namespace

TrainReport train_model(RawNet<float>& net, const LabeledFrames& data,
                        const TrainOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t num_classes = net.config().num_classes;
    const std::size_t n = data.labels.size();

    if (data.frames.rank() != 2 || data.frames.dim(0) != n)
        raise(ErrorCode::ShapeMismatch, "frames and labels disagree on sample count");
    if (data.frames.dim(1) != net.config().input_len)
        raise(ErrorCode::ShapeMismatch, "frame length does not match the model input");
    if (n == 0) raise(ErrorCode::EmptyClass, "no training samples");

    std::vector<std::size_t> class_counts(num_classes, 0);
    for (int label : data.labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            raise(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(label) + " outside [0, " +
                      std::to_string(num_classes) + ")");
        ++class_counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t c = 0; c < num_classes; ++c)
        if (class_counts[c] == 0)
            raise(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no samples");

    Rng rng(derive_seed(options.seed, "train"));
    std::vector<std::size_t> train_idx, val_idx;
    split_indices(data.labels, num_classes, options.val_fraction, rng, train_idx, val_idx);

    Adam<float> optimizer(net.config().adam_settings());
    auto params = net.params();

    TrainReport report;
    std::vector<Tensor<float>> best_params = snapshot_params(net);
    std::vector<Tensor<float>> best_state = snapshot_state(net);
    double best_val = -1.0;
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        // seeded shuffle of the training order
        std::vector<std::size_t> order = train_idx;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
            std::size_t count = std::min(options.batch_size, order.size() - begin);
            if (count < 2) break; // batch norm needs at least two samples
            Tensor<float> batch = gather_batch(data.frames, order, begin, count);
            std::vector<int> batch_labels(count);
            for (std::size_t i = 0; i < count; ++i)
                batch_labels[i] = data.labels[order[begin + i]];

            net.zero_grads();
            Tensor<float> logits = net.forward(batch, true);
            auto [loss, grad] = softmax_cross_entropy(logits, batch_labels);
            net.backward(grad);
            optimizer.step(params);

            loss_sum += loss * static_cast<double>(count);
            seen += count;
            const std::size_t nc = logits.dim(1);
            for (std::size_t i = 0; i < count; ++i) {
                const float* row = logits.data() + i * nc;
                const std::size_t argmax = static_cast<std::size_t>(
                    std::max_element(row, row + nc) - row);
                if (static_cast<int>(argmax) == batch_labels[i]) ++correct;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        stats.train_accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        const EvalResult val = evaluate_split(net, data.frames, data.labels, val_idx,
                                              options.batch_size);
        stats.val_loss = val.loss;
        stats.val_accuracy = val.accuracy;
        report.epochs.push_back(stats);

        if (!options.quiet)
            std::fprintf(stderr,
                         "epoch %3zu  train loss %.4f acc %.3f  val loss %.4f acc %.3f\n",
                         epoch, stats.train_loss, stats.train_accuracy, stats.val_loss,
                         stats.val_accuracy);

        const double monitored = val_idx.empty() ? stats.train_accuracy : stats.val_accuracy;
        if (monitored > best_val) {
            best_val = monitored;
            best_epoch = epoch;
            best_params = snapshot_params(net);
            best_state = snapshot_state(net);
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }

    restore_params(net, best_params);
    restore_state(net, best_state);
    report.best_epoch = best_epoch;
    report.best_val_accuracy = best_val;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

void save_report_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    char buf[160];
    for (const EpochStats& e : report.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss,
                      e.train_accuracy, e.val_loss, e.val_accuracy);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "# best_epoch=%zu best_val_accuracy=%.6f wall_seconds=%.3f\n",
                  report.best_epoch, report.best_val_accuracy, report.wall_seconds);
    out << buf;
}

double evaluate_frames(RawNet<float>& net, const LabeledFrames& data, std::size_t batch_size) {
    std::vector<std::size_t> all(data.labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate_split(net, data.frames, data.labels, all, batch_size).accuracy;
}

} // namespace enfgrid

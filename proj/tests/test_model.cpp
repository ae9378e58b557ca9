#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>

#include "enfgrid/nas.hpp"
#include "enfgrid/rawnet.hpp"
#include "enfgrid/train.hpp"
#include "test_util.hpp"

using namespace enfgrid;
using testutil::TempDir;

namespace {

// Scaled-down architecture on a short input; trains in well under a second.
RawNetConfig micro_config(std::size_t num_classes = 3) {
    RawNetConfig config;
    config.input_len = 999;
    config.front_filters = 4;
    config.block2_filters = 8;
    config.gru_units = 8;
    config.dense_units = 16;
    config.num_classes = num_classes;
    config.lr = 3e-3;
    return config;
}

// three well-separated tone classes with light noise
LabeledFrames tone_frames(std::size_t per_class, std::size_t frame_len, std::uint64_t seed) {
    const double freqs[] = {40.0, 110.0, 230.0};
    Rng rng(seed);
    LabeledFrames data;
    data.frames = Tensor<float>({3 * per_class, frame_len});
    for (std::size_t k = 0; k < 3 * per_class; ++k) {
        const std::size_t cls = k % 3;
        const double phase = rng.uniform(0.0, 6.28);
        for (std::size_t i = 0; i < frame_len; ++i) {
            const double t = static_cast<double>(i) / 1000.0;
            data.frames[k * frame_len + i] = static_cast<float>(
                0.8 * std::sin(2.0 * 3.14159265358979 * freqs[cls] * t + phase) +
                0.05 * rng.gaussian());
        }
        data.labels.push_back(static_cast<int>(cls));
    }
    return data;
}

} // namespace

TEST_CASE("default config reproduces the reference shape chain") {
    const auto t0 = std::chrono::steady_clock::now();
    RawNetConfig config; // paper defaults
    config.num_classes = 3;
    auto net = build_rawnet<float>(config, /*strict=*/true);
    const auto trace = net->shape_trace();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    REQUIRE(trace.size() == 6);
    CHECK(trace[0] == std::vector<std::size_t>{5333, 128});
    CHECK(trace[1] == std::vector<std::size_t>{593, 128});
    CHECK(trace[2] == std::vector<std::size_t>{66, 256});
    CHECK(trace[3] == std::vector<std::size_t>{1024}); // gru default
    CHECK(trace[4] == std::vector<std::size_t>{128});
    CHECK(trace[5] == std::vector<std::size_t>{3});
    CHECK(secs < 1.0);
}

TEST_CASE("n=6 head changes only the output width") {
    RawNetConfig config;
    config.num_classes = 6;
    auto net = build_rawnet<float>(config, true);
    CHECK(net->shape_trace().back() == std::vector<std::size_t>{6});
}

TEST_CASE("pool 10 breaks the reference chain under strict mode") {
    RawNetConfig config;
    config.num_classes = 3;
    config.pool = 10;
    CHECK(testutil::throws_code([&] { build_rawnet<float>(config, true); },
                                ErrorCode::ConfigInvalid));
    // non-strict build is fine
    CHECK_NOTHROW(build_rawnet<float>(config, false));
}

TEST_CASE("config invariants are enforced") {
    RawNetConfig config = micro_config();
    config.conv_layers = 6;
    CHECK(testutil::throws_code([&] { config.validate(); }, ErrorCode::ConfigInvalid));
    config = micro_config();
    config.leaky_slope = 1.5;
    CHECK(testutil::throws_code([&] { config.validate(); }, ErrorCode::ConfigInvalid));
    config = micro_config();
    config.beta2 = 1.0;
    CHECK(testutil::throws_code([&] { config.validate(); }, ErrorCode::ConfigInvalid));
}

TEST_CASE("table defaults carry the tuned per-group optimizer settings") {
    const RawNetConfig a50 = default_config({RecType::Audio, Nominal::Hz50});
    CHECK(a50.lr == doctest::Approx(6.5e-4));
    CHECK(a50.beta1 == doctest::Approx(0.96));
    CHECK(a50.beta2 == doctest::Approx(0.998));
    CHECK(a50.num_classes == 6);

    const RawNetConfig a60 = default_config({RecType::Audio, Nominal::Hz60});
    CHECK(a60.lr == doctest::Approx(7e-4));
    CHECK(a60.beta1 == doctest::Approx(0.97));
    CHECK(a60.num_classes == 3);

    const RawNetConfig p50 = default_config({RecType::Power, Nominal::Hz50});
    CHECK(p50.lr == doctest::Approx(1.1e-3));
    CHECK(p50.beta1 == doctest::Approx(0.98));
    CHECK(p50.beta2 == doctest::Approx(0.992));

    const RawNetConfig p60 = default_config({RecType::Power, Nominal::Hz60});
    CHECK(p60.lr == doctest::Approx(9.7e-4));
    CHECK(p60.beta2 == doctest::Approx(0.993));
}

TEST_CASE("config text round-trips exactly") {
    RawNetConfig config = micro_config();
    config.lr = 6.5e-4;
    config.beta1 = 0.96123456789;
    config.conv_layers = 4;
    const RawNetConfig back = parse_config(serialize_config(config));
    CHECK(serialize_config(back) == serialize_config(config));
    CHECK(config_hash(back) == config_hash(config));
}

TEST_CASE("unknown config keys are rejected") {
    CHECK(testutil::throws_code([] { parse_config("bogus_key=3\n"); },
                                ErrorCode::ConfigInvalid));
}

TEST_CASE("prediction is a distribution and a pure function") {
    auto net = build_rawnet<float>(micro_config(), false, 7);
    Rng rng(15);
    std::vector<float> frame(999);
    for (float& v : frame) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    const std::vector<double> p1 = net->predict_frame(frame);
    const std::vector<double> p2 = net->predict_frame(frame);
    REQUIRE(p1.size() == 3);
    double sum = 0.0;
    for (double v : p1) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-6);
    CHECK(p1 == p2);
}

TEST_CASE("wrong frame length is a shape error") {
    auto net = build_rawnet<float>(micro_config(), false, 7);
    std::vector<float> frame(998, 0.1f);
    CHECK(testutil::throws_code([&] { net->predict_frame(frame); },
                                ErrorCode::ShapeMismatch));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const RawNetConfig config = micro_config();
    auto net = build_rawnet<float>(config, false, 42);

    TempDir dir("ckpt");
    const auto path = dir.path() / "model.egnw";
    save_checkpoint(*net, path);
    auto loaded = load_checkpoint(config, path);

    Rng rng(4);
    std::vector<float> frame(999);
    for (float& v : frame) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    CHECK(net->predict_frame(frame) == loaded->predict_frame(frame));
}

TEST_CASE("a checkpoint refuses a different config") {
    const RawNetConfig config = micro_config();
    auto net = build_rawnet<float>(config, false, 42);
    TempDir dir("ckpt");
    const auto path = dir.path() / "model.egnw";
    save_checkpoint(*net, path);

    RawNetConfig other = config;
    other.gru_units = 12;
    CHECK(testutil::throws_code([&] { load_checkpoint(other, path); },
                                ErrorCode::CheckpointMismatch));
}

TEST_CASE("truncated checkpoints are malformed") {
    const RawNetConfig config = micro_config();
    auto net = build_rawnet<float>(config, false, 42);
    TempDir dir("ckpt");
    const auto path = dir.path() / "model.egnw";
    save_checkpoint(*net, path);

    const auto truncated = dir.path() / "trunc.egnw";
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out(truncated, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK(testutil::throws_code([&] { load_checkpoint(config, truncated); },
                                ErrorCode::MalformedCheckpoint));
}

// --- training ---------------------------------------------------------------------

TEST_CASE("training separates a toy tone task") {
    const LabeledFrames data = tone_frames(30, 999, 77);
    auto net = build_rawnet<float>(micro_config(), false, 5);

    TrainOptions options;
    options.epochs = 15;
    options.batch_size = 16;
    options.patience = 15;
    options.seed = 5;
    options.quiet = true;

    const TrainReport report = train_model(*net, data, options);
    REQUIRE(report.epochs.size() >= 10);
    CHECK(report.epochs[9].train_loss < report.epochs[0].train_loss);
    CHECK(report.best_val_accuracy >= 0.8);
    CHECK(evaluate_frames(*net, data) >= 0.9);
}

TEST_CASE("training is deterministic under a fixed seed") {
    const LabeledFrames data = tone_frames(12, 999, 31);
    TrainOptions options;
    options.epochs = 4;
    options.batch_size = 8;
    options.seed = 9;
    options.quiet = true;

    auto run = [&]() {
        auto net = build_rawnet<float>(micro_config(), false, 9);
        train_model(*net, data, options);
        std::vector<float> flat;
        for (Param<float>* p : net->params())
            flat.insert(flat.end(), p->value.data(), p->value.data() + p->value.size());
        return flat;
    };
    CHECK(run() == run());
}

TEST_CASE("label out of range is rejected") {
    LabeledFrames data = tone_frames(4, 999, 1);
    data.labels[3] = 7;
    auto net = build_rawnet<float>(micro_config(), false, 2);
    TrainOptions options;
    options.quiet = true;
    CHECK(testutil::throws_code([&] { train_model(*net, data, options); },
                                ErrorCode::LabelOutOfRange));
}

TEST_CASE("a class without samples is rejected") {
    LabeledFrames data = tone_frames(4, 999, 1);
    for (int& label : data.labels)
        if (label == 2) label = 1;
    auto net = build_rawnet<float>(micro_config(), false, 2);
    TrainOptions options;
    options.quiet = true;
    CHECK(testutil::throws_code([&] { train_model(*net, data, options); },
                                ErrorCode::EmptyClass));
}

// --- random search -------------------------------------------------------------------

namespace {

SearchSpace micro_space() {
    SearchSpace space;
    space.conv_layers_min = 3;
    space.conv_layers_max = 5;
    space.filters_min = 3;
    space.filters_max = 8;
    space.gru_min = 4;
    space.gru_max = 12;
    space.dense_min = 4;
    space.dense_max = 16;
    space.lr_min = 5e-4;
    space.lr_max = 1e-2;
    return space;
}

} // namespace

TEST_CASE("budget one returns the single sampled config") {
    const LabeledFrames data = tone_frames(8, 999, 55);
    TrainOptions options;
    options.epochs = 2;
    options.batch_size = 8;
    options.patience = 2;
    options.quiet = true;

    const NasResult result =
        nas_search(micro_config(), data, micro_space(), 1, 123, options);
    REQUIRE(result.trials.size() == 1);
    CHECK(serialize_config(result.best) == serialize_config(result.trials[0].config));
}

TEST_CASE("the search winner is reproducible under a fixed seed") {
    const LabeledFrames data = tone_frames(8, 999, 55);
    TrainOptions options;
    options.epochs = 2;
    options.batch_size = 8;
    options.patience = 2;
    options.quiet = true;

    const NasResult a = nas_search(micro_config(), data, micro_space(), 4, 321, options);
    const NasResult b = nas_search(micro_config(), data, micro_space(), 4, 321, options);
    CHECK(serialize_config(a.best) == serialize_config(b.best));
    CHECK(a.best_val_accuracy == b.best_val_accuracy);
    for (std::size_t i = 0; i < a.trials.size(); ++i)
        CHECK(a.trials[i].val_accuracy == b.trials[i].val_accuracy);
}

TEST_CASE("sampled configs respect the space bounds") {
    const LabeledFrames data = tone_frames(6, 999, 3);
    TrainOptions options;
    options.epochs = 1;
    options.batch_size = 8;
    options.patience = 1;
    options.quiet = true;
    const SearchSpace space = micro_space();

    const NasResult result = nas_search(micro_config(), data, space, 6, 777, options);
    for (const NasTrial& t : result.trials) {
        CHECK(t.config.conv_layers >= space.conv_layers_min);
        CHECK(t.config.conv_layers <= space.conv_layers_max);
        CHECK(t.config.front_filters >= space.filters_min);
        CHECK(t.config.front_filters <= space.filters_max);
        CHECK(t.config.gru_units >= space.gru_min);
        CHECK(t.config.gru_units <= space.gru_max);
        CHECK(t.config.dense_units >= space.dense_min);
        CHECK(t.config.dense_units <= space.dense_max);
        CHECK(t.config.lr >= space.lr_min);
        CHECK(t.config.lr <= space.lr_max);
    }
}

TEST_CASE("trial log CSV has one row per trial") {
    const LabeledFrames data = tone_frames(6, 999, 3);
    TrainOptions options;
    options.epochs = 1;
    options.batch_size = 8;
    options.patience = 1;
    options.quiet = true;

    const NasResult result = nas_search(micro_config(), data, micro_space(), 5, 99, options);
    TempDir dir("nas");
    const auto path = dir.path() / "trials.csv";
    save_trials_csv(result, path);

    std::ifstream in(path);
    std::string line;
    std::size_t rows = 0;
    REQUIRE(std::getline(in, line)); // header
    CHECK(line.substr(0, 8) == "trial_id");
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5);
}

#include <benchmark/benchmark.h>

#include "enfgrid/rawnet.hpp"
#include "enfgrid/signal.hpp"
#include "enfgrid/spectral.hpp"
#include "enfgrid/synth.hpp"

using namespace enfgrid;

namespace {

Recording bench_recording(double seconds) {
    GridProfile profile = default_grid_profile(Grid::C, RecType::Audio);
    return synth_enf(profile, seconds, kDefaultSampleRate, 42);
}

void BM_SynthEnf(benchmark::State& state) {
    const GridProfile profile = default_grid_profile(Grid::I, RecType::Power);
    const double seconds = static_cast<double>(state.range(0));
    for (auto _ : state) {
        Recording rec = synth_enf(profile, seconds, kDefaultSampleRate, 7);
        benchmark::DoNotOptimize(rec.samples.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * kDefaultSampleRate);
}
BENCHMARK(BM_SynthEnf)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Spectrogram(benchmark::State& state) {
    const Recording rec = bench_recording(static_cast<double>(state.range(0)));
    const StftParams params = StftParams::for_rate(rec.sample_rate);
    for (auto _ : state) {
        Spectrogram spec = spectrogram(rec.samples, rec.sample_rate, params.window_len,
                                       params.hop, params.nfft);
        benchmark::DoNotOptimize(spec.magnitudes.data());
    }
    state.SetItemsProcessed(state.iterations() * rec.samples.size());
}
BENCHMARK(BM_Spectrogram)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DetectNominal(benchmark::State& state) {
    const Recording rec = bench_recording(64.0);
    for (auto _ : state) {
        NominalDecision decision = detect_nominal(rec);
        benchmark::DoNotOptimize(decision.score50);
    }
}
BENCHMARK(BM_DetectNominal)->Unit(benchmark::kMillisecond);

void BM_BandpassFiltFilt(benchmark::State& state) {
    const Recording rec = bench_recording(static_cast<double>(state.range(0)));
    for (auto _ : state) {
        std::vector<double> out = bandpass_enf(rec.samples, rec.sample_rate, Nominal::Hz60);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * rec.samples.size());
}
BENCHMARK(BM_BandpassFiltFilt)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_MakeFrames(benchmark::State& state) {
    const Recording rec = bench_recording(256.0);
    for (auto _ : state) {
        FrameBatch batch = make_frames(rec);
        benchmark::DoNotOptimize(batch.frames.data());
    }
}
BENCHMARK(BM_MakeFrames)->Unit(benchmark::kMillisecond);

RawNetConfig bench_config(std::size_t front, std::size_t block2, std::size_t gru) {
    RawNetConfig config;
    config.front_filters = front;
    config.block2_filters = block2;
    config.gru_units = gru;
    config.num_classes = 3;
    return config;
}

void BM_PredictFrameReduced(benchmark::State& state) {
    auto net = build_rawnet<float>(bench_config(8, 16, 32), false, 1);
    const Recording rec = bench_recording(20.0);
    const FrameBatch batch = make_frames(rec);
    for (auto _ : state) {
        auto probs = net->predict_frame(batch.frame(0), batch.frame_len);
        benchmark::DoNotOptimize(probs.data());
    }
}
BENCHMARK(BM_PredictFrameReduced)->Unit(benchmark::kMillisecond);

void BM_PredictFrameFull(benchmark::State& state) {
    auto net = build_rawnet<float>(bench_config(128, 256, 1024), false, 1);
    const Recording rec = bench_recording(20.0);
    const FrameBatch batch = make_frames(rec);
    for (auto _ : state) {
        auto probs = net->predict_frame(batch.frame(0), batch.frame_len);
        benchmark::DoNotOptimize(probs.data());
    }
}
BENCHMARK(BM_PredictFrameFull)->Unit(benchmark::kMillisecond);

void BM_TrainStepReduced(benchmark::State& state) {
    auto net = build_rawnet<float>(bench_config(8, 16, 32), false, 1);
    Adam<float> adam(net->config().adam_settings());
    auto params = net->params();

    Rng rng(3);
    const std::size_t batch_size = 8;
    Tensor<float> batch({batch_size, kDefaultFrameLen, 1});
    for (std::size_t i = 0; i < batch.size(); ++i)
        batch[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    std::vector<int> labels(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) labels[i] = static_cast<int>(i % 3);

    for (auto _ : state) {
        net->zero_grads();
        Tensor<float> logits = net->forward(batch, true);
        auto [loss, grad] = softmax_cross_entropy(logits, labels);
        net->backward(grad);
        adam.step(params);
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(state.iterations() * batch_size);
}
BENCHMARK(BM_TrainStepReduced)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

// Command-line front end: synth / prepare / train / tune / classify / evaluate.
// Logs go to stderr; data goes to files or stdout. Exit codes: 0 success,
// 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "enfgrid/decision.hpp"
#include "enfgrid/evaluate.hpp"
#include "enfgrid/manifest.hpp"
#include "enfgrid/nas.hpp"
#include "enfgrid/pipeline.hpp"
#include "enfgrid/rawnet.hpp"
#include "enfgrid/spectral.hpp"
#include "enfgrid/synth.hpp"
#include "enfgrid/train.hpp"
#include "enfgrid/wav.hpp"

namespace fs = std::filesystem;
using namespace enfgrid;

namespace {

struct RunConfig {
    std::uint64_t seed = 42;
    std::uint32_t sample_rate = kDefaultSampleRate;
    std::size_t frame_len = kDefaultFrameLen;
    double overlap = kDefaultOverlap;
    double alpha1 = kDefaultAlpha1;
    double alpha2 = kDefaultAlpha2;

    std::string dump() const {
        std::ostringstream out;
        char buf[64];
        out << "seed=" << seed << '\n';
        out << "sample_rate=" << sample_rate << '\n';
        out << "frame_len=" << frame_len << '\n';
        std::snprintf(buf, sizeof(buf), "overlap=%.17g\n", overlap);
        out << buf;
        std::snprintf(buf, sizeof(buf), "alpha1=%.17g\n", alpha1);
        out << buf;
        std::snprintf(buf, sizeof(buf), "alpha2=%.17g\n", alpha2);
        out << buf;
        return out.str();
    }
};

void apply_config_file(RunConfig& config, const fs::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open config file " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::ConfigInvalid, "config line without '=': " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "seed") config.seed = std::stoull(value);
        else if (key == "sample_rate") config.sample_rate = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "frame_len") config.frame_len = std::stoul(value);
        else if (key == "overlap") config.overlap = std::stod(value);
        else if (key == "alpha1") config.alpha1 = std::stod(value);
        else if (key == "alpha2") config.alpha2 = std::stod(value);
        else raise(ErrorCode::ConfigInvalid, "unknown run-config key '" + key + "'");
    }
}

struct GlobalArgs {
    RunConfig defaults;
    std::string config_file;
    bool print_config = false;

    // values captured from flags; applied over the file values after parse
    std::uint64_t seed = 42;
    std::uint32_t sample_rate = kDefaultSampleRate;
    std::size_t frame_len = kDefaultFrameLen;
    double overlap = kDefaultOverlap;
    double alpha1 = kDefaultAlpha1;
    double alpha2 = kDefaultAlpha2;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* rate_opt = nullptr;
    CLI::Option* frame_opt = nullptr;
    CLI::Option* overlap_opt = nullptr;
    CLI::Option* a1_opt = nullptr;
    CLI::Option* a2_opt = nullptr;

    void attach(CLI::App& app) {
        seed_opt = app.add_option("--seed", seed, "Root RNG seed");
        rate_opt = app.add_option("--sample-rate", sample_rate, "Working sample rate (Hz)");
        frame_opt = app.add_option("--frame-len", frame_len, "Frame length in samples");
        overlap_opt = app.add_option("--overlap", overlap, "Frame overlap fraction");
        a1_opt = app.add_option("--alpha1", alpha1, "Entropy threshold factor");
        a2_opt = app.add_option("--alpha2", alpha2, "Majority-vote fraction");
        app.add_option("--config", config_file, "Run-config file (key=value)");
        app.add_flag("--print-config", print_config, "Dump the resolved run config");
    }

    // precedence: flags > file > defaults
    RunConfig resolve() const {
        RunConfig config = defaults;
        if (!config_file.empty()) apply_config_file(config, config_file);
        if (seed_opt->count()) config.seed = seed;
        if (rate_opt->count()) config.sample_rate = sample_rate;
        if (frame_opt->count()) config.frame_len = frame_len;
        if (overlap_opt->count()) config.overlap = overlap;
        if (a1_opt->count()) config.alpha1 = alpha1;
        if (a2_opt->count()) config.alpha2 = alpha2;
        return config;
    }
};

DecisionParams decision_params(const RunConfig& config, bool apply_bandpass) {
    DecisionParams params;
    params.alpha1 = config.alpha1;
    params.alpha2 = config.alpha2;
    params.working_rate = config.sample_rate;
    params.frame_len = config.frame_len;
    params.overlap = config.overlap;
    params.apply_bandpass = apply_bandpass;
    return params;
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const RunConfig& config, const std::string& out_dir, std::size_t grids,
              std::size_t per_grid, double train_frac, double practice_frac,
              const std::string& rec_types, double duration, std::size_t noise_test) {
    CorpusSpec spec;
    spec.grids = toy_grid_order(grids);
    spec.seed = config.seed;
    spec.sample_rate = config.sample_rate;
    spec.duration_s = duration;
    spec.noise_test = noise_test;

    spec.train_per_grid = static_cast<std::size_t>(std::lround(train_frac * per_grid));
    spec.practice_per_grid = static_cast<std::size_t>(std::lround(practice_frac * per_grid));
    if (spec.train_per_grid + spec.practice_per_grid > per_grid)
        raise(ErrorCode::ConfigInvalid, "split fractions exceed --per-grid");
    spec.test_per_grid = per_grid - spec.train_per_grid - spec.practice_per_grid;

    if (rec_types == "audio") spec.rec_types = {RecType::Audio};
    else if (rec_types == "power") spec.rec_types = {RecType::Power};
    else if (rec_types == "both") spec.rec_types = {RecType::Audio, RecType::Power};
    else raise(ErrorCode::ConfigInvalid, "--rec-types must be audio, power or both");

    const CorpusManifest manifest = make_corpus(spec, out_dir);
    std::fprintf(stderr, "deterministic corpus: seed %llu, %zu recordings under %s\n",
                 static_cast<unsigned long long>(spec.seed), manifest.entries.size(),
                 out_dir.c_str());
    return 0;
}

// --- prepare -----------------------------------------------------------------

int cmd_prepare(const RunConfig& config, const std::string& corpus,
                const std::string& out_dir, const std::vector<std::string>& split_names,
                bool no_filter) {
    PrepareOptions options;
    options.splits.clear();
    for (const std::string& name : split_names) options.splits.push_back(split_from_name(name));
    options.apply_bandpass = !no_filter;
    options.working_rate = config.sample_rate;
    options.frame_len = config.frame_len;
    options.overlap = config.overlap;

    const CorpusManifest manifest = load_layout(corpus);
    const PrepareResult result = prepare_corpus(manifest, out_dir, options);
    std::fprintf(stderr, "prepared %zu archives under %s%s\n", result.archives.size(),
                 out_dir.c_str(), no_filter ? " (unfiltered)" : "");
    return 0;
}

// --- train -------------------------------------------------------------------

RawNetConfig model_config_from_args(const DataGroupId& group, const std::string& model_config,
                                    std::size_t front_filters, std::size_t block2_filters,
                                    std::size_t gru_units, std::size_t dense_units) {
    RawNetConfig config =
        model_config.empty() ? default_config(group) : load_config(model_config);
    if (model_config.empty()) {
        if (front_filters) config.front_filters = front_filters;
        if (block2_filters) config.block2_filters = block2_filters;
        if (gru_units) config.gru_units = gru_units;
        if (dense_units) config.dense_units = dense_units;
    }
    config.num_classes = group_num_classes(group);
    return config;
}

int cmd_train(const RunConfig& config, const std::string& prepared,
              const std::string& group_name_arg, const std::string& out_dir,
              const std::string& model_config, std::size_t epochs, std::size_t batch_size,
              double val_fraction, std::size_t patience, bool no_filter, bool strict,
              std::size_t front_filters, std::size_t block2_filters, std::size_t gru_units,
              std::size_t dense_units) {
    const DataGroupId group = group_from_name(group_name_arg);
    RawNetConfig net_config = model_config_from_args(group, model_config, front_filters,
                                                     block2_filters, gru_units, dense_units);
    net_config.input_len = config.frame_len;

    const LabeledFrames data = load_group_frames(prepared, group, Split::Train, !no_filter);
    std::fprintf(stderr, "training %s on %zu frames\n", group_name_arg.c_str(),
                 data.labels.size());

    auto net = build_rawnet<float>(net_config, strict, derive_seed(config.seed, "init"));
    TrainOptions options;
    options.epochs = epochs;
    options.batch_size = batch_size;
    options.val_fraction = val_fraction;
    options.patience = patience;
    options.seed = config.seed;

    TrainReport report = train_model(*net, data, options);

    fs::create_directories(out_dir);
    const fs::path checkpoint = fs::path(out_dir) / (group_name_arg + ".egnw");
    save_checkpoint(*net, checkpoint);
    save_config(net_config, fs::path(out_dir) / (group_name_arg + ".config"));
    report.checkpoint_path = checkpoint.string();
    save_report_csv(report, fs::path(out_dir) / (group_name_arg + "_report.csv"));
    std::fprintf(stderr, "best val accuracy %.4f (epoch %zu), checkpoint %s\n",
                 report.best_val_accuracy, report.best_epoch, checkpoint.c_str());
    return 0;
}

// --- tune --------------------------------------------------------------------

int cmd_tune(const RunConfig& config, const std::string& prepared,
             const std::string& group_name_arg, const std::string& out_dir,
             std::size_t budget, std::size_t epochs, std::size_t batch_size,
             double val_fraction, bool no_filter, const SearchSpace& space) {
    const DataGroupId group = group_from_name(group_name_arg);
    RawNetConfig base = default_config(group);
    base.input_len = config.frame_len;

    const LabeledFrames data = load_group_frames(prepared, group, Split::Train, !no_filter);

    TrainOptions options;
    options.epochs = epochs;
    options.batch_size = batch_size;
    options.val_fraction = val_fraction;
    options.patience = epochs; // no early stop inside capped trials
    options.seed = config.seed;
    options.quiet = true;

    const NasResult result = nas_search(base, data, space, budget, config.seed, options);

    fs::create_directories(out_dir);
    save_trials_csv(result, fs::path(out_dir) / (group_name_arg + "_trials.csv"));
    save_config(result.best, fs::path(out_dir) / (group_name_arg + "_best.config"));
    std::fprintf(stderr, "best trial val accuracy %.4f\n", result.best_val_accuracy);
    return 0;
}

// --- classify ----------------------------------------------------------------

int cmd_classify(const RunConfig& config, const std::string& corpus,
                 const std::string& models_dir, const std::string& out_csv,
                 const std::string& split, const std::string& rec_type_flag,
                 bool no_filter) {
    const CorpusManifest manifest = load_layout(corpus);
    const ModelSet models = load_model_set(models_dir);
    if (models.models.empty())
        raise(ErrorCode::IoError, "no checkpoints found under " + models_dir);

    std::optional<RecType> override_type;
    if (!rec_type_flag.empty()) override_type = rec_type_from_name(rec_type_flag);

    const std::vector<RecordingVerdict> verdicts =
        classify_split(manifest, split_from_name(split), models,
                       decision_params(config, !no_filter), override_type);
    save_verdicts_csv(verdicts, out_csv);
    std::fprintf(stderr, "classified %zu recordings -> %s\n", verdicts.size(),
                 out_csv.c_str());
    return 0;
}

// --- evaluate ----------------------------------------------------------------

int cmd_evaluate(const RunConfig& config, const std::string& verdicts_csv,
                 const std::string& corpus, const std::string& out_prefix) {
    const std::vector<RecordingVerdict> verdicts = load_verdicts_csv(verdicts_csv);
    const CorpusManifest manifest = load_layout(corpus);
    const AccuracyReport report = evaluate(verdicts, manifest);

    std::printf("# alpha1=%g alpha2=%g\n", config.alpha1, config.alpha2);
    std::fputs(format_accuracy_table(report).c_str(), stdout);
    if (!out_prefix.empty()) {
        save_confusion_csv(report.matrix, out_prefix + "_confusion.csv");
        save_accuracy_csv(report, out_prefix + "_accuracy.csv");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ENF power-grid classification pipeline"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may appear after the subcommand

    GlobalArgs globals;
    globals.attach(app);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic ENF corpus");
    std::string synth_out;
    std::size_t synth_grids = 9, synth_per_grid = 20, synth_noise = 0;
    double synth_train_frac = 0.8, synth_practice_frac = 0.0, synth_duration = 64.0;
    std::string synth_rec_types = "audio";
    synth->add_option("--out", synth_out, "Output corpus directory")->required();
    synth->add_option("--grids", synth_grids, "Number of grids (60 Hz grids first)");
    synth->add_option("--per-grid", synth_per_grid, "Recordings per grid and type");
    synth->add_option("--train-frac", synth_train_frac, "Fraction going to the train split");
    synth->add_option("--practice-frac", synth_practice_frac, "Fraction going to the practice split");
    synth->add_option("--rec-types", synth_rec_types, "audio, power or both");
    synth->add_option("--duration", synth_duration, "Recording duration in seconds");
    synth->add_option("--noise-test", synth_noise, "Extra noise-only test recordings (grid N)");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Cut a corpus into training frame archives");
    std::string prepare_corpus_dir, prepare_out;
    std::vector<std::string> prepare_splits = {"train"};
    bool prepare_no_filter = false;
    prepare->add_option("--corpus", prepare_corpus_dir, "Corpus root")->required();
    prepare->add_option("--out", prepare_out, "Output directory for archives")->required();
    prepare->add_option("--splits", prepare_splits, "Splits to process");
    prepare->add_flag("--no-filter", prepare_no_filter, "Skip the ENF bandpass (ablation)");

    // train
    auto* train = app.add_subcommand("train", "Train one data group's model");
    std::string train_prepared, train_group, train_out = "models", train_model_config;
    std::size_t train_epochs = 100, train_batch = 32, train_patience = 10;
    std::size_t train_front = 0, train_block2 = 0, train_gru = 0, train_dense = 0;
    double train_val_fraction = 0.2;
    bool train_no_filter = false, train_strict = false;
    train->add_option("--prepared", train_prepared, "Directory with frame archives")->required();
    train->add_option("--group", train_group, "audio50|audio60|power50|power60")->required();
    train->add_option("--out", train_out, "Output directory for checkpoints");
    train->add_option("--model-config", train_model_config, "RawNet config file (key=value)");
    train->add_option("--epochs", train_epochs, "Max training epochs");
    train->add_option("--batch-size", train_batch, "Batch size");
    train->add_option("--val-fraction", train_val_fraction, "Validation fraction");
    train->add_option("--patience", train_patience, "Early-stop patience (epochs)");
    train->add_option("--front-filters", train_front, "Override front conv filters");
    train->add_option("--block2-filters", train_block2, "Override second block filters");
    train->add_option("--gru-units", train_gru, "Override GRU units");
    train->add_option("--dense-units", train_dense, "Override dense units");
    train->add_flag("--no-filter", train_no_filter, "Consume unfiltered archives");
    train->add_flag("--strict-shapes", train_strict, "Require the reference shape chain");

    // tune
    auto* tune = app.add_subcommand("tune", "Random hyperparameter search for one group");
    std::string tune_prepared, tune_group, tune_out = "tuning";
    std::size_t tune_budget = 8, tune_epochs = 10, tune_batch = 32;
    double tune_val_fraction = 0.2;
    bool tune_no_filter = false;
    SearchSpace space;
    tune->add_option("--prepared", tune_prepared, "Directory with frame archives")->required();
    tune->add_option("--group", tune_group, "audio50|audio60|power50|power60")->required();
    tune->add_option("--out", tune_out, "Output directory for trial logs");
    tune->add_option("--budget", tune_budget, "Number of trials");
    tune->add_option("--epochs", tune_epochs, "Capped epochs per trial");
    tune->add_option("--batch-size", tune_batch, "Batch size");
    tune->add_option("--val-fraction", tune_val_fraction, "Validation fraction");
    tune->add_flag("--no-filter", tune_no_filter, "Consume unfiltered archives");
    tune->add_option("--conv-layers-min", space.conv_layers_min, "Search: min conv layers");
    tune->add_option("--conv-layers-max", space.conv_layers_max, "Search: max conv layers");
    tune->add_option("--filters-min", space.filters_min, "Search: min filters");
    tune->add_option("--filters-max", space.filters_max, "Search: max filters");
    tune->add_option("--gru-min", space.gru_min, "Search: min GRU units");
    tune->add_option("--gru-max", space.gru_max, "Search: max GRU units");
    tune->add_option("--dense-min", space.dense_min, "Search: min dense units");
    tune->add_option("--dense-max", space.dense_max, "Search: max dense units");
    tune->add_option("--lr-min", space.lr_min, "Search: min learning rate");
    tune->add_option("--lr-max", space.lr_max, "Search: max learning rate");

    // classify
    auto* classify = app.add_subcommand("classify", "Emit per-recording verdicts");
    std::string classify_corpus, classify_models = "models", classify_out, classify_split_name = "test";
    std::string classify_rec_type;
    bool classify_no_filter = false;
    classify->add_option("--corpus", classify_corpus, "Corpus root")->required();
    classify->add_option("--models", classify_models, "Directory with checkpoints");
    classify->add_option("--out", classify_out, "Output verdict CSV")->required();
    classify->add_option("--split", classify_split_name, "Split to classify");
    classify->add_option("--rec-type", classify_rec_type,
                         "Recording type for entries with unknown type");
    classify->add_flag("--no-filter", classify_no_filter, "Skip the ENF bandpass");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score verdicts against a manifest");
    std::string eval_verdicts, eval_corpus, eval_out_prefix;
    evaluate_cmd->add_option("--verdicts", eval_verdicts, "Verdict CSV")->required();
    evaluate_cmd->add_option("--corpus", eval_corpus, "Corpus root")->required();
    evaluate_cmd->add_option("--out-prefix", eval_out_prefix, "Prefix for report CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        const RunConfig config = globals.resolve();
        if (globals.print_config) std::fputs(config.dump().c_str(), stdout);

        if (synth->parsed())
            return cmd_synth(config, synth_out, synth_grids, synth_per_grid, synth_train_frac,
                             synth_practice_frac, synth_rec_types, synth_duration, synth_noise);
        if (prepare->parsed())
            return cmd_prepare(config, prepare_corpus_dir, prepare_out, prepare_splits,
                               prepare_no_filter);
        if (train->parsed())
            return cmd_train(config, train_prepared, train_group, train_out, train_model_config,
                             train_epochs, train_batch, train_val_fraction, train_patience,
                             train_no_filter, train_strict, train_front, train_block2,
                             train_gru, train_dense);
        if (tune->parsed())
            return cmd_tune(config, tune_prepared, tune_group, tune_out, tune_budget,
                            tune_epochs, tune_batch, tune_val_fraction, tune_no_filter, space);
        if (classify->parsed())
            return cmd_classify(config, classify_corpus, classify_models, classify_out,
                                classify_split_name, classify_rec_type, classify_no_filter);
        if (evaluate_cmd->parsed())
            return cmd_evaluate(config, eval_verdicts, eval_corpus, eval_out_prefix);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

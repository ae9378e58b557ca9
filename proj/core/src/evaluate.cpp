#include "enfgrid/evaluate.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace enfgrid {

namespace {

struct Tally {
    std::array<std::size_t, kNumVerdicts> correct{};
    std::array<std::size_t, kNumVerdicts> total{};

    void add(Grid truth, bool ok) {
        ++total[static_cast<std::size_t>(truth)];
        if (ok) ++correct[static_cast<std::size_t>(truth)];
    }
    std::size_t sum_total() const {
        std::size_t s = 0;
        for (std::size_t v : total) s += v;
        return s;
    }
    std::size_t sum_correct() const {
        std::size_t s = 0;
        for (std::size_t v : correct) s += v;
        return s;
    }
};

void fill_accuracies(const Tally& tally, std::array<double, kNumVerdicts>& per_class,
                     double& overall) {
    for (std::size_t g = 0; g < kNumVerdicts; ++g)
        per_class[g] = tally.total[g]
                           ? static_cast<double>(tally.correct[g]) / tally.total[g]
                           : -1.0;
    overall = tally.sum_total()
                  ? static_cast<double>(tally.sum_correct()) / tally.sum_total()
                  : 0.0;
}

} // namespace

AccuracyReport evaluate(const std::vector<RecordingVerdict>& verdicts,
                        const CorpusManifest& manifest) {
    AccuracyReport report;
    Tally audio, power, all;

    for (const RecordingVerdict& v : verdicts) {
        const ManifestEntry* entry = manifest.find(v.source_id);
        if (entry == nullptr)
            raise(ErrorCode::UnknownSource,
                  v.source_id + " does not appear in the manifest");
        const Grid truth = entry->grid;
        report.matrix.add(truth, v.final);
        const bool ok = truth == v.final;
        all.add(truth, ok);
        if (entry->rec_type == RecType::Audio) audio.add(truth, ok);
        if (entry->rec_type == RecType::Power) power.add(truth, ok);
    }

    fill_accuracies(audio, report.class_accuracy_audio, report.overall_audio);
    fill_accuracies(power, report.class_accuracy_power, report.overall_power);
    fill_accuracies(all, report.class_accuracy_all, report.overall_all);
    report.total = verdicts.size();
    return report;
}

void save_confusion_csv(const ConfusionMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << "truth\\pred";
    for (std::size_t g = 0; g < kNumVerdicts; ++g)
        out << ',' << grid_letter(static_cast<Grid>(g));
    out << '\n';
    for (std::size_t t = 0; t < kNumVerdicts; ++t) {
        out << grid_letter(static_cast<Grid>(t));
        for (std::size_t p = 0; p < kNumVerdicts; ++p) out << ',' << matrix.counts[t][p];
        out << '\n';
    }
}

namespace {

std::string accuracy_row(const char* type, const std::array<double, kNumVerdicts>& per_class,
                         double overall) {
    std::ostringstream out;
    out << type;
    char buf[32];
    for (double a : per_class) {
        if (a < 0.0) {
            out << ",na";
        } else {
            std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * a);
            out << ',' << buf;
        }
    }
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * overall);
    out << ',' << buf;
    return out.str();
}

} // namespace

void save_accuracy_csv(const AccuracyReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << format_accuracy_table(report);
}

std::string format_accuracy_table(const AccuracyReport& report) {
    std::ostringstream out;
    out << "type";
    for (std::size_t g = 0; g < kNumVerdicts; ++g)
        out << ',' << grid_letter(static_cast<Grid>(g));
    out << ",overall\n";
    out << accuracy_row("audio", report.class_accuracy_audio, report.overall_audio) << '\n';
    out << accuracy_row("power", report.class_accuracy_power, report.overall_power) << '\n';
    out << accuracy_row("all", report.class_accuracy_all, report.overall_all) << '\n';
    return out.str();
}

} // namespace enfgrid

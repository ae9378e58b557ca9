#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "enfgrid/decision.hpp"
#include "enfgrid/manifest.hpp"

namespace enfgrid {

// Row = truth, column = prediction, both over A..I plus N.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumVerdicts>, kNumVerdicts> counts{};

    std::size_t at(Grid truth, Grid pred) const {
        return counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    }
    void add(Grid truth, Grid pred) {
        ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    }
};

struct AccuracyReport {
    ConfusionMatrix matrix;
    // per-class accuracy (recall) indexed by verdict letter; negative when the
    // class has no truth samples of that type
    std::array<double, kNumVerdicts> class_accuracy_audio{};
    std::array<double, kNumVerdicts> class_accuracy_power{};
    std::array<double, kNumVerdicts> class_accuracy_all{};
    double overall_audio = 0.0;
    double overall_power = 0.0;
    double overall_all = 0.0;
    std::size_t total = 0;
};

// Truth comes from the manifest (matched by source_id). Throws UnknownSource
// when a verdict has no manifest row.
AccuracyReport evaluate(const std::vector<RecordingVerdict>& verdicts,
                        const CorpusManifest& manifest);

void save_confusion_csv(const ConfusionMatrix& matrix, const std::filesystem::path& path);
// type,A..I,N,overall rows for audio / power / all, accuracies in percent
void save_accuracy_csv(const AccuracyReport& report, const std::filesystem::path& path);
std::string format_accuracy_table(const AccuracyReport& report);

} // namespace enfgrid

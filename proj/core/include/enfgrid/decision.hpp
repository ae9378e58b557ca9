#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "enfgrid/rawnet.hpp"
#include "enfgrid/signal.hpp"

namespace enfgrid {

inline constexpr double kDefaultAlpha1 = 0.8;  // entropy threshold factor
inline constexpr double kDefaultAlpha2 = 0.75; // majority-vote fraction

struct FramePrediction {
    std::vector<double> probs;
    bool accepted = false;
    int label = -1; // class index, -1 when rejected
};

// Open-set frame gate: accept iff the base-2 Shannon entropy of probs is
// below alpha1 * log2(n), with 0*log(0) taken as 0. Throws
// InvalidDistribution on a negative entry or |sum - 1| > 1e-4.
bool entropy_accept(std::span<const double> probs, double alpha1);

double shannon_entropy_bits(std::span<const double> probs);

FramePrediction classify_frame(std::vector<double> probs, double alpha1);

// Majority vote in class-index space: -1 entries are rejected frames. The
// vote denominator is ALL frames, rejected included. Exact top ties yield no
// class.
struct VoteSummary {
    int top_class = -1; // -1 means no valid class (verdict N)
    std::vector<std::size_t> class_votes;
    std::size_t none_votes = 0;
    std::size_t total_frames = 0;
    double top_fraction = 0.0;
};

VoteSummary aggregate(std::span<const int> frame_labels, double alpha2,
                      std::size_t num_classes);

// Recording-level verdict in grid-letter space.
struct RecordingVerdict {
    std::string source_id;
    RecType rec_type = RecType::Unknown;
    Nominal nominal = Nominal::Hz50;
    Grid final = Grid::N;
    std::array<std::size_t, kNumGrids> letter_votes{};
    std::size_t none_votes = 0;
    std::size_t total_frames = 0;
    double top_fraction = 0.0;
    double alpha1 = kDefaultAlpha1;
    double alpha2 = kDefaultAlpha2;
};

// One loaded model per data group. Groups without a model are legal: any
// recording routed to them gets verdict N (no classifier, no claim).
struct ModelSet {
    std::map<DataGroupId, std::unique_ptr<RawNet<float>>> models;

    RawNet<float>* find(const DataGroupId& group) const {
        auto it = models.find(group);
        return it == models.end() ? nullptr : it->second.get();
    }
};

struct DecisionParams {
    double alpha1 = kDefaultAlpha1;
    double alpha2 = kDefaultAlpha2;
    std::uint32_t working_rate = kDefaultSampleRate;
    std::size_t frame_len = kDefaultFrameLen;
    double overlap = kDefaultOverlap;
    bool apply_bandpass = true;
};

// Full per-recording pipeline: resample to the working rate, detect the
// nominal frequency, route to the (rec_type, nominal) group, bandpass, frame,
// predict per frame, entropy-gate, majority-vote, map class indices back to
// grid letters. rec_type must be known (UnknownRecType otherwise).
RecordingVerdict classify_recording(const Recording& recording, const ModelSet& models,
                                    const DecisionParams& params);

// CSV row: source_id, rec_type, nominal, final, top_fraction, per-letter
// counts, none count.
std::string verdict_csv_header();
std::string verdict_csv_row(const RecordingVerdict& verdict);
void save_verdicts_csv(const std::vector<RecordingVerdict>& verdicts,
                       const std::filesystem::path& path);
std::vector<RecordingVerdict> load_verdicts_csv(const std::filesystem::path& path);

} // namespace enfgrid

#include "enfgrid/decision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "enfgrid/spectral.hpp"

namespace enfgrid {

double shannon_entropy_bits(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

namespace {

void validate_distribution(std::span<const double> probs) {
    if (probs.size() < 2)
        raise(ErrorCode::InvalidDistribution, "need at least two classes");
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0)
            raise(ErrorCode::InvalidDistribution, "negative probability entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-4)
        raise(ErrorCode::InvalidDistribution,
              "probabilities sum to " + std::to_string(sum));
}

} // namespace

bool entropy_accept(std::span<const double> probs, double alpha1) {
    validate_distribution(probs);
    const double threshold = alpha1 * std::log2(static_cast<double>(probs.size()));
    return shannon_entropy_bits(probs) < threshold;
}

FramePrediction classify_frame(std::vector<double> probs, double alpha1) {
    FramePrediction pred;
    pred.accepted = entropy_accept(probs, alpha1);
    if (pred.accepted) {
        pred.label = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    pred.probs = std::move(probs);
    return pred;
}

VoteSummary aggregate(std::span<const int> frame_labels, double alpha2,
                      std::size_t num_classes) {
    if (frame_labels.empty())
        raise(ErrorCode::EmptyInput, "no frame labels to aggregate");
    if (!(alpha2 > 0.5 && alpha2 <= 1.0))
        raise(ErrorCode::ConfigInvalid, "alpha2 must lie in (0.5, 1]");

    VoteSummary summary;
    summary.class_votes.assign(num_classes, 0);
    summary.total_frames = frame_labels.size();
    for (int label : frame_labels) {
        if (label < 0) {
            ++summary.none_votes;
        } else if (static_cast<std::size_t>(label) < num_classes) {
            ++summary.class_votes[static_cast<std::size_t>(label)];
        } else {
            raise(ErrorCode::LabelOutOfRange, "vote label " + std::to_string(label));
        }
    }

    std::size_t best = 0, best_count = 0;
    bool tied = false;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (summary.class_votes[c] > best_count) {
            best = c;
            best_count = summary.class_votes[c];
            tied = false;
        } else if (summary.class_votes[c] == best_count && best_count > 0) {
            tied = true;
        }
    }

    // denominator includes rejected frames
    summary.top_fraction =
        static_cast<double>(best_count) / static_cast<double>(summary.total_frames);
    if (best_count > 0 && !tied && summary.top_fraction >= alpha2)
        summary.top_class = static_cast<int>(best);
    return summary;
}

RecordingVerdict classify_recording(const Recording& recording, const ModelSet& models,
                                    const DecisionParams& params) {
    if (recording.rec_type == RecType::Unknown)
        raise(ErrorCode::UnknownRecType,
              recording.source_id + ": recording type unknown and no override given");

    RecordingVerdict verdict;
    verdict.source_id = recording.source_id;
    verdict.rec_type = recording.rec_type;
    verdict.alpha1 = params.alpha1;
    verdict.alpha2 = params.alpha2;

    const Recording working = resample_recording(recording, params.working_rate);
    verdict.nominal = detect_nominal(working).nominal;

    const DataGroupId group{recording.rec_type, verdict.nominal};
    Recording prepared = working;
    if (params.apply_bandpass)
        prepared.samples = bandpass_enf(working.samples, working.sample_rate, verdict.nominal);
    const FrameBatch frames = make_frames(prepared, params.frame_len, params.overlap);
    verdict.total_frames = frames.num_frames;

    RawNet<float>* model = models.find(group);
    if (model == nullptr) {
        // no classifier for this group: no claim can be made
        std::fprintf(stderr, "warning: no model for group %s, %s gets verdict N\n",
                     group_name(group).c_str(), recording.source_id.c_str());
        verdict.none_votes = frames.num_frames;
        return verdict;
    }

    std::vector<int> labels(frames.num_frames, -1);
    for (std::size_t i = 0; i < frames.num_frames; ++i) {
        const FramePrediction pred =
            classify_frame(model->predict_frame(frames.frame(i), frames.frame_len),
                           params.alpha1);
        labels[i] = pred.label;
    }

    const VoteSummary votes = aggregate(labels, params.alpha2, group_num_classes(group));
    verdict.none_votes = votes.none_votes;
    verdict.top_fraction = votes.top_fraction;
    for (std::size_t c = 0; c < votes.class_votes.size(); ++c) {
        const Grid grid = group_class_grid(group, c);
        verdict.letter_votes[static_cast<std::size_t>(grid)] = votes.class_votes[c];
    }
    if (votes.top_class >= 0)
        verdict.final = group_class_grid(group, static_cast<std::size_t>(votes.top_class));
    return verdict;
}

std::string verdict_csv_header() {
    std::string header = "source_id,rec_type,nominal,final,top_fraction";
    for (std::size_t g = 0; g < kNumGrids; ++g) {
        header += ",count_";
        header += grid_letter(static_cast<Grid>(g));
    }
    header += ",count_none,total_frames";
    return header;
}

std::string verdict_csv_row(const RecordingVerdict& verdict) {
    std::ostringstream out;
    char frac[32];
    std::snprintf(frac, sizeof(frac), "%.6f", verdict.top_fraction);
    out << verdict.source_id << ',' << rec_type_name(verdict.rec_type) << ','
        << nominal_name(verdict.nominal) << ',' << grid_letter(verdict.final) << ','
        << frac;
    for (std::size_t g = 0; g < kNumGrids; ++g) out << ',' << verdict.letter_votes[g];
    out << ',' << verdict.none_votes << ',' << verdict.total_frames;
    return out.str();
}

void save_verdicts_csv(const std::vector<RecordingVerdict>& verdicts,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << verdict_csv_header() << '\n';
    for (const RecordingVerdict& v : verdicts) out << verdict_csv_row(v) << '\n';
}

std::vector<RecordingVerdict> load_verdicts_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());

    std::vector<RecordingVerdict> verdicts;
    std::string line;
    if (!std::getline(in, line) || line != verdict_csv_header())
        raise(ErrorCode::MalformedArchive, "bad verdict header in " + path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5 + kNumGrids + 2)
            raise(ErrorCode::MalformedArchive, "bad verdict row: " + line);

        RecordingVerdict v;
        v.source_id = fields[0];
        v.rec_type = rec_type_from_name(fields[1]);
        v.nominal = nominal_from_name(fields[2]);
        v.final = grid_from_letter(fields[3][0]);
        v.top_fraction = std::stod(fields[4]);
        for (std::size_t g = 0; g < kNumGrids; ++g)
            v.letter_votes[g] = std::stoul(fields[5 + g]);
        v.none_votes = std::stoul(fields[5 + kNumGrids]);
        v.total_frames = std::stoul(fields[6 + kNumGrids]);
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

} // namespace enfgrid

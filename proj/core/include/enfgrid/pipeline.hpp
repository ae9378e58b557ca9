#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enfgrid/decision.hpp"
#include "enfgrid/manifest.hpp"
#include "enfgrid/train.hpp"

namespace enfgrid {

struct PrepareOptions {
    std::vector<Split> splits = {Split::Train};
    bool apply_bandpass = true; // false = the unfiltered ablation branch
    std::uint32_t working_rate = kDefaultSampleRate;
    std::size_t frame_len = kDefaultFrameLen;
    double overlap = kDefaultOverlap;
};

struct PrepareSummaryRow {
    Split split;
    RecType rec_type;
    Grid grid;
    std::size_t recordings = 0;
    std::size_t frames = 0;
};

struct PrepareResult {
    std::vector<PrepareSummaryRow> summary;
    std::vector<std::filesystem::path> archives;
};

// Archive file name for one (split, group, grid) cell; unfiltered archives
// carry a "_nofilter" tag.
std::string archive_name(Split split, const DataGroupId& group, Grid grid,
                         bool filtered);

// Cuts every recording of the requested splits into normalized frames and
// appends them to per-(split, group, grid) archives under out_dir. Labeled
// splits take the nominal from the grid letter; test-split recordings run
// nominal detection instead (grid N recordings always do). Also writes
// out_dir/summary.csv with per-grid frame counts.
PrepareResult prepare_corpus(const CorpusManifest& manifest,
                             const std::filesystem::path& out_dir,
                             const PrepareOptions& options);

// Loads the train-split archives of one group back as a labeled frame set,
// label = class index within the group.
LabeledFrames load_group_frames(const std::filesystem::path& prepared_dir,
                                const DataGroupId& group, Split split, bool filtered);

// Classifies every recording of one split, sorted by source_id. rec_type
// override applies to recordings whose manifest type is Unknown.
std::vector<RecordingVerdict> classify_split(const CorpusManifest& manifest, Split split,
                                             const ModelSet& models,
                                             const DecisionParams& params,
                                             std::optional<RecType> rec_type_override = {});

// models_dir layout: <group>.egnw + <group>.config per trained group.
ModelSet load_model_set(const std::filesystem::path& models_dir);

} // namespace enfgrid

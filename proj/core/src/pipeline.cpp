#include "enfgrid/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "enfgrid/spectral.hpp"
#include "enfgrid/wav.hpp"

namespace enfgrid {

std::string archive_name(Split split, const DataGroupId& group, Grid grid, bool filtered) {
    std::string name = std::string(split_name(split)) + "_" + group_name(group) + "_" +
                       grid_letter(grid);
    if (!filtered) name += "_nofilter";
    return name + ".egn1";
}

PrepareResult prepare_corpus(const CorpusManifest& manifest,
                             const std::filesystem::path& out_dir,
                             const PrepareOptions& options) {
    std::filesystem::create_directories(out_dir);

    struct Cell {
        FrameBatch frames;
        std::size_t recordings = 0;
    };
    std::map<std::string, Cell> cells;           // archive name -> frames
    std::map<std::string, PrepareSummaryRow> summary; // summary key -> row

    for (Split split : options.splits) {
        for (const ManifestEntry& entry : manifest.split_entries(split)) {
            if (entry.rec_type == RecType::Unknown)
                raise(ErrorCode::UnknownRecType,
                      entry.path + ": recording type required for grouping");
            Recording rec = decode_wav(manifest.root / entry.path);
            rec.source_id = entry.path;
            rec.rec_type = entry.rec_type;
            rec = resample_recording(rec, options.working_rate);

            // labeled splits trust the letter; the test split (and anything
            // unlabeled) is grouped by detection
            Nominal nominal;
            if (entry.nominal.has_value())
                nominal = *entry.nominal;
            else
                nominal = detect_nominal(rec).nominal;

            if (options.apply_bandpass)
                rec.samples = bandpass_enf(rec.samples, rec.sample_rate, nominal);
            const FrameBatch frames = make_frames(rec, options.frame_len, options.overlap);

            const DataGroupId group{entry.rec_type, nominal};
            const std::string archive =
                archive_name(split, group, entry.grid, options.apply_bandpass);
            Cell& cell = cells[archive];
            append_frames(cell.frames, frames);
            ++cell.recordings;

            const std::string key = std::string(split_name(split)) + "," +
                                    rec_type_name(entry.rec_type) + "," +
                                    grid_letter(entry.grid);
            PrepareSummaryRow& row = summary[key];
            row.split = split;
            row.rec_type = entry.rec_type;
            row.grid = entry.grid;
            ++row.recordings;
            row.frames += frames.num_frames;
        }
    }

    PrepareResult result;
    for (auto& [name, cell] : cells) {
        const std::filesystem::path path = out_dir / name;
        save_frame_archive(cell.frames, path);
        result.archives.push_back(path);
    }
    for (auto& [key, row] : summary) result.summary.push_back(row);

    std::ofstream out(out_dir / "summary.csv");
    if (!out) raise(ErrorCode::IoError, "cannot write prepare summary");
    out << "split,rec_type,grid,recordings,frames\n";
    for (const PrepareSummaryRow& row : result.summary)
        out << split_name(row.split) << ',' << rec_type_name(row.rec_type) << ','
            << grid_letter(row.grid) << ',' << row.recordings << ',' << row.frames << '\n';
    return result;
}

LabeledFrames load_group_frames(const std::filesystem::path& prepared_dir,
                                const DataGroupId& group, Split split, bool filtered) {
    LabeledFrames data;
    FrameBatch merged;
    std::vector<int> labels;

    const std::size_t num_classes = group_num_classes(group);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const Grid grid = group_class_grid(group, c);
        const std::filesystem::path path =
            prepared_dir / archive_name(split, group, grid, filtered);
        if (!std::filesystem::exists(path)) continue; // caller validates class coverage
        const FrameBatch batch = load_frame_archive(path);
        labels.insert(labels.end(), batch.num_frames, static_cast<int>(c));
        append_frames(merged, batch);
    }

    data.frames = Tensor<float>({merged.num_frames, merged.frame_len},
                                std::move(merged.frames));
    data.labels = std::move(labels);
    return data;
}

std::vector<RecordingVerdict> classify_split(const CorpusManifest& manifest, Split split,
                                             const ModelSet& models,
                                             const DecisionParams& params,
                                             std::optional<RecType> rec_type_override) {
    std::vector<ManifestEntry> entries = manifest.split_entries(split);
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

    std::vector<RecordingVerdict> verdicts;
    verdicts.reserve(entries.size());
    for (const ManifestEntry& entry : entries) {
        Recording rec = decode_wav(manifest.root / entry.path);
        rec.source_id = entry.path;
        rec.rec_type = entry.rec_type;
        if (rec.rec_type == RecType::Unknown && rec_type_override)
            rec.rec_type = *rec_type_override;
        verdicts.push_back(classify_recording(rec, models, params));
    }
    return verdicts;
}

ModelSet load_model_set(const std::filesystem::path& models_dir) {
    ModelSet set;
    for (RecType type : {RecType::Audio, RecType::Power}) {
        for (Nominal nominal : {Nominal::Hz50, Nominal::Hz60}) {
            const DataGroupId group{type, nominal};
            const std::filesystem::path checkpoint =
                models_dir / (group_name(group) + ".egnw");
            const std::filesystem::path config_path =
                models_dir / (group_name(group) + ".config");
            if (!std::filesystem::exists(checkpoint)) continue;
            if (!std::filesystem::exists(config_path))
                raise(ErrorCode::IoError,
                      "checkpoint without config: " + checkpoint.string());
            const RawNetConfig config = load_config(config_path);
            set.models[group] = load_checkpoint(config, checkpoint);
        }
    }
    return set;
}

} // namespace enfgrid

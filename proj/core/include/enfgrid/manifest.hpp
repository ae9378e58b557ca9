#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "enfgrid/synth.hpp"
#include "enfgrid/types.hpp"

namespace enfgrid {

enum class Split : std::uint8_t { Train, Practice, Test };
const char* split_name(Split split);
Split split_from_name(const std::string& name);

struct ManifestEntry {
    std::string path; // relative to the corpus root; doubles as source_id
    Grid grid = Grid::N;
    RecType rec_type = RecType::Unknown;
    std::optional<Nominal> nominal; // unset for test rows (detected later)
    double duration_s = 0.0;
    std::uint64_t seed = 0;

    Split split() const; // derived from the leading path component
};

struct CorpusManifest {
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split_entries(Split split) const;
    const ManifestEntry* find(const std::string& path) const;
};

// CSV with header path,grid,rec_type,nominal,duration_s,seed.
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& csv_path);
CorpusManifest load_manifest(const std::filesystem::path& csv_path);

// Generates the corpus under spec-defined layout
// root/{train,practice,test}/{audio,power}/<grid letter or N>/*.wav,
// writes root/manifest.csv, and returns the manifest. Pure function of
// (spec contents, seed): regenerating yields byte-identical files.
CorpusManifest make_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

// Scans a corpus directory following the layout above. Train/practice rows
// get their nominal from the grid letter; test rows leave it unset. When
// root/manifest.csv exists its seed/duration metadata is merged in (grid and
// rec_type must agree with the path). Throws LayoutError on any .wav outside
// the schema.
CorpusManifest load_layout(const std::filesystem::path& root);

} // namespace enfgrid

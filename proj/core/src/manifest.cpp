#include "enfgrid/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "enfgrid/rng.hpp"
#include "enfgrid/wav.hpp"

namespace enfgrid {

const char* split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Practice: return "practice";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "practice") return Split::Practice;
    if (name == "test") return Split::Test;
    raise(ErrorCode::LayoutError, "unknown split '" + name + "'");
}

Split ManifestEntry::split() const {
    const auto slash = path.find('/');
    if (slash == std::string::npos)
        raise(ErrorCode::LayoutError, "manifest path without split component: " + path);
    return split_from_name(path.substr(0, slash));
}

std::vector<ManifestEntry> CorpusManifest::split_entries(Split split) const {
    std::vector<ManifestEntry> out;
    for (const ManifestEntry& e : entries)
        if (e.split() == split) out.push_back(e);
    return out;
}

const ManifestEntry* CorpusManifest::find(const std::string& path) const {
    for (const ManifestEntry& e : entries)
        if (e.path == path) return &e;
    return nullptr;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + csv_path.string());
    out << "path,grid,rec_type,nominal,duration_s,seed\n";
    char buf[64];
    for (const ManifestEntry& e : manifest.entries) {
        std::snprintf(buf, sizeof(buf), "%.3f", e.duration_s);
        out << e.path << ',' << grid_letter(e.grid) << ',' << rec_type_name(e.rec_type)
            << ',' << (e.nominal ? nominal_name(*e.nominal) : "") << ',' << buf << ','
            << e.seed << '\n';
    }
}

CorpusManifest load_manifest(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + csv_path.string());

    CorpusManifest manifest;
    manifest.root = csv_path.parent_path();
    std::string line;
    if (!std::getline(in, line) || line != "path,grid,rec_type,nominal,duration_s,seed")
        raise(ErrorCode::LayoutError, "bad manifest header in " + csv_path.string());

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 6) fields.emplace_back(); // trailing empties
        if (fields.size() != 6)
            raise(ErrorCode::LayoutError, "bad manifest row: " + line);

        ManifestEntry e;
        e.path = fields[0];
        e.grid = grid_from_letter(fields[1].empty() ? 'N' : fields[1][0]);
        e.rec_type = rec_type_from_name(fields[2]);
        if (!fields[3].empty()) e.nominal = nominal_from_name(fields[3]);
        e.duration_s = fields[4].empty() ? 0.0 : std::stod(fields[4]);
        e.seed = fields[5].empty() ? 0 : std::stoull(fields[5]);
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

namespace {

ManifestEntry write_one(const std::filesystem::path& root, Split split, RecType type,
                        Grid grid, std::size_t index, const CorpusSpec& spec) {
    const GridProfile profile = [&] {
        if (grid == Grid::N) return GridProfile{}; // unused
        auto it = spec.profiles.find(grid);
        if (it != spec.profiles.end()) return it->second;
        return default_grid_profile(grid, type);
    }();

    char name[128];
    std::snprintf(name, sizeof(name), "%c_%s_%s_%03zu.wav", grid_letter(grid),
                  rec_type_name(type), split_name(split), index);
    const std::string rel = std::string(split_name(split)) + "/" + rec_type_name(type) +
                            "/" + grid_letter(grid) + "/" + name;

    const std::uint64_t seed =
        derive_seed(spec.seed, rel); // path-keyed: stable under count changes

    Recording rec = grid == Grid::N
                        ? synth_noise(spec.duration_s, spec.sample_rate, seed)
                        : synth_enf(profile, spec.duration_s, spec.sample_rate, seed);

    const std::filesystem::path dir = root / split_name(split) / rec_type_name(type) /
                                      std::string(1, grid_letter(grid));
    std::filesystem::create_directories(dir);
    write_wav_pcm16(dir / name, rec.samples, spec.sample_rate);

    ManifestEntry e;
    e.path = rel;
    e.grid = grid;
    e.rec_type = type;
    if (split != Split::Test && grid != Grid::N) e.nominal = grid_nominal(grid);
    e.duration_s = spec.duration_s;
    e.seed = seed;
    return e;
}

} // namespace

CorpusManifest make_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    CorpusManifest manifest;
    manifest.root = out_dir;

    struct SplitPlan {
        Split split;
        std::size_t count;
    };
    const SplitPlan plans[] = {{Split::Train, spec.train_per_grid},
                               {Split::Practice, spec.practice_per_grid},
                               {Split::Test, spec.test_per_grid}};

    for (const SplitPlan& plan : plans)
        for (RecType type : spec.rec_types)
            for (Grid grid : spec.grids)
                for (std::size_t i = 0; i < plan.count; ++i)
                    manifest.entries.push_back(
                        write_one(out_dir, plan.split, type, grid, i, spec));

    for (RecType type : spec.rec_types)
        for (std::size_t i = 0; i < spec.noise_test; ++i)
            manifest.entries.push_back(
                write_one(out_dir, Split::Test, type, Grid::N, i, spec));

    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    save_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

CorpusManifest load_layout(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        raise(ErrorCode::LayoutError, root.string() + " is not a directory");

    // optional manifest for seed/duration metadata
    std::map<std::string, ManifestEntry> recorded;
    const std::filesystem::path manifest_csv = root / "manifest.csv";
    if (std::filesystem::exists(manifest_csv))
        for (ManifestEntry& e : load_manifest(manifest_csv).entries)
            recorded[e.path] = e;

    CorpusManifest manifest;
    manifest.root = root;
    for (const auto& walk : std::filesystem::recursive_directory_iterator(root)) {
        if (!walk.is_regular_file()) continue;
        const std::filesystem::path& file = walk.path();
        if (file.extension() != ".wav") continue;

        const std::string rel = std::filesystem::relative(file, root).generic_string();
        std::vector<std::string> parts;
        std::stringstream ss(rel);
        std::string part;
        while (std::getline(ss, part, '/')) parts.push_back(part);
        if (parts.size() != 4)
            raise(ErrorCode::LayoutError,
                  rel + " does not follow split/type/grid/file.wav");

        ManifestEntry e;
        const Split split = split_from_name(parts[0]); // throws LayoutError
        // "audio" or "power"; an "unknown" directory is allowed for corpora
        // whose type must be supplied at classification time (--rec-type)
        e.rec_type = rec_type_from_name(parts[1]);
        if (parts[2].size() != 1)
            raise(ErrorCode::LayoutError, rel + " has a bad grid directory");
        e.grid = grid_from_letter(parts[2][0]);
        e.path = rel;
        if (split != Split::Test && e.grid != Grid::N) e.nominal = grid_nominal(e.grid);

        if (auto it = recorded.find(rel); it != recorded.end()) {
            if (it->second.grid != e.grid || it->second.rec_type != e.rec_type)
                raise(ErrorCode::LayoutError,
                      rel + " disagrees with the manifest about grid or type");
            e.duration_s = it->second.duration_s;
            e.seed = it->second.seed;
        } else {
            const Recording rec = decode_wav(file);
            e.duration_s = rec.duration_s();
        }
        manifest.entries.push_back(std::move(e));
    }

    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    return manifest;
}

} // namespace enfgrid

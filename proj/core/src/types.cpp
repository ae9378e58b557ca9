#include "enfgrid/types.hpp"

#include <algorithm>

namespace enfgrid {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedWav: return "MalformedWav";
        case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
        case ErrorCode::EmptyPayload: return "EmptyPayload";
        case ErrorCode::RecordingTooShort: return "RecordingTooShort";
        case ErrorCode::InvalidWindow: return "InvalidWindow";
        case ErrorCode::BandOutOfRange: return "BandOutOfRange";
        case ErrorCode::NyquistViolation: return "NyquistViolation";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DegenerateBatch: return "DegenerateBatch";
        case ErrorCode::GraphNotRecorded: return "GraphNotRecorded";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::InvalidDistribution: return "InvalidDistribution";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::UnknownRecType: return "UnknownRecType";
        case ErrorCode::InvalidProfile: return "InvalidProfile";
        case ErrorCode::LayoutError: return "LayoutError";
        case ErrorCode::UnknownSource: return "UnknownSource";
        case ErrorCode::MalformedArchive: return "MalformedArchive";
        case ErrorCode::MalformedCheckpoint: return "MalformedCheckpoint";
        case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

double nominal_hz(Nominal nominal) {
    return nominal == Nominal::Hz50 ? 50.0 : 60.0;
}

Nominal grid_nominal(Grid grid) {
    switch (grid) {
        case Grid::A:
        case Grid::C:
        case Grid::I:
            return Nominal::Hz60;
        case Grid::B:
        case Grid::D:
        case Grid::E:
        case Grid::F:
        case Grid::G:
        case Grid::H:
            return Nominal::Hz50;
        case Grid::N:
            break;
    }
    raise(ErrorCode::ConfigInvalid, "grid N has no nominal frequency");
}

char grid_letter(Grid grid) {
    static constexpr char letters[] = "ABCDEFGHIN";
    return letters[static_cast<std::size_t>(grid)];
}

Grid grid_from_letter(char letter) {
    if (letter >= 'A' && letter <= 'I')
        return static_cast<Grid>(letter - 'A');
    if (letter == 'N') return Grid::N;
    raise(ErrorCode::LayoutError, std::string("unknown grid letter '") + letter + "'");
}

const char* rec_type_name(RecType type) {
    switch (type) {
        case RecType::Audio: return "audio";
        case RecType::Power: return "power";
        case RecType::Unknown: return "unknown";
    }
    return "unknown";
}

RecType rec_type_from_name(const std::string& name) {
    if (name == "audio") return RecType::Audio;
    if (name == "power") return RecType::Power;
    if (name == "unknown" || name.empty()) return RecType::Unknown;
    raise(ErrorCode::LayoutError, "unknown recording type '" + name + "'");
}

const char* nominal_name(Nominal nominal) {
    return nominal == Nominal::Hz50 ? "50" : "60";
}

Nominal nominal_from_name(const std::string& name) {
    if (name == "50") return Nominal::Hz50;
    if (name == "60") return Nominal::Hz60;
    raise(ErrorCode::LayoutError, "unknown nominal '" + name + "'");
}

std::size_t group_num_classes(const DataGroupId& group) {
    return group.nominal == Nominal::Hz60 ? kClasses60.size() : kClasses50.size();
}

std::string group_name(const DataGroupId& group) {
    return std::string(rec_type_name(group.rec_type)) + nominal_name(group.nominal);
}

DataGroupId group_from_name(const std::string& name) {
    for (RecType type : {RecType::Audio, RecType::Power}) {
        for (Nominal nominal : {Nominal::Hz50, Nominal::Hz60}) {
            DataGroupId group{type, nominal};
            if (group_name(group) == name) return group;
        }
    }
    raise(ErrorCode::ConfigInvalid, "unknown data group '" + name + "'");
}

Grid group_class_grid(const DataGroupId& group, std::size_t class_index) {
    if (group.nominal == Nominal::Hz60) {
        if (class_index >= kClasses60.size())
            raise(ErrorCode::LabelOutOfRange, "class index out of range for a 60 Hz group");
        return kClasses60[class_index];
    }
    if (class_index >= kClasses50.size())
        raise(ErrorCode::LabelOutOfRange, "class index out of range for a 50 Hz group");
    return kClasses50[class_index];
}

std::size_t group_grid_class(const DataGroupId& group, Grid grid) {
    if (group.nominal == Nominal::Hz60) {
        auto it = std::find(kClasses60.begin(), kClasses60.end(), grid);
        if (it == kClasses60.end())
            raise(ErrorCode::LabelOutOfRange,
                  std::string("grid ") + grid_letter(grid) + " is not in the 60 Hz group");
        return static_cast<std::size_t>(it - kClasses60.begin());
    }
    auto it = std::find(kClasses50.begin(), kClasses50.end(), grid);
    if (it == kClasses50.end())
        raise(ErrorCode::LabelOutOfRange,
              std::string("grid ") + grid_letter(grid) + " is not in the 50 Hz group");
    return static_cast<std::size_t>(it - kClasses50.begin());
}

} // namespace enfgrid

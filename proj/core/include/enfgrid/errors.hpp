#pragma once

#include <stdexcept>
#include <string>

namespace enfgrid {

// Every failure mode the pipeline can report. Tests match on the code, not
// the message text.
enum class ErrorCode {
    MalformedWav,
    UnsupportedEncoding,
    EmptyPayload,
    RecordingTooShort,
    InvalidWindow,
    BandOutOfRange,
    NyquistViolation,
    ShapeMismatch,
    DegenerateBatch,
    GraphNotRecorded,
    ConfigInvalid,
    EmptyClass,
    LabelOutOfRange,
    InvalidDistribution,
    EmptyInput,
    UnknownRecType,
    InvalidProfile,
    LayoutError,
    UnknownSource,
    MalformedArchive,
    MalformedCheckpoint,
    CheckpointMismatch,
    IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace enfgrid

// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsic {

enum class ErrorCode {
    MalformedWav,
    UnsupportedEncoding,
    WrongSampleRate,
    ClipTooShort,
    ConfigInvalid,
    SignalSilent,
    ShapeMismatch,
    EmptyDataset,
    NonFiniteInput,
    EmptyCalibrationSet,
    MissingCalibration,
    CorruptFile,
    UnsupportedVersion,
    UnknownLayerKind,
    MalformedRecord,
    UnknownLabel,
    InconsistentSlots,
    EmptySplit,
    NotConnected,
    PublishTimeout,
    ProtocolError,
    WrongDevice,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every domain failure in the library is reported through this type; the
// code is what callers (and the CLI exit-code mapping) switch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lsic

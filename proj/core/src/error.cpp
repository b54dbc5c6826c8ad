// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/error.hpp"

namespace lsic {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedWav: return "MalformedWav";
        case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
        case ErrorCode::WrongSampleRate: return "WrongSampleRate";
        case ErrorCode::ClipTooShort: return "ClipTooShort";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::SignalSilent: return "SignalSilent";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::EmptyCalibrationSet: return "EmptyCalibrationSet";
        case ErrorCode::MissingCalibration: return "MissingCalibration";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::UnknownLayerKind: return "UnknownLayerKind";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
        case ErrorCode::InconsistentSlots: return "InconsistentSlots";
        case ErrorCode::EmptySplit: return "EmptySplit";
        case ErrorCode::NotConnected: return "NotConnected";
        case ErrorCode::PublishTimeout: return "PublishTimeout";
        case ErrorCode::ProtocolError: return "ProtocolError";
        case ErrorCode::WrongDevice: return "WrongDevice";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace lsic

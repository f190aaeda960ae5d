#include "atlas/errors.hpp"

namespace atlas {

std::string_view error_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::EmptyCorpus: return "EmptyCorpus";
        case ErrorKind::BackendError: return "BackendError";
        case ErrorKind::InsufficientClasses: return "InsufficientClasses";
        case ErrorKind::DecodeError: return "DecodeError";
        case ErrorKind::ManifestError: return "ManifestError";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::CorruptStore: return "CorruptStore";
        case ErrorKind::BadInterval: return "BadInterval";
        case ErrorKind::BadBBox: return "BadBBox";
        case ErrorKind::ClientError: return "ClientError";
        case ErrorKind::QuotaExceeded: return "QuotaExceeded";
        case ErrorKind::EmptyRegion: return "EmptyRegion";
        case ErrorKind::DegenerateScores: return "DegenerateScores";
        case ErrorKind::BadArgument: return "BadArgument";
        case ErrorKind::UnknownCorpus: return "UnknownCorpus";
        case ErrorKind::UnknownImage: return "UnknownImage";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Error";
}

}  // namespace atlas

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace atlas {

enum class ErrorKind {
    ZeroVector,
    DimMismatch,
    EmptyCorpus,
    BackendError,
    InsufficientClasses,
    DecodeError,
    ManifestError,
    DuplicateId,
    CorruptStore,
    BadInterval,
    BadBBox,
    ClientError,
    QuotaExceeded,
    EmptyRegion,
    DegenerateScores,
    BadArgument,
    UnknownCorpus,
    UnknownImage,
    IoError,
    ConfigError,
};

std::string_view error_name(ErrorKind kind) noexcept;

// Base of every engine error. `name()` is the stable identifier surfaced by
// the CLI error line and the HTTP error body.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::string_view name() const noexcept { return error_name(kind_); }

private:
    ErrorKind kind_;
};

class ManifestError : public Error {
public:
    ManifestError(std::size_t line, const std::string& message)
        : Error(ErrorKind::ManifestError, "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    // 1-based line number in the manifest file.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class CorruptStore : public Error {
public:
    CorruptStore(std::uint64_t offset, const std::string& message)
        : Error(ErrorKind::CorruptStore,
                "offset " + std::to_string(offset) + ": " + message),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace atlas

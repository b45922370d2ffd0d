#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eqcl {

// Base of every error raised by the library. Callers that only care about
// "did it work" catch this; the subclasses exist so tests and the CLI can
// tell the failure modes apart.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedModulation : public Error { using Error::Error; };
class InvalidSignal : public Error { using Error::Error; };
class InvalidParameter : public Error { using Error::Error; };
class InvalidRepresentation : public Error { using Error::Error; };
class SignalTooShort : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class StaleCacheError : public Error { using Error::Error; };
class NumericFailure : public Error { using Error::Error; };
class DegenerateEmbedding : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

class InfeasibleFraction : public Error {
public:
    InfeasibleFraction(const std::string& what, int cls) : Error(what), class_index(cls) {}
    int class_index;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), byte_offset(offset) {}
    std::uint64_t byte_offset;
};

}  // namespace eqcl

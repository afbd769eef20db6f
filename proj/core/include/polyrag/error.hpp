#pragma once
// Error taxonomy shared by the library and the CLI exit-code mapping.

#include <stdexcept>
#include <string>

namespace polyrag {

enum class ErrorClass {
    Usage,      // bad arguments / malformed request        -> exit 2
    Config,     // configuration file or value problems     -> exit 3
    Backend,    // provider transport or contract failures  -> exit 4
    Integrity,  // digest mismatch, missing layer, bad data -> exit 5
    Internal,   // bug or violated internal invariant       -> exit 1
};

inline const char* error_class_name(ErrorClass c) {
    switch (c) {
        case ErrorClass::Usage: return "usage";
        case ErrorClass::Config: return "config";
        case ErrorClass::Backend: return "backend";
        case ErrorClass::Integrity: return "data-integrity";
        case ErrorClass::Internal: return "internal";
    }
    return "internal";
}

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& message)
        : std::runtime_error(message), cls_(cls) {}

    ErrorClass error_class() const { return cls_; }

private:
    ErrorClass cls_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error(ErrorClass::Usage, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorClass::Config, m) {}
};
struct IntegrityError : Error {
    explicit IntegrityError(const std::string& m) : Error(ErrorClass::Integrity, m) {}
};

// Backend failures carry a kind so callers can decide whether to retry.
enum class BackendErrorKind { Transport, RateLimit, ContextOverflow, Contract };

class BackendError : public Error {
public:
    BackendError(BackendErrorKind kind, const std::string& message)
        : Error(ErrorClass::Backend, message), kind_(kind) {}

    BackendErrorKind kind() const { return kind_; }
    bool retryable() const {
        return kind_ == BackendErrorKind::Transport || kind_ == BackendErrorKind::RateLimit;
    }

private:
    BackendErrorKind kind_;
};

}  // namespace polyrag

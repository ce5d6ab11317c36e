#pragma once

#include <stdexcept>
#include <string>

namespace cvnn {

// Every failure carries a short machine-readable code; the CLI prints it verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error("DIMENSION_MISMATCH", what) {}
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error("INVALID_ARGUMENT", what) {}
};

struct EvaluationError : Error {
    explicit EvaluationError(const std::string& what) : Error("EVALUATION_FAILED", what) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& what) : Error("PRECONDITION_VIOLATED", what) {}
};

struct InconclusiveError : Error {
    explicit InconclusiveError(const std::string& what) : Error("INCONCLUSIVE", what) {}
};

struct IncompatibleError : Error {
    explicit IncompatibleError(const std::string& what) : Error("INCOMPATIBLE", what) {}
};

struct SingularError : Error {
    explicit SingularError(const std::string& what) : Error("SINGULAR_SYSTEM", what) {}
};

}  // namespace cvnn

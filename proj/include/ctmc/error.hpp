#pragma once

#include <stdexcept>
#include <string>

namespace ctmc {

enum class ErrorKind {
    InvalidInput,
    NegativeOffDiagonal,
    RowSumNonzero,
    Reducible,
    SolveFailed,
    NegativeTime,
    NonpositiveArgument,
    BoundaryLikelihood,
    BoundaryUnsupported,
    NonzeroMean,
    NotDetailedBalance,
    EigenFailed,
    OptFailed,
    Infeasible,
    HorizonMismatch,
    BadTangent,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace ctmc

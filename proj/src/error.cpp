#include "ctmc/error.hpp"

namespace ctmc {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorKind::RowSumNonzero: return "RowSumNonzero";
    case ErrorKind::Reducible: return "Reducible";
    case ErrorKind::SolveFailed: return "SolveFailed";
    case ErrorKind::NegativeTime: return "NegativeTime";
    case ErrorKind::NonpositiveArgument: return "NonpositiveArgument";
    case ErrorKind::BoundaryLikelihood: return "BoundaryLikelihood";
    case ErrorKind::BoundaryUnsupported: return "BoundaryUnsupported";
    case ErrorKind::NonzeroMean: return "NonzeroMean";
    case ErrorKind::NotDetailedBalance: return "NotDetailedBalance";
    case ErrorKind::EigenFailed: return "EigenFailed";
    case ErrorKind::OptFailed: return "OptFailed";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::HorizonMismatch: return "HorizonMismatch";
    case ErrorKind::BadTangent: return "BadTangent";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

} // namespace ctmc

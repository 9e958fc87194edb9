#include "dsmopt/errors.hpp"

namespace dsmopt {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SingularTriangular: return "SingularTriangular";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::EmptyBand: return "EmptyBand";
    case ErrorKind::ModelDegenerate: return "ModelDegenerate";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InfeasibleMask: return "InfeasibleMask";
    case ErrorKind::SingularChannel: return "SingularChannel";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace dsmopt

#include "sublinear/error.hpp"

namespace sublinear {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::IndexBeyondDatabase: return "IndexBeyondDatabase";
    case Errc::InfeasibleK: return "InfeasibleK";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::GammaInfeasible: return "GammaInfeasible";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::ChunkTooSmall: return "ChunkTooSmall";
    case Errc::NotCoprime: return "NotCoprime";
    case Errc::TargetUnreachable: return "TargetUnreachable";
    case Errc::BlockOverflow: return "BlockOverflow";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::NonFinite: return "NonFinite";
    case Errc::RaggedRows: return "RaggedRows";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptPayload: return "CorruptPayload";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_io_error(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic:
    case Errc::TruncatedFile:
    case Errc::VersionMismatch:
    case Errc::CorruptPayload:
    case Errc::IoError:
      return true;
    default:
      return false;
  }
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace sublinear

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sublinear {

enum class Errc {
  InvalidConfig,
  InvalidArgument,
  LabelOutOfRange,
  IndexBeyondDatabase,
  InfeasibleK,
  EmptyClass,
  GammaInfeasible,
  DimensionMismatch,
  NotNormalized,
  ChunkTooSmall,
  NotCoprime,
  TargetUnreachable,
  BlockOverflow,
  BadMagic,
  TruncatedFile,
  NonFinite,
  RaggedRows,
  VersionMismatch,
  CorruptPayload,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

// True for errors caused by files on disk rather than by the caller's
// parameters. The CLI maps these to exit code 3.
bool is_io_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sublinear

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lmk {

enum class ErrorCode {
  kIo,
  kMagicMismatch,
  kUnsupportedVersion,
  kTruncated,
  kTrailingData,
  kIdCountMismatch,
  kNonFinite,
  kDuplicateId,
  kEmptyId,
  kMissingHeader,
  kMalformedRow,
  kCountMismatch,
  kDimMismatch,
  kUnknownId,
  kMissingLabel,
  kMissingFeatures,
  kInvalidArgument,
  kInvalidConfig,
  kOutOfRange,
};

std::string_view error_code_name(ErrorCode code);

// All recoverable failures in the library surface as this type. The code is
// stable; the message names the offending byte offset, id, or field.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Worker count resolution: explicit value > 0 wins, otherwise LP_THREADS,
// otherwise hardware concurrency.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n). Work is statically partitioned into contiguous
// chunks so that each index is processed exactly once regardless of thread
// count; callers write results into per-index slots.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

// Shortest round-trip decimal representation.
std::string format_double(double v);
std::string format_float(float v);

// Ordering on label tokens: two decimal integers compare numerically, anything
// else falls back to byte-wise comparison (integers sort before non-integers).
bool label_less(std::string_view a, std::string_view b);

using WarningSink = std::function<void(std::string_view)>;
// Replaces the warning sink (default writes to stderr). Returns the old one.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace lmk

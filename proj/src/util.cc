#include "lmk/util.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace lmk {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMagicMismatch: return "magic-mismatch";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kTrailingData: return "trailing-data";
    case ErrorCode::kIdCountMismatch: return "id-count-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kEmptyId: return "empty-id";
    case ErrorCode::kMissingHeader: return "missing-header";
    case ErrorCode::kMalformedRow: return "malformed-row";
    case ErrorCode::kCountMismatch: return "count-mismatch";
    case ErrorCode::kDimMismatch: return "dim-mismatch";
    case ErrorCode::kUnknownId: return "unknown-id";
    case ErrorCode::kMissingLabel: return "missing-label";
    case ErrorCode::kMissingFeatures: return "missing-features";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kOutOfRange: return "out-of-range";
  }
  return "unknown";
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LP_THREADS")) {
    int value = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc() && ptr == s.data() + s.size() && value > 0) {
      return value;
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // First failing chunk in index order wins, independent of scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_float(float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

bool is_decimal_integer(std::string_view s) {
  if (s.empty()) return false;
  std::size_t start = (s[0] == '-') ? 1 : 0;
  if (start == s.size()) return false;
  return std::all_of(s.begin() + start, s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

// Numeric comparison of decimal integer strings of arbitrary length.
int compare_integers(std::string_view a, std::string_view b) {
  const bool neg_a = a[0] == '-';
  const bool neg_b = b[0] == '-';
  if (neg_a != neg_b) return neg_a ? -1 : 1;
  auto strip = [](std::string_view s) {
    if (s[0] == '-') s.remove_prefix(1);
    while (s.size() > 1 && s[0] == '0') s.remove_prefix(1);
    return s;
  };
  a = strip(a);
  b = strip(b);
  int mag = 0;
  if (a.size() != b.size()) {
    mag = a.size() < b.size() ? -1 : 1;
  } else {
    const int c = a.compare(b);
    mag = c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  return neg_a ? -mag : mag;
}

std::mutex g_sink_mutex;
WarningSink g_sink = [](std::string_view m) {
  std::cerr << "warning: " << m << '\n';
};

}  // namespace

bool label_less(std::string_view a, std::string_view b) {
  const bool ia = is_decimal_integer(a);
  const bool ib = is_decimal_integer(b);
  if (ia && ib) {
    const int c = compare_integers(a, b);
    if (c != 0) return c < 0;
    return a < b;  // "007" vs "7": fall back to bytes for a total order
  }
  if (ia != ib) return ia;
  return a < b;
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  std::swap(sink, g_sink);
  return sink;
}

void warn(std::string_view message) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  if (g_sink) g_sink(message);
}

}  // namespace lmk

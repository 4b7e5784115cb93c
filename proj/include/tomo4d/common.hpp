#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo4d {

/// Raised when a pipeline stage produces a non-finite value. Carries the
/// iteration index when the failure happens inside an optimization loop.
class numeric_error : public std::runtime_error {
  public:
    explicit numeric_error(const std::string& what, long iteration = -1)
        : std::runtime_error(iteration >= 0
                                 ? what + " (iteration " + std::to_string(iteration) + ")"
                                 : what),
          iteration_(iteration) {}

    long iteration() const { return iteration_; }

  private:
    long iteration_;
};

/// Raised on malformed files: sidecar/payload disagreement, bad JSON fields.
class format_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

template <typename T>
struct Vec3 {
    T x{}, y{}, z{};
};

template <typename T>
inline bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

/// FNV-1a over a byte string; used for config digests in reports/manifests.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a_hex(const std::string& s) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(s)));
    return std::string(buf);
}

inline constexpr const char* kToolVersion = "tomo4d 0.1.0";

} // namespace tomo4d

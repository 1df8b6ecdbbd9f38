#ifndef QOSLAB_TIME_HPP
#define QOSLAB_TIME_HPP

#include <cmath>
#include <cstdint>

namespace qoslab {

// All timestamps and delays are carried as integer nanoseconds; decimal
// seconds exist only at configuration and display boundaries.
using Nanos = std::int64_t;

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;

inline constexpr double to_seconds(Nanos ns) {
    return static_cast<double>(ns) * 1e-9;
}

inline Nanos to_nanos(double seconds) {
    return static_cast<Nanos>(std::llround(seconds * 1e9));
}

} // namespace qoslab

#endif

#pragma once

#include <cstdint>

namespace reflecsched {

// All times and durations are integer micro-units so that comparisons and
// tie-breaks are exact and identical on every platform.
using Time = std::int64_t;

inline constexpr Time kTicksPerUnit = 1'000'000;

constexpr Time units(std::int64_t whole_units) { return whole_units * kTicksPerUnit; }

constexpr double to_units(Time t) { return static_cast<double>(t) / static_cast<double>(kTicksPerUnit); }

struct Interval {
    Time begin = 0;
    Time end = 0;

    Time length() const { return end - begin; }
    bool overlaps(const Interval& other) const { return begin < other.end && other.begin < end; }
    bool operator==(const Interval&) const = default;
};

}  // namespace reflecsched

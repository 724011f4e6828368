#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace mmgr {

/// ISO-8601 UTC with millisecond precision, e.g. 2026-01-02T03:04:05.678Z.
std::string format_utc(std::chrono::system_clock::time_point tp);

/// Source of record timestamps. Tests substitute a deterministic counter.
using Clock = std::function<std::string()>;

Clock system_clock();

/// Strictly increasing fake clock starting at `start` (one millisecond per call).
Clock stepping_clock(std::chrono::system_clock::time_point start);

}  // namespace mmgr

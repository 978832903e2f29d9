#pragma once

#include <cstddef>
#include <functional>

namespace mqttids {

/// Runs body(i) for i in [0, count). Work is split across hardware threads
/// when more than one is available; nested calls run serially. Callers must
/// write results into per-index slots so the outcome is schedule-independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace mqttids

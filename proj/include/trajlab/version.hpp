#pragma once

namespace trajlab {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever any emitted JSON artifact changes shape.
inline constexpr int kSchemaVersion = 1;

}  // namespace trajlab

#pragma once

namespace focalridge {

inline constexpr const char* kVersion = "0.1.0";

// Identifies the random-number generator so every output manifest pins the
// exact randomness contract a run used.
inline constexpr const char* kRngDescription =
    "philox4x32-10 keyed by seed, counter = (stream, block index); "
    "uniforms from 53-bit mantissas, normals via Box-Muller";

}  // namespace focalridge

#pragma once

namespace mqaf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mqaf

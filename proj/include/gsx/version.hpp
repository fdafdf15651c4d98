#pragma once

namespace gsx {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gsx

#pragma once

namespace ecast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ecast

#pragma once

namespace idea {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace idea

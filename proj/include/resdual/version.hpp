#pragma once

namespace resdual {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace resdual

#pragma once

namespace padbench {

inline constexpr const char* version = "0.1.0";

}  // namespace padbench

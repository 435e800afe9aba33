#pragma once

namespace deptree {

inline constexpr const char* kToolName = "deptree";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace deptree

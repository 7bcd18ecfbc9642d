#pragma once

namespace drs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace drs

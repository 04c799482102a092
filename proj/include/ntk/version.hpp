#pragma once

namespace ntk {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace ntk

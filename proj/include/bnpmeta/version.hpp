#pragma once

namespace bnpmeta {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bnpmeta

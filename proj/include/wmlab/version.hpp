#pragma once

namespace wmlab {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace wmlab

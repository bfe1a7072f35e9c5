#pragma once

namespace nphinfer {
inline constexpr const char* kVersion = "0.1.0";
}

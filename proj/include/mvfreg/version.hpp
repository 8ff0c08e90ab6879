#pragma once

namespace mvfreg {
inline constexpr const char* kVersion = "0.3.0";
}

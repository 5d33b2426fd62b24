#pragma once

namespace evpix {
inline constexpr const char* version = "0.1.0";
}

#pragma once

namespace qdsq {
inline constexpr const char* version = "0.1.0";
}

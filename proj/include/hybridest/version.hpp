#pragma once

#include <string_view>

namespace hybridest {

inline constexpr std::string_view kVersion = "hybridest 1.0.0";

}  // namespace hybridest

#pragma once

#include <array>
#include <string_view>
#include <utility>

namespace propattest {

inline constexpr std::string_view kVersion = "0.1.0";

// Bumped whenever a module's artifact format or numeric behaviour changes.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 8> kModuleVersions = {{
    {"data-synth", "1.0"},
    {"model-zoo", "1.0"},
    {"attest-clf", "1.0"},
    {"adv-robust", "1.0"},
    {"mpc-core", "1.0"},
    {"mpc-proto", "1.0"},
    {"hybrid", "1.0"},
    {"cli", "1.0"},
}};

}  // namespace propattest

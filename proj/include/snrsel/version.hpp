#pragma once

#define SNRSEL_VERSION_MAJOR 1
#define SNRSEL_VERSION_MINOR 0
#define SNRSEL_VERSION_PATCH 0
#define SNRSEL_VERSION_STRING "1.0.0"

namespace snrsel {

inline constexpr const char* version() { return SNRSEL_VERSION_STRING; }

} // namespace snrsel

#pragma once

namespace fuchs {

/// Library version string, embedded in result documents for reproducibility.
inline constexpr const char* version_string = "0.1.0";

} // namespace fuchs

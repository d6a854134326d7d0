#ifndef VACSING_VERSION_HPP
#define VACSING_VERSION_HPP

namespace vacsing {
inline constexpr const char* kVersion = "0.1.0";
}

#endif

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace narex {

// All tensor math runs on 64-bit floats. Keeps finite-difference checks and
// reduction accuracy out of the noise floor at desk scale.
using real_t = double;

namespace detail {
inline void format_parts(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_parts(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    format_parts(os, rest...);
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    detail::format_parts(os, parts...);
    throw std::runtime_error(os.str());
}

}  // namespace narex

#define NAREX_CHECK(cond, ...)            \
    do {                                  \
        if (!(cond)) ::narex::fail(__VA_ARGS__); \
    } while (0)

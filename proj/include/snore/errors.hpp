#pragma once

#include <stdexcept>
#include <string>

namespace snore {

// Shape disagreement between operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Parameter outside its documented range.
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation not defined for this model kind (e.g. prox of the speckle fidelity).
struct UnsupportedError : std::logic_error {
    using std::logic_error::logic_error;
};

// File missing, unreadable or malformed.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg)
{
    if (!ok) throw ValueError(msg);
}

} // namespace snore

#pragma once

#include <stdexcept>
#include <string>

namespace nsn {

/// Tensor extents, patch geometry or layer chaining do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file on disk is not what the reader expected (bad magic, truncated, bad checksum).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nsn

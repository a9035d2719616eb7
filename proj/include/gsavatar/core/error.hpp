// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gsavatar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, stale aux data, ...).
class ContractError : public Error {
  public:
    using Error::Error;
};

/// Invalid configuration or scene setup (grid too small, template outside frustum, ...).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Numerically degenerate input (zero quaternion, singular covariance or skinning matrix).
class DegenerateError : public Error {
  public:
    using Error::Error;
};

/// File-level failure: missing file, bad magic, truncated payload.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Optimization diverged (non-finite loss).
class NumericalError : public Error {
  public:
    using Error::Error;
};

#define GSAVATAR_CHECK(cond, ExcType, msg)                                                         \
    do {                                                                                           \
        if (!(cond)) {                                                                             \
            throw ExcType(std::string(msg));                                                       \
        }                                                                                          \
    } while (0)

} // namespace gsavatar

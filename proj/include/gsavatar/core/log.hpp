// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace gsavatar {

using WarningSink = std::function<void(const std::string &)>;

namespace detail {
inline WarningSink &
warning_sink() {
    static WarningSink sink = [](const std::string &msg) { std::cerr << "warning: " << msg << "\n"; };
    return sink;
}
inline std::mutex &
warning_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

/// Replaces the warning sink (default: stderr). Returns the previous sink.
inline WarningSink
set_warning_sink(WarningSink sink) {
    std::lock_guard<std::mutex> lock(detail::warning_mutex());
    std::swap(detail::warning_sink(), sink);
    return sink;
}

inline void
warn(const std::string &msg) {
    std::lock_guard<std::mutex> lock(detail::warning_mutex());
    detail::warning_sink()(msg);
}

} // namespace gsavatar

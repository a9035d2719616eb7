// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace gsavatar::io {

inline std::string
trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Plain-text configuration: one `key = value` per line; `#` starts a comment; blank lines are
/// ignored; later assignments override earlier ones.
class KeyValueConfig {
  public:
    static KeyValueConfig
    parse(std::istream &in, const std::string &origin = "<config>") {
        KeyValueConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line.erase(hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            const auto eq = line.find('=');
            GSAVATAR_CHECK(eq != std::string::npos, ConfigError,
                           origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            GSAVATAR_CHECK(!key.empty(), ConfigError,
                           origin + ":" + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static KeyValueConfig
    load(const std::string &path) {
        std::ifstream f(path);
        GSAVATAR_CHECK(f.good(), IoError, "cannot open config " + path);
        return parse(f, path);
    }

    void
    save(const std::string &path) const {
        std::ofstream f(path);
        GSAVATAR_CHECK(f.good(), IoError, "cannot write config " + path);
        for (const auto &[k, v] : values_) {
            f << k << " = " << v << "\n";
        }
    }

    bool
    has(const std::string &key) const {
        return values_.count(key) != 0;
    }

    void
    set(const std::string &key, const std::string &value) {
        values_[key] = value;
    }

    std::string
    get_string(const std::string &key, const std::string &fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string
    require_string(const std::string &key) const {
        const auto it = values_.find(key);
        GSAVATAR_CHECK(it != values_.end(), ConfigError, "missing config key '" + key + "'");
        return it->second;
    }

    template <class T>
    T
    get(const std::string &key, T fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        return convert<T>(key, it->second);
    }

    /// Throws ConfigError naming the first key not in `known`.
    void
    check_known(const std::set<std::string> &known) const {
        for (const auto &[k, v] : values_) {
            GSAVATAR_CHECK(known.count(k) != 0, ConfigError, "unknown config key '" + k + "'");
        }
    }

    const std::map<std::string, std::string> &
    values() const {
        return values_;
    }

  private:
    template <class T>
    static T
    convert(const std::string &key, const std::string &text) {
        if constexpr (std::is_same_v<T, bool>) {
            if (text == "true" || text == "1" || text == "yes") {
                return true;
            }
            if (text == "false" || text == "0" || text == "no") {
                return false;
            }
            throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
        } else {
            std::istringstream in(text);
            T v{};
            in >> v;
            GSAVATAR_CHECK(!in.fail() && (in >> std::ws).eof(), ConfigError,
                           "config key '" + key + "': cannot parse '" + text + "'");
            return v;
        }
    }

    std::map<std::string, std::string> values_;
};

} // namespace gsavatar::io

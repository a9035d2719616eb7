// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace gsavatar::io {

/// Little-endian byte buffer writer.
class BinaryWriter {
  public:
    template <class T>
    void
    put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(bytes, bytes + sizeof(T));
        }
        buf_.insert(buf_.end(), bytes, bytes + sizeof(T));
    }

    void
    put_magic(const char (&magic)[5]) {
        buf_.insert(buf_.end(), magic, magic + 4);
    }

    template <class T, class It>
    void
    put_range(It first, It last) {
        for (; first != last; ++first) {
            put(static_cast<T>(*first));
        }
    }

    const std::vector<unsigned char> &
    bytes() const {
        return buf_;
    }

    void
    save(const std::string &path) const {
        std::ofstream f(path, std::ios::binary);
        GSAVATAR_CHECK(f.good(), IoError, "cannot open " + path + " for writing");
        f.write(reinterpret_cast<const char *>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        GSAVATAR_CHECK(f.good(), IoError, "write failed: " + path);
    }

  private:
    std::vector<unsigned char> buf_;
};

/// Little-endian reader over a whole file loaded in memory.
class BinaryReader {
  public:
    explicit BinaryReader(const std::string &path) : path_(path) {
        std::ifstream f(path, std::ios::binary);
        GSAVATAR_CHECK(f.good(), IoError, "cannot open " + path);
        buf_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }

    template <class T>
    T
    get() {
        GSAVATAR_CHECK(pos_ + sizeof(T) <= buf_.size(), IoError, "truncated file: " + path_);
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, buf_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(bytes, bytes + sizeof(T));
        }
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, bytes, sizeof(T));
        return v;
    }

    void
    expect_magic(const char (&magic)[5]) {
        GSAVATAR_CHECK(pos_ + 4 <= buf_.size() && std::memcmp(buf_.data() + pos_, magic, 4) == 0,
                       IoError, path_ + ": bad magic, expected " + std::string(magic, 4));
        pos_ += 4;
    }

    bool
    at_end() const {
        return pos_ == buf_.size();
    }

    const std::string &
    path() const {
        return path_;
    }

  private:
    std::string path_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

} // namespace gsavatar::io

// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace gsavatar::io {

inline std::string
sha256_hex(const void *data, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    GSAVATAR_CHECK(EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) == 1, Error,
                   "SHA-256 failed");
    static const char *hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string
sha256_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    GSAVATAR_CHECK(f.good(), IoError, "cannot open " + path);
    const std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes.data(), bytes.size());
}

} // namespace gsavatar::io

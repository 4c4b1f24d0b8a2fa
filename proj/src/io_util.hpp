// Copyright (c) 2026 MicroISP contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "error.hpp"

namespace microisp::io {

// Little-endian byte packing, host-endianness independent.

inline void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
    buf.push_back(static_cast<uint8_t>(v & 0xFF));
    buf.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<uint8_t>& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

inline uint32_t get_u32_at(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

/// CRC-32 (IEEE, reflected polynomial 0xEDB88320), as used by zip/png.
uint32_t crc32(const uint8_t* data, size_t len);

// Bounds-checked little-endian reader; every accessor names the field it is
// reading so truncation errors identify the offending field.
class Reader {
public:
    Reader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

    size_t remaining() const { return len_ - pos_; }

    void skip(size_t n) {
        need(n, "skip");
        pos_ += n;
    }

    uint8_t u8(const char* field) {
        need(1, field);
        return data_[pos_++];
    }

    uint16_t u16(const char* field) {
        need(2, field);
        uint16_t v = static_cast<uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    uint32_t u32(const char* field) {
        need(4, field);
        uint32_t v = get_u32_at(data_ + pos_);
        pos_ += 4;
        return v;
    }

    float f32(const char* field) {
        uint32_t bits = u32(field);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string str(size_t n, const char* field) {
        need(n, field);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

private:
    void need(size_t n, const char* field) const {
        if (pos_ + n > len_) throw FormatError(std::string("truncated while reading ") + field);
    }

    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::string& path);

// Writes to a temporary file in the same directory and renames it over the
// destination, so a failed job never leaves a partial output file behind.
void atomic_write_file(const std::string& path, const std::vector<uint8_t>& bytes);
void atomic_write_file(const std::string& path, const std::string& text);

} // namespace microisp::io

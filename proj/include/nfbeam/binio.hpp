// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary stream helpers shared by the dataset container and
// checkpoint formats. The build targets little-endian hosts only.

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfbeam {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written natively and require a little-endian host");

struct TruncatedFileError : std::runtime_error {
    explicit TruncatedFileError(const std::string& what) : std::runtime_error(what) {}
};

template <class T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw TruncatedFileError(std::string("truncated while reading ") + what);
    return v;
}

template <class T>
void write_array(std::ostream& out, const std::vector<T>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
void read_array(std::istream& in, std::vector<T>& v, std::size_t count, const char* what) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (!in) throw TruncatedFileError(std::string("truncated while reading ") + what);
}

inline void write_magic(std::ostream& out, const char magic[4]) { out.write(magic, 4); }

inline void check_magic(std::istream& in, const char magic[4], const char* format_name) {
    char buf[4] = {};
    in.read(buf, 4);
    if (!in) throw TruncatedFileError(std::string("truncated magic for ") + format_name);
    if (buf[0] != magic[0] || buf[1] != magic[1] || buf[2] != magic[2] || buf[3] != magic[3]) {
        throw std::runtime_error(std::string("bad magic for ") + format_name);
    }
}

}  // namespace nfbeam

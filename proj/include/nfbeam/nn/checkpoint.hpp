// SPDX-License-Identifier: Apache-2.0
//
// Parameter checkpoint: magic "NFCK", u32 version, u64 parameter count,
// then per parameter: u32 name length, name bytes, u32 rank, u64 dims[rank],
// float32 data. Little-endian throughout; see docs/formats.md.

#pragma once

#include <fstream>

#include "nfbeam/binio.hpp"
#include "nfbeam/nn/modules.hpp"

namespace nfbeam::nn {

inline constexpr char kCheckpointMagic[4] = {'N', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void save_checkpoint(const ParamRegistry<T>& registry, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    write_magic(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint64_t>(registry.all().size()));
    for (const auto& p : registry.all()) {
        write_pod(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod(out, static_cast<std::uint32_t>(2));  // rank
        write_pod(out, static_cast<std::uint64_t>(p.value.rows()));
        write_pod(out, static_cast<std::uint64_t>(p.value.cols()));
        std::vector<float> data(p.value.numel());
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] = static_cast<float>(p.value.values()[i]);
        }
        write_array(out, data);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

// Loads values into an already-constructed registry; every parameter must be
// present with a matching shape.
template <class T>
void load_checkpoint(ParamRegistry<T>& registry, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    check_magic(in, kCheckpointMagic, "checkpoint");
    const auto version = read_pod<std::uint32_t>(in, "checkpoint version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto count = read_pod<std::uint64_t>(in, "checkpoint parameter count");
    if (count != registry.all().size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in, "parameter name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw TruncatedFileError("truncated parameter name");
        const auto rank = read_pod<std::uint32_t>(in, "parameter rank");
        if (rank != 2) throw std::runtime_error("checkpoint: unexpected rank");
        const auto rows = read_pod<std::uint64_t>(in, "parameter rows");
        const auto cols = read_pod<std::uint64_t>(in, "parameter cols");
        std::vector<float> data;
        read_array(in, data, static_cast<std::size_t>(rows * cols), "parameter data");

        auto tensor = registry.find(name);
        if (static_cast<std::uint64_t>(tensor.rows()) != rows ||
            static_cast<std::uint64_t>(tensor.cols()) != cols) {
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        }
        for (std::size_t j = 0; j < data.size(); ++j) {
            tensor.values()[j] = static_cast<T>(data[j]);
        }
    }
}

}  // namespace nfbeam::nn

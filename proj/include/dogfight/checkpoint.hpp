// Versioned binary checkpoint container: magic string, format version,
// config digest, global timestep, then length-prefixed named arrays of
// little-endian 64-bit reals. Loading validates structure and refuses
// version/digest mismatches unless forced; corrupt files report the byte
// offset where parsing failed.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dogfight/common.hpp"

namespace dogfight {

inline constexpr char kCheckpointMagic[8] = {'D', 'F', 'A', 'R', 'E', 'N', 'A', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::uint64_t config_digest = 0;
    std::uint64_t timestep = 0;
    // insertion order is preserved so save->load->save is byte-identical
    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    void put(const std::string& name, std::vector<double> values) {
        for (auto& [n, v] : arrays)
            if (n == name) { v = std::move(values); return; }
        arrays.emplace_back(name, std::move(values));
    }

    const std::vector<double>* find(const std::string& name) const {
        for (const auto& [n, v] : arrays)
            if (n == name) return &v;
        return nullptr;
    }

    const std::vector<double>& get(const std::string& name) const {
        const auto* v = find(name);
        if (!v) throw IntegrityError("checkpoint: missing array '" + name + "'");
        return *v;
    }
};

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    const auto offset = in.tellg();
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw IntegrityError("checkpoint: truncated read at offset " +
                             std::to_string(static_cast<long long>(offset)) + " in " + path);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("checkpoint: cannot open " + path + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_pod(out, ckpt.version);
    detail::write_pod(out, ckpt.config_digest);
    detail::write_pod(out, ckpt.timestep);
    detail::write_pod(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, values] : ckpt.arrays) {
        detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod(out, static_cast<std::uint64_t>(values.size()));
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) throw IntegrityError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path,
                                  std::uint64_t expected_digest = 0,
                                  bool force = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw IntegrityError("checkpoint: bad magic at offset 0 in " + path);
    Checkpoint ckpt;
    ckpt.version = detail::read_pod<std::uint32_t>(in, path);
    if (ckpt.version != kCheckpointVersion && !force)
        throw IntegrityError("checkpoint: format version " + std::to_string(ckpt.version) +
                             " != " + std::to_string(kCheckpointVersion) + " in " + path);
    ckpt.config_digest = detail::read_pod<std::uint64_t>(in, path);
    if (expected_digest != 0 && ckpt.config_digest != expected_digest && !force)
        throw IntegrityError("checkpoint: config digest mismatch in " + path +
                             " (pass force to load anyway)");
    ckpt.timestep = detail::read_pod<std::uint64_t>(in, path);
    const auto count = detail::read_pod<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = detail::read_pod<std::uint32_t>(in, path);
        if (name_len > 4096)
            throw IntegrityError("checkpoint: implausible name length at offset " +
                                 std::to_string(static_cast<long long>(in.tellg()) - 4) +
                                 " in " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IntegrityError("checkpoint: truncated name in " + path);
        const auto len = detail::read_pod<std::uint64_t>(in, path);
        std::vector<double> values(len);
        const auto offset = in.tellg();
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(len * sizeof(double)));
        if (!in)
            throw IntegrityError("checkpoint: truncated array '" + name + "' at offset " +
                                 std::to_string(static_cast<long long>(offset)) + " in " + path);
        ckpt.arrays.emplace_back(std::move(name), std::move(values));
    }
    return ckpt;
}

}  // namespace dogfight

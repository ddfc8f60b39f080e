// Flat key-value run configuration: one `section.key=value` per line,
// '#' comments, CLI overrides layered on top. Unknown keys are rejected so
// typos fail fast instead of silently using defaults.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dogfight/common.hpp"

namespace dogfight {

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        KeyValueConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            cfg.parse_line(line, path + ":" + std::to_string(lineno));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& dflt) const {
        note(key);
        auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }

    double get_double(const std::string& key, double dflt) const {
        note(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size())
                throw ConfigError("config: trailing junk in value of " + key);
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("config: expected number for " + key + ", got '" +
                              it->second + "'");
        }
    }

    long get_long(const std::string& key, long dflt) const {
        const double v = get_double(key, static_cast<double>(dflt));
        const long l = static_cast<long>(v);
        if (static_cast<double>(l) != v)
            throw ConfigError("config: expected integer for " + key);
        return l;
    }

    int get_int(const std::string& key, int dflt) const {
        return static_cast<int>(get_long(key, dflt));
    }

    bool get_bool(const std::string& key, bool dflt) const {
        note(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "on") return true;
        if (v == "false" || v == "0" || v == "off") return false;
        throw ConfigError("config: expected boolean for " + key + ", got '" + v + "'");
    }

    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            std::vector<std::uint64_t> dflt) const {
        note(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        std::vector<std::uint64_t> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            out.push_back(std::stoull(tok));
        }
        if (out.empty()) throw ConfigError("config: empty list for " + key);
        return out;
    }

    /// Every stored key must have been consumed by a get_* call.
    void reject_unknown_keys() const {
        for (const auto& [k, v] : values_)
            if (!consumed_.count(k))
                throw ConfigError("config: unknown key '" + k + "'");
    }

    /// Canonical serialization (sorted key=value lines) used for digests.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }

private:
    void parse_line(std::string line, const std::string& where) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) return;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at " + where);
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at " + where);
        values_[key] = value;
    }

    void note(const std::string& key) const { consumed_.insert(key); }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
};

/// FNV-1a over the canonical config text; stored in checkpoints so a resumed
/// run can refuse mismatched configurations.
inline std::uint64_t config_digest(const std::string& canonical_text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical_text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace dogfight

// Training diagnostics as a comma-separated table: fixed schema per run,
// one row per logging event, 17 significant digits so every double
// round-trips losslessly.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dogfight/common.hpp"

namespace dogfight {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Append-only CSV writer with a schema frozen at construction.
class MetricsWriter {
public:
    MetricsWriter(const std::string& path, std::vector<std::string> keys)
        : keys_(std::move(keys)), out_(path, std::ios::trunc) {
        if (!out_) throw IntegrityError("metrics: cannot open " + path);
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (i) out_ << ',';
            out_ << keys_[i];
        }
        out_ << '\n';
        out_.flush();
    }

    const std::vector<std::string>& keys() const { return keys_; }

    void write_row(const std::map<std::string, double>& row) {
        for (const auto& [k, v] : row)
            if (std::find(keys_.begin(), keys_.end(), k) == keys_.end())
                throw IntegrityError("metrics: key '" + k + "' not in schema");
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (i) out_ << ',';
            auto it = row.find(keys_[i]);
            const double v = it == row.end()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : it->second;
            out_ << format_g17(v);
        }
        out_ << '\n';
        out_.flush();
    }

private:
    std::vector<std::string> keys_;
    std::ofstream out_;
};

struct MetricsTable {
    std::vector<std::string> keys;
    std::vector<std::vector<double>> rows;

    int column(const std::string& key) const {
        for (std::size_t i = 0; i < keys.size(); ++i)
            if (keys[i] == key) return static_cast<int>(i);
        return -1;
    }
};

inline MetricsTable read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("metrics: cannot open " + path);
    MetricsTable t;
    std::string line;
    if (!std::getline(in, line)) throw IntegrityError("metrics: empty file " + path);
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) t.keys.push_back(tok);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) row.push_back(std::strtod(tok.c_str(), nullptr));
        if (row.size() != t.keys.size())
            throw IntegrityError("metrics: ragged row in " + path);
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace dogfight

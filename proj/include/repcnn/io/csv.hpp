#pragma once

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace repcnn {

// Locale-free shortest round-trip float formatting ("." decimal always).
inline std::string csv_num(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("csv: number formatting failed");
    return std::string(buf, p);
}

inline std::string csv_num(long v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

/// Comma-delimited, LF line endings, header row first. Byte-deterministic
/// for identical inputs.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : f_(path, std::ios::binary) {
        if (!f_) throw std::runtime_error("csv: cannot write " + path);
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) f_ << ',';
            f_ << cells[i];
        }
        f_ << '\n';
    }

    void close() { f_.close(); }

private:
    std::ofstream f_;
};

}  // namespace repcnn

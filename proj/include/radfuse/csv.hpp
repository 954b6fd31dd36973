#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "radfuse/core.hpp"

namespace radfuse::csv {

// Plain comma-separated fields; no quoting (identifiers never contain commas).
inline std::vector<std::string> split(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error("cannot parse " + what + " '" + s + "' as a number");
    return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error("cannot parse " + what + " '" + s + "' as an integer");
    return v;
}

// Shortest decimal that round-trips exactly.
inline std::string format(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string s;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) s += ',';
        s += fields[i];
    }
    return s;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;  // 1-based file line of each row
};

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw Error(path + ": empty file");
    t.header = split(line);
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (fields.size() != t.header.size())
            throw Error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    return t;
}

inline void require_header(const Table& t, const std::vector<std::string>& expected, const std::string& path) {
    if (t.header != expected) throw Error(path + ": header must be '" + join(expected) + "'");
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
    if (!out) throw Error("failed writing " + path);
}

// One line per entry, LF terminated.
inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::string content;
    for (const auto& l : lines) {
        content += l;
        content += '\n';
    }
    write_file(path, content);
}

}  // namespace radfuse::csv

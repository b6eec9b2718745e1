#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srl::csv {

// Split one line on commas. No quoting: all our schemas are plain fields.
inline void split(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline bool parse_double(std::string_view s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_ll(std::string_view s, long long& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

// Line-by-line reader over a whole-file buffer; strips trailing CR.
class Reader {
public:
    explicit Reader(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path);
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    bool next_line(std::string_view& line) {
        if (pos_ >= buf_.size()) return false;
        size_t end = buf_.find('\n', pos_);
        if (end == std::string::npos) end = buf_.size();
        line = std::string_view(buf_).substr(pos_, end - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = end + 1;
        return true;
    }

private:
    std::string buf_;
    size_t pos_ = 0;
};

// Writer with a fixed numeric format so reruns are byte-identical.
class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path);
    }

    void raw_line(std::string_view line) {
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        out_.put('\n');
    }

    Writer& field(std::string_view s) {
        if (!first_) out_.put(',');
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
        first_ = false;
        return *this;
    }

    Writer& field(double v) {
        char tmp[40];
        int n = std::snprintf(tmp, sizeof tmp, "%.12g", v);
        return field(std::string_view(tmp, static_cast<size_t>(n)));
    }

    Writer& field(long long v) {
        char tmp[24];
        int n = std::snprintf(tmp, sizeof tmp, "%lld", v);
        return field(std::string_view(tmp, static_cast<size_t>(n)));
    }

    Writer& field(int v) { return field(static_cast<long long>(v)); }
    Writer& field(size_t v) { return field(static_cast<long long>(v)); }

    void end_row() {
        out_.put('\n');
        first_ = true;
    }

private:
    std::ofstream out_;
    bool first_ = true;
};

} // namespace srl::csv

#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace srl::config {

// Minimal INI: `key = value` lines, optional [section] headers (flattened to
// "section.key"), '#' or ';' comments, whitespace trimmed.
class Ini {
public:
    static Ini parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config: " + path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        return parse(text, path);
    }

    static Ini parse(const std::string& text, const std::string& origin = "<string>") {
        Ini ini;
        std::string section;
        size_t pos = 0, line_no = 0;
        while (pos <= text.size()) {
            size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            std::string line = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;
            if (size_t h = line.find_first_of("#;"); h != std::string::npos)
                line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                             ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                         ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                         ": empty key");
            if (!section.empty()) key = section + "." + key;
            ini.values_[key] = value;
        }
        return ini;
    }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& dflt) const {
        auto v = get(key);
        return v ? *v : dflt;
    }

    double get_double(const std::string& key, double dflt) const {
        auto v = get(key);
        if (!v) return dflt;
        try {
            return std::stod(*v);
        } catch (const std::exception&) {
            throw std::runtime_error("config key '" + key + "': not a number: " + *v);
        }
    }

    long long get_int(const std::string& key, long long dflt) const {
        auto v = get(key);
        if (!v) return dflt;
        long long out = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc{} || p != v->data() + v->size())
            throw std::runtime_error("config key '" + key + "': not an integer: " + *v);
        return out;
    }

    bool get_bool(const std::string& key, bool dflt) const {
        auto v = get(key);
        if (!v) return dflt;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw std::runtime_error("config key '" + key + "': not a boolean: " + *v);
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

} // namespace srl::config

#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mse {

// Structured text configuration: nested tables via [a.b] section headers and
// dotted keys, values are numbers, booleans, quoted strings, or flat arrays.
// Keys are stored flattened as "a.b.key".

struct Config {
    using Value = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;
    std::map<std::string, Value> kv;

    bool has(const std::string& key) const { return kv.count(key) > 0; }

    double num(const std::string& key) const {
        return std::get<double>(require(key));
    }
    double num_or(const std::string& key, double dflt) const {
        return has(key) ? num(key) : dflt;
    }
    long integer(const std::string& key) const { return static_cast<long>(num(key)); }
    long integer_or(const std::string& key, long dflt) const {
        return has(key) ? integer(key) : dflt;
    }
    bool boolean_or(const std::string& key, bool dflt) const {
        return has(key) ? std::get<bool>(require(key)) : dflt;
    }
    std::string str(const std::string& key) const {
        return std::get<std::string>(require(key));
    }
    std::string str_or(const std::string& key, const std::string& dflt) const {
        return has(key) ? str(key) : dflt;
    }
    std::vector<double> nums(const std::string& key) const {
        const Value& v = require(key);
        if (auto* a = std::get_if<std::vector<double>>(&v)) return *a;
        return {std::get<double>(v)};
    }
    std::vector<std::string> strings(const std::string& key) const {
        const Value& v = require(key);
        if (auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
        return {std::get<std::string>(v)};
    }

    /// Keys under a table prefix, with the prefix stripped.
    std::vector<std::string> keys_under(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : kv)
            if (k.rfind(prefix + ".", 0) == 0) out.push_back(k.substr(prefix.size() + 1));
        return out;
    }

    const Value& require(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("config: missing key '" + key + "'");
        return it->second;
    }
};

namespace detail {

inline std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline Config::Value parse_value(const std::string& raw, int lineno) {
    std::string v = strip(raw);
    if (v.empty()) throw std::runtime_error("config: empty value at line " + std::to_string(lineno));
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw std::runtime_error("config: unterminated string at line " + std::to_string(lineno));
        return v.substr(1, v.size() - 2);
    }
    if (v.front() == '[') {
        if (v.back() != ']') throw std::runtime_error("config: unterminated array at line " + std::to_string(lineno));
        std::string body = v.substr(1, v.size() - 2);
        std::vector<std::string> items;
        std::string cur;
        for (char c : body) {
            if (c == ',') {
                items.push_back(strip(cur));
                cur.clear();
            } else
                cur += c;
        }
        if (!strip(cur).empty()) items.push_back(strip(cur));
        if (!items.empty() && !items[0].empty() && items[0].front() == '"') {
            std::vector<std::string> out;
            for (auto& it : items) out.push_back(std::get<std::string>(parse_value(it, lineno)));
            return out;
        }
        std::vector<double> out;
        for (auto& it : items) out.push_back(std::stod(it));
        return out;
    }
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (...) {
    }
    // bare word: keep as string (scenario names etc.)
    return v;
}

}  // namespace detail

inline Config parse_config(std::istream& is) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            // keep '#' inside quotes
            bool inq = false;
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (line[i] == '"') inq = !inq;
                if (line[i] == '#' && !inq) {
                    line = line.substr(0, i);
                    break;
                }
            }
        }
        std::string s = detail::strip(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw std::runtime_error("config: bad section at line " + std::to_string(lineno));
            section = detail::strip(s.substr(1, s.size() - 2));
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: expected key=value at line " + std::to_string(lineno));
        std::string key = detail::strip(s.substr(0, eq));
        if (key.empty()) throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
        std::string full = section.empty() ? key : section + "." + key;
        cfg.kv[full] = detail::parse_value(s.substr(eq + 1), lineno);
    }
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    return parse_config(is);
}

inline Config parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

}  // namespace mse

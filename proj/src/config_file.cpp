#include "dutrpca/config_file.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dutrpca/errors.hpp"

namespace dutrpca {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw InvalidArgument("config key '" + key + "': bad number '" + text + "'");
    }
    return value;
}

} // namespace

KeyValues read_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
        }
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw FormatError("cannot open config '" + path + "'");
    }
    return read_key_values(is);
}

void write_key_values(std::ostream& os, const KeyValues& kv) {
    for (const auto& [k, v] : kv) {
        os << k << " = " << v << '\n';
    }
}

bool KeyReader::take(const std::string& key, std::string& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) {
        return false;
    }
    out = it->second;
    kv_.erase(it);
    return true;
}

void KeyReader::take_int(const std::string& key, int& out) {
    std::string s;
    if (take(key, s)) {
        out = parse_number<int>(key, s);
    }
}

void KeyReader::take_long(const std::string& key, long& out) {
    std::string s;
    if (take(key, s)) {
        out = parse_number<long>(key, s);
    }
}

void KeyReader::take_u64(const std::string& key, std::uint64_t& out) {
    std::string s;
    if (take(key, s)) {
        out = parse_number<std::uint64_t>(key, s);
    }
}

void KeyReader::take_double(const std::string& key, double& out) {
    std::string s;
    if (take(key, s)) {
        out = parse_number<double>(key, s);
    }
}

void KeyReader::take_bool(const std::string& key, bool& out) {
    std::string s;
    if (!take(key, s)) {
        return;
    }
    if (s == "1" || s == "true" || s == "yes" || s == "on") {
        out = true;
    } else if (s == "0" || s == "false" || s == "no" || s == "off") {
        out = false;
    } else {
        throw InvalidArgument("config key '" + key + "': expected a boolean, got '" + s + "'");
    }
}

void KeyReader::take_longs(const std::string& key, std::vector<long>& out) {
    std::string s;
    if (!take(key, s)) {
        return;
    }
    out.clear();
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(parse_number<long>(key, item));
        }
    }
}

void KeyReader::finish() const {
    if (!kv_.empty()) {
        throw InvalidArgument("unknown config key '" + kv_.begin()->first + "'");
    }
}

} // namespace dutrpca

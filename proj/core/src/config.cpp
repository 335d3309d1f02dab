// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        std::size_t eq = line.find('=', start);
        if (eq == std::string::npos)
            throw InputError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(start, eq - start);
        std::size_t key_end = key.find_last_not_of(" \t");
        key = key.substr(0, key_end + 1);
        std::string value = line.substr(eq + 1);
        std::size_t vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        if (key.empty()) throw InputError("config line " + std::to_string(lineno) + ": empty key");
        kv.entries_[key] = value;
    }
    return kv;
}

const std::string& KeyValueFile::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw InputError("missing config key: " + key);
    return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
    const std::string& s = get(key);
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError("config key " + key + ": not a number: " + s);
    }
}

double KeyValueFile::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long KeyValueFile::get_int(const std::string& key) const {
    const std::string& s = get(key);
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError("config key " + key + ": not an integer: " + s);
    }
}

long KeyValueFile::get_int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

Vec3 KeyValueFile::get_vec3(const std::string& key) const {
    const std::string& s = get(key);
    std::istringstream in(s);
    Vec3 v;
    if (!(in >> v.x >> v.y >> v.z))
        throw InputError("config key " + key + ": expected three numbers: " + s);
    return v;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}
void KeyValueFile::set_double(const std::string& key, double value) {
    entries_[key] = format_double(value);
}
void KeyValueFile::set_int(const std::string& key, long value) {
    entries_[key] = std::to_string(value);
}
void KeyValueFile::set_vec3(const std::string& key, const Vec3& v) {
    entries_[key] = format_double(v.x) + " " + format_double(v.y) + " " + format_double(v.z);
}

void KeyValueFile::reject_unknown_keys(const std::vector<std::string>& allowed) const {
    std::string offenders;
    for (const auto& [key, value] : entries_) {
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) offenders += (offenders.empty() ? "" : ", ") + key;
    }
    if (!offenders.empty()) throw InputError("unknown config keys: " + offenders);
}

void KeyValueFile::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write config file: " + path);
    for (const auto& [key, value] : entries_) out << key << "=" << value << "\n";
}

}  // namespace sdfrecon

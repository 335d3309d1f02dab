// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "sdfrecon/math.hpp"

namespace sdfrecon {

// Plain-text key=value file. Lines starting with '#' and blank lines are
// ignored. Keys are unique; later duplicates overwrite.
class KeyValueFile {
public:
    KeyValueFile() = default;

    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text);

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long fallback) const;
    Vec3 get_vec3(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long value);
    void set_vec3(const std::string& key, const Vec3& v);

    const std::map<std::string, std::string>& entries() const { return entries_; }

    // All keys must appear in `allowed`; throws InputError naming offenders.
    void reject_unknown_keys(const std::vector<std::string>& allowed) const;

    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> entries_;
};

// Canonical float formatting used for manifests and logs (round-trips
// doubles exactly; byte-stable across runs).
std::string format_double(double v);

}  // namespace sdfrecon

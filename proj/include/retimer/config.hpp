#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "retimer/errors.hpp"

namespace retimer {

// Flat key=value experiment configuration with dotted namespaces. Keys are
// checked against the known schema on every set, so a typo fails fast
// instead of silently using a default.
class Config {
public:
    static const std::vector<std::string>& known_keys();

    static Config load_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    uint64_t get_seed() const;
    std::vector<int> get_int_list(const std::string& key) const; // comma separated

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace retimer

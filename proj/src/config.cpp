#include "retimer/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace retimer {

const std::vector<std::string>& Config::known_keys() {
    static const std::vector<std::string> keys = {
        "seed",
        "threads",
        "out_dir",
        "data.dir",
        "data.classes",
        "data.train_per_class",
        "data.test_per_class",
        "data.t",
        "data.c",
        "data.h",
        "data.w",
        "data.spikes_per_line",
        "data.kind",
        "model.path",
        "model.hidden",
        "model.tau",
        "model.v_th",
        "model.surrogate_width",
        "train.epochs",
        "train.lr",
        "budget.norm",
        "budget.eps",
        "budget.eps_inf",
        "budget.eps_l1",
        "budget.eps_l0",
        "attack.kappa",
        "attack.alpha",
        "attack.phi_max",
        "attack.iters",
        "attack.lambda_cap",
        "attack.lambda_budget",
        "attack.targeted",
        "attack.ablation",
        "attack.baseline",
        "attack.input",
        "attack.label",
        "attack.out",
        "attack.dump_pi",
        "at.variant",
        "at.beta",
        "at.inner_iters",
        "at.epochs",
        "at.lr",
        "at.out",
        "defense.kind",
        "defense.p",
        "defense.rp_bins",
        "sweep.radii",
        "sweep.run_prefix",
        "project.grid",
        "project.pi",
        "project.out",
        "report.input",
        "report.output",
        "report.measure_wall",
    };
    return keys;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

Config Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open config file " + path);
    Config cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": expected key=value");
        try {
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const Error& e) {
            raise(Errc::invalid_argument,
                  path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        raise(Errc::invalid_argument, "unknown config key '" + key + "'");
    kv_[key] = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end() || it->second.empty())
        raise(Errc::invalid_argument, "config key '" + key + "' is required");
    return it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        raise(Errc::invalid_argument, "config key '" + key + "' is not an integer: '" +
                                          it->second + "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        raise(Errc::invalid_argument,
              "config key '" + key + "' is not a number: '" + it->second + "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    raise(Errc::invalid_argument,
          "config key '" + key + "' is not a boolean: '" + it->second + "'");
}

uint64_t Config::get_seed() const {
    auto it = kv_.find("seed");
    if (it == kv_.end()) return 1;
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        raise(Errc::invalid_argument, "config key 'seed' is not an integer: '" + it->second + "'");
    }
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return {};
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            raise(Errc::invalid_argument, "config key '" + key + "' has an empty list entry");
        try {
            size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            raise(Errc::invalid_argument,
                  "config key '" + key + "' has a non-integer entry: '" + item + "'");
        }
    }
    return out;
}

} // namespace retimer

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "retimer/errors.hpp"

namespace rt_test {

template <typename F>
std::optional<retimer::Errc> thrown_code(F&& f) {
    try {
        f();
    } catch (const retimer::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// Fresh scratch directory per test binary invocation.
inline std::string scratch_dir(const std::string& name) {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / ("rt_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

} // namespace rt_test

#pragma once

#include <stdexcept>
#include <string>

namespace retimer {

enum class Errc {
    invalid_argument,
    invalid_spec,
    invalid_budget,
    parse,
    io,
    shape_mismatch,
    capacity_violation,
    timeline_violation,
    wrong_support,
    trace_mismatch,
    empty_active_set,
    too_large,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace retimer

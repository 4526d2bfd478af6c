#pragma once

#include <stdexcept>
#include <string>

namespace sucmpc {

// Config/scene parsing or validation problems; maps to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite state or other runtime simulation failure.
struct SimError : std::runtime_error {
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// Tape misuse or memory budget exceeded.
struct TapeError : std::runtime_error {
    explicit TapeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sucmpc

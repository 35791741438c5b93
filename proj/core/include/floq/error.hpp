#pragma once

#include <stdexcept>
#include <string>

namespace floq {

// Single exception type for all contract and I/O failures. Messages are
// prefixed with a category ("parse error", "config error", ...) so the CLI
// can surface them as one-line diagnostics.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) {
    throw Error(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw Error(msg);
    }
}

}  // namespace floq

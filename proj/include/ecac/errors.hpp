#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecac {

/// Input data violates a documented invariant (bad label, dangling id, ...).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input that could not be parsed at all. Carries the byte offset
/// where the underlying parser gave up.
struct ParseError : std::runtime_error {
    std::size_t byte_offset;
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg), byte_offset(offset) {}
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller broke a precondition; programming error, not bad data.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Completion backend failure after retries were exhausted.
struct BackendError : std::runtime_error {
    int status = 0;
    int attempts = 0;
    BackendError(const std::string& msg, int status_code = 0, int tries = 0)
        : std::runtime_error(msg), status(status_code), attempts(tries) {}
};

/// Backend failure observed while executing a reasoning chain; remembers
/// which step was in flight so the entry can be retried from there.
struct ChainError : BackendError {
    std::size_t step_index;
    std::string step_name;
    ChainError(const std::string& msg, std::size_t step, std::string name)
        : BackendError(msg), step_index(step), step_name(std::move(name)) {}
};

} // namespace ecac

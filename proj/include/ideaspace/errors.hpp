#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ideaspace {

// Caller broke a documented precondition (dimension mismatch, wrong role,
// embedder mismatch).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Input outside the mathematical domain of an operation (zero vector,
// fewer than two items, infeasible split, empty store).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operation not valid in the object's current state (e.g. expanding a node twice).
class StateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DepthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, std::size_t attempts, bool timed_out = false)
        : std::runtime_error(what), attempts_(attempts), timed_out_(timed_out) {}

    std::size_t attempts() const noexcept { return attempts_; }
    bool timed_out() const noexcept { return timed_out_; }

private:
    std::size_t attempts_;
    bool timed_out_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ideaspace

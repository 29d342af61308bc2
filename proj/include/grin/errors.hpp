#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grin {

// Violated precondition (bad sizes, out-of-range queries, malformed input).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure inside an algorithm that should not happen for valid input.
class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoBoundStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PropagationError : public std::runtime_error {
public:
    PropagationError(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

// Inverse-design refinement diverged.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StageError : public std::runtime_error {
public:
    StageError(std::size_t stage, const std::string& what)
        : std::runtime_error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
    std::size_t stage() const { return stage_; }

private:
    std::size_t stage_;
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace grin

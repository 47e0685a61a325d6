#pragma once

#include <stdexcept>
#include <string>

namespace scenecad {

/// Invalid argument or violated precondition (usage error).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data is malformed or inconsistent (parse/validation error).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine cannot proceed (degenerate geometry, rank loss).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg, int rank = -1)
        : std::runtime_error(msg), rank_(rank) {}

    /// Rank of the offending matrix, or -1 when not applicable.
    int rank() const noexcept { return rank_; }

private:
    int rank_;
};

}  // namespace scenecad

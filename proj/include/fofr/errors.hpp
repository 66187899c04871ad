#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fofr {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two functions or samples live on grids of different sizes.
class GridMismatch : public Error {
public:
    GridMismatch(std::size_t expected, std::size_t got)
        : Error("grid mismatch: expected p = " + std::to_string(expected) +
                ", got p = " + std::to_string(got)),
          expected_(expected), got_(got) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t got() const noexcept { return got_; }

private:
    std::size_t expected_;
    std::size_t got_;
};

class EmptySample : public Error {
public:
    EmptySample() : Error("empty sample") {}
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The empirical covariance has numerical rank zero.
class DegenerateSample : public Error {
public:
    DegenerateSample() : Error("degenerate sample: empirical covariance has rank 0") {}
    using Error::Error;
};

/// The Gram matrix of the projection basis is numerically singular.
class SingularDesign : public Error {
public:
    explicit SingularDesign(double condition)
        : Error("singular design: condition number " + std::to_string(condition) +
                " exceeds 1e12 (m1 too large for the data)"),
          condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Malformed input file. `row()` is the 1-based data row (header excluded), 0 if not row specific.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row = 0) : Error(what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

} // namespace fofr

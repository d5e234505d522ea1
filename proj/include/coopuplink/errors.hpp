#pragma once

#include <stdexcept>
#include <string>

namespace coopuplink {

/// A series or quadrature failed to reach its tolerance. Carries the best
/// value obtained before giving up.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(const std::string& what, double partial)
        : std::runtime_error(what), partial_(partial) {}

    double partial_value() const noexcept { return partial_; }

private:
    double partial_;
};

/// An argument violates an operation's precondition.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The requested quantity is outside the regime where its derivation holds.
class UnsupportedRegime : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The device-count bound has no finite real solution.
class NoFiniteBound : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace coopuplink

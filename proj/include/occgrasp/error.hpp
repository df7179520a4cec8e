#pragma once

#include <stdexcept>
#include <string>

namespace occgrasp {

/// Caller supplied an argument that violates an operation's precondition.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Scene placement could not be completed within its attempt budget.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A measurement was requested on data that cannot support it.
class MeasurementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gradient checking was asked to differentiate at a non-smooth point.
class KinkError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace occgrasp

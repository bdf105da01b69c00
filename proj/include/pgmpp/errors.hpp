#pragma once

#include <stdexcept>
#include <string>

namespace pgmpp {

/// Malformed or truncated binary input (key files, index blobs, reports).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation called on an object that is not ready for it.
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The storage budget cannot be met by any admissible leaf error bound.
class BudgetTooSmall : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A latency probe could not be measured reliably on this host.
class CalibrationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pgmpp

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace trialqc {

/// Base of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record or field violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Foreign keys that do not resolve. `offenders` lists the referring record ids.
class IntegrityError : public Error {
public:
    IntegrityError(const std::string& what, std::vector<std::string> offenders)
        : Error(what), offenders_(std::move(offenders)) {}

    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    std::vector<std::string> offenders_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// An operation is not permitted in the subject's current state.
class ConflictError : public Error {
public:
    using Error::Error;
};

} // namespace trialqc

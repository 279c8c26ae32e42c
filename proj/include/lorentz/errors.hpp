#pragma once

#include <stdexcept>
#include <string>

namespace lorentz {

/// Base class for every error raised by the library.
class LorentzError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// geometry
class NonPositiveMargin : public LorentzError {
public:
    using LorentzError::LorentzError;
};
class InfiniteHorizonSuspected : public LorentzError {
public:
    using LorentzError::LorentzError;
};

// flow kernel / maps
class HorizonViolation : public LorentzError {
public:
    using LorentzError::LorentzError;
};
class NotOnBoundary : public LorentzError {
public:
    using LorentzError::LorentzError;
};

// recurrence
class BallTouchesBoundary : public LorentzError {
public:
    using LorentzError::LorentzError;
};

// statistics
class NotPositiveDefinite : public LorentzError {
public:
    using LorentzError::LorentzError;
};
class InsufficientHits : public LorentzError {
public:
    using LorentzError::LorentzError;
};
class InsufficientUncensored : public LorentzError {
public:
    using LorentzError::LorentzError;
};
/// An operation was called outside its documented domain.
class PreconditionViolation : public LorentzError {
public:
    using LorentzError::LorentzError;
};

// configuration / CLI
class SchemaError : public LorentzError {
public:
    using LorentzError::LorentzError;
};
class MissingFixture : public LorentzError {
public:
    using LorentzError::LorentzError;
};

}  // namespace lorentz

#pragma once

#include <stdexcept>
#include <string>

namespace labelfuse {

// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IndexOutOfBounds : public Error {
public:
    using Error::Error;
};

class ValueOutOfRange : public Error {
public:
    using Error::Error;
};

class DuplicateEntry : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class EmptyAnnotations : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class NoEvaluableClass : public Error {
public:
    using Error::Error;
};

class AllZeroDifferences : public Error {
public:
    using Error::Error;
};

// I/O and configuration errors raised by the experiment harness.
class MissingColumn : public Error {
public:
    using Error::Error;
};

class NonNumericFeature : public Error {
public:
    using Error::Error;
};

class EmptyFile : public Error {
public:
    using Error::Error;
};

class ClassTooSmall : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace labelfuse

#ifndef QOSLAB_ERROR_HPP
#define QOSLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qoslab {

/// Base class for all qoslab failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user-supplied configuration (profiles, specs, config files, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem / socket failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace qoslab

#endif

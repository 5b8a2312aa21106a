#ifndef SPOTLIER_ERRORS_HPP
#define SPOTLIER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spotlier {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad inputs: violated preconditions, malformed files, inconsistent
/// dimensions. The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Filesystem / OS level failures. The CLI maps these to exit code 1.
class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace spotlier

#endif

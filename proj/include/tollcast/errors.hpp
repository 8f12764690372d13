#pragma once

#include <stdexcept>
#include <string>

namespace tollcast {

/// Raised when a station, edge or vehicle id does not resolve.
class IdentifierError : public std::runtime_error {
 public:
  explicit IdentifierError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a feature vector does not match the schema it is used with.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tollcast

#pragma once

#include <stdexcept>
#include <string>

namespace aquobs {

// Malformed input document (bad JSON/CSV/INP syntax or schema).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input that violates a model invariant (dangling ids,
// mass-balance residual, CFL violation, inconsistent scenario).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A configurable resource cap was exceeded (e.g. brute-force enumeration).
struct ResourceCapError : std::runtime_error {
  explicit ResourceCapError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aquobs

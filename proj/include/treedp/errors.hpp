#pragma once

#include <stdexcept>
#include <string>

namespace treedp {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or out-of-range user input (configs, constructor arguments).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A feasible-set query came back empty; the message names the node.
class InfeasibleError : public Error {
public:
  using Error::Error;
};

/// A supremum diverged (unbounded inner problem, no finite one-step bound).
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// A control set admitted arbitrarily large elements during a radius scan.
class UnboundedError : public Error {
public:
  using Error::Error;
};

/// A discretization came back empty; the message suggests a finer resolution.
class ResolutionError : public Error {
public:
  using Error::Error;
};

}  // namespace treedp

#pragma once

#include <stdexcept>
#include <string>

namespace perflod {

/// Bad user input: unsupported geometry, misaligned grids, malformed config.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The perforated domain violates a structural assumption (e.g. it is disconnected).
class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Base for failures inside a numerical kernel.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SolverError : public NumericalError {
public:
  SolverError(const std::string& what, double residual)
      : NumericalError(what + " (relative residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// A local Gram system or patch measure collapsed, usually because the
/// perforation removed (almost) all of a coarse patch.
class DegeneratePatchError : public NumericalError {
public:
  DegeneratePatchError(const std::string& what, int node)
      : NumericalError(what + " at coarse node " + std::to_string(node)), node_(node) {}

  int node() const noexcept { return node_; }

private:
  int node_;
};

class CorrectorError : public NumericalError {
public:
  CorrectorError(const std::string& what, int node, int layers)
      : NumericalError(what + " for corrector (x=" + std::to_string(node) +
                       ", k=" + std::to_string(layers) + ")"),
        node_(node), layers_(layers) {}

  int node() const noexcept { return node_; }
  int layers() const noexcept { return layers_; }

private:
  int node_;
  int layers_;
};

} // namespace perflod

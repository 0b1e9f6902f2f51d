#pragma once

#include <stdexcept>
#include <string>

namespace toalab {

/// Base class for every numerical failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// scatter
class DegenerateEnergy : public Error {
 public:
  using Error::Error;
};

// arrival
class TurningPointError : public Error {
 public:
  using Error::Error;
};
class GeometryError : public Error {
 public:
  using Error::Error;
};
class NoDetection : public Error {
 public:
  using Error::Error;
};

/// Raised when a sampling window cannot hold the support of a function
/// (time grid, biphoton detuning grid).
class GridTooNarrow : public Error {
 public:
  using Error::Error;
};

// resonance
class MaxIterations : public Error {
 public:
  using Error::Error;
};
class BoxBoundaryPole : public Error {
 public:
  using Error::Error;
};
class OverlappingResonances : public Error {
 public:
  using Error::Error;
};

// tdse
class DomainTooSmall : public Error {
 public:
  using Error::Error;
};

// biphoton
class InsufficientRange : public Error {
 public:
  using Error::Error;
};

// hom
class GridTooCoarse : public Error {
 public:
  using Error::Error;
};
class EdgeMinimum : public Error {
 public:
  using Error::Error;
};

}  // namespace toalab

#pragma once

#include <stdexcept>
#include <string>

namespace rbt {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: mismatched sizes, non-finite values, empty inputs.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Degenerate geometry: singular warps, points mapped to infinity, bad quads.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Point-set fitting failed (too few or degenerate correspondences).
class FitError : public Error {
 public:
  using Error::Error;
};

// Newton step could not be computed even after regularization.
class StepError : public Error {
 public:
  using Error::Error;
};

// Dataset / ground truth / config ingestion failure.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rbt

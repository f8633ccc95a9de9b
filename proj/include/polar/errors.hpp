#pragma once

#include <stdexcept>
#include <string>

namespace polar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image dimensions are invalid for the requested operation (odd mosaic
/// sizes, mismatched shapes, images smaller than a pyramid level).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A sample lies outside the representable range of its container.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible interval.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Data is tagged with the wrong radiometric domain (gamma vs linear raw).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A file could not be decoded (bad magic, truncation, unsupported layout).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace polar

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hierdoc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, rows, shapes).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A lookup key that is not present (doc_id, class name, model name).
class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace hierdoc

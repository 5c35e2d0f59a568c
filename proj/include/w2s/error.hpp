// Copyright 2026 The W2S Label Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace w2s {

/// Base of every error thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed annotation or record input. Carries the file and the 1-based
/// line (0 when the format has no meaningful line).
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// A raw category with no entry in the dataset's category map.
class MappingError : public Error {
 public:
  explicit MappingError(std::string category)
      : Error("unmapped category '" + category + "'"),
        category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Emitted data does not satisfy its record schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a remote model backend.
class TransportError : public Error {
 public:
  enum class Kind { connection, timeout, http_status, bad_body };

  TransportError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline const char* to_string(TransportError::Kind kind) {
  switch (kind) {
    case TransportError::Kind::connection: return "connection";
    case TransportError::Kind::timeout: return "timeout";
    case TransportError::Kind::http_status: return "http_status";
    case TransportError::Kind::bad_body: return "bad_body";
  }
  return "unknown";
}

/// Lookup of an unknown key (category, review item, ...).
class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace w2s

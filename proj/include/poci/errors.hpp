#pragma once

#include <stdexcept>
#include <string>

namespace poci {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A scene edit that cannot be applied (unknown id, duplicate id, invalid result).
struct EditError : Error {
  using Error::Error;
};

/// Malformed layout or edit document.
struct ParseError : Error {
  using Error::Error;
};

struct SchemaVersionError : ParseError {
  using ParseError::ParseError;
};

/// Shape or partition contract broken by a caller.
struct ShapeError : Error {
  using Error::Error;
};

/// Failure inside a denoiser call, tagged with the path and timestep that produced it.
struct DenoiserError : Error {
  std::string path_id;
  int timestep = -1;

  DenoiserError(const std::string& message, std::string path, int t)
      : Error(message + " [path " + path + ", timestep " + std::to_string(t) + "]"),
        path_id(std::move(path)),
        timestep(t) {}
};

}  // namespace poci

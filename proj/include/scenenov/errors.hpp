/*
 * Copyright 2026 The Scene Novelty Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace scenenov {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map it to a structured diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define SCENENOV_ERROR_TYPE(Name, tag)                    \
  class Name : public Error {                             \
   public:                                                \
    using Error::Error;                                   \
    const char* kind() const noexcept override { return tag; } \
  };

SCENENOV_ERROR_TYPE(ParameterError, "parameter")
SCENENOV_ERROR_TYPE(ParseError, "parse")
SCENENOV_ERROR_TYPE(ValidationError, "validation")
SCENENOV_ERROR_TYPE(GeometryError, "geometry")
SCENENOV_ERROR_TYPE(FormatError, "format")
SCENENOV_ERROR_TYPE(GraphError, "graph")
SCENENOV_ERROR_TYPE(SamplingError, "sampling")
SCENENOV_ERROR_TYPE(ShapeError, "shape")
SCENENOV_ERROR_TYPE(NumericError, "numeric")
SCENENOV_ERROR_TYPE(UsageError, "usage")
SCENENOV_ERROR_TYPE(FitError, "fit")
SCENENOV_ERROR_TYPE(SolverError, "solver")
SCENENOV_ERROR_TYPE(IoError, "io")

#undef SCENENOV_ERROR_TYPE

// Sampler failures carry a reason so the trainer can resample anchors.
class NoPositiveError : public SamplingError {
 public:
  using SamplingError::SamplingError;
};
class NoNegativeError : public SamplingError {
 public:
  using SamplingError::SamplingError;
};

}  // namespace scenenov

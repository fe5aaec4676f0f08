// Copyright 2026 trajset contributors
// Licensed under the terms of the Apache 2.0 License.
// See the LICENSE file in the project root for terms.
#pragma once

#include <stdexcept>
#include <string>

namespace trajset {

// Base class for all pipeline errors so callers can catch one type at the
// CLI boundary and still distinguish categories in tests.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define TRAJSET_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// frame_source
TRAJSET_DEFINE_ERROR(UnreadableSource);
TRAJSET_DEFINE_ERROR(UnsupportedFormat);
TRAJSET_DEFINE_ERROR(InconsistentDimensions);
TRAJSET_DEFINE_ERROR(FrameTooSmall);

// optical flow
TRAJSET_DEFINE_ERROR(DimensionMismatch);
TRAJSET_DEFINE_ERROR(BadKernel);

// trajectory / TS encoding
TRAJSET_DEFINE_ERROR(OutOfFrame);

// codebook / fisher
TRAJSET_DEFINE_ERROR(EmptyInput);
TRAJSET_DEFINE_ERROR(DegenerateData);
TRAJSET_DEFINE_ERROR(TooFewSamples);
TRAJSET_DEFINE_ERROR(DimMismatch);
TRAJSET_DEFINE_ERROR(NoFeatures);
TRAJSET_DEFINE_ERROR(ZeroVector);

// classifier
TRAJSET_DEFINE_ERROR(SingleClass);

// pipeline
TRAJSET_DEFINE_ERROR(SingleGroup);
TRAJSET_DEFINE_ERROR(EmptyBlock);
TRAJSET_DEFINE_ERROR(BadConfig);

#undef TRAJSET_DEFINE_ERROR

}  // namespace trajset

// Copyright 2026 The SmileFusion Authors.
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

#ifndef SMILEFUSION_ERROR_HPP_
#define SMILEFUSION_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace smilefusion {

// Base of every error thrown by the library. Callers that only need to
// distinguish "ours" from foreign exceptions catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SMILEFUSION_DEFINE_ERROR(Name)   \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

SMILEFUSION_DEFINE_ERROR(InvalidArgument);
SMILEFUSION_DEFINE_ERROR(IndexOutOfRange);
SMILEFUSION_DEFINE_ERROR(DegenerateGeometry);
SMILEFUSION_DEFINE_ERROR(NoPhaseStructure);
SMILEFUSION_DEFINE_ERROR(ShapeMismatch);
SMILEFUSION_DEFINE_ERROR(NonFiniteValue);
SMILEFUSION_DEFINE_ERROR(NotScalarLoss);
SMILEFUSION_DEFINE_ERROR(UnsupportedInferenceMode);
SMILEFUSION_DEFINE_ERROR(UnknownKind);
SMILEFUSION_DEFINE_ERROR(ParseError);
SMILEFUSION_DEFINE_ERROR(SchemaVersionMismatch);
SMILEFUSION_DEFINE_ERROR(EmptyClass);
SMILEFUSION_DEFINE_ERROR(TooFewSubjects);
SMILEFUSION_DEFINE_ERROR(IoError);

#undef SMILEFUSION_DEFINE_ERROR

}  // namespace smilefusion

#endif  // SMILEFUSION_ERROR_HPP_

// Copyright 2026 The dpgrad-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGRAD_ERRORS_HPP_
#define DPGRAD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dpgrad {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied parameter is out of its documented range.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Input data violates a precondition (non-finite values, bad shapes).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a layer layout do not.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// A compressed message is inconsistent with the layout it targets.
class CorruptMessage : public Error {
 public:
  using Error::Error;
};

/// A closed-form bound was evaluated outside its stated domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A computation produced non-finite intermediate values.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem / stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpgrad

#endif  // DPGRAD_ERRORS_HPP_

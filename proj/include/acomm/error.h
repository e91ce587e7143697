// Copyright 2026 The acomm Authors
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

#ifndef ACOMM_ERROR_H_
#define ACOMM_ERROR_H_

#include <stdexcept>
#include <string>

namespace acomm {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something that violates a precondition (bad shape, layer
// out of range, invalid config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent ACWT / JSONL input.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A token sequence would exceed the model's max_seq_len.
class ContextOverflow : public Error {
 public:
  using Error::Error;
};

}  // namespace acomm

#endif  // ACOMM_ERROR_H_

// Copyright 2026 The OddForge Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace oddforge {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (images, masks, registry, catalogs).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A lookup into a store, catalog or suite that names something absent.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Failure of the model under test (external command, invalid output).
class AdapterError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure while persisting or reading artifacts.
class StoreError : public Error {
 public:
  using Error::Error;
};

}  // namespace oddforge

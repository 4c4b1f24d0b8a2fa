// Copyright (c) 2026 MicroISP contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace microisp {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (shape/channel mismatch etc.).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (unknown depth multiplier, empty dataset, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed file content (bad magic, truncation, CRC mismatch, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure (missing file, write error).
class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite value where a finite one is required (diverged training loss).
class NumericError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractError(what);
}

} // namespace microisp

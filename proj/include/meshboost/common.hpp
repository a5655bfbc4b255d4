// Copyright 2026-present the meshboost authors
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace meshboost {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
 public:
    using Error::Error;
};

/// Malformed or corrupted file content.
class FormatError : public Error {
 public:
    using Error::Error;
};

/// Linear solve failures (singular or indefinite systems).
class SolverError : public Error {
 public:
    using Error::Error;
};

/// File system failures.
class IoError : public Error {
 public:
    using Error::Error;
};

/// Splitmix64 step. Used to derive independent stream seeds from a master seed.
constexpr std::uint64_t
splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of `master`.
constexpr std::uint64_t
derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// 64-bit FNV-1a over raw bytes.
std::uint64_t
fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xCBF29CE484222325ULL);

std::string
hex64(std::uint64_t value);

}  // namespace meshboost

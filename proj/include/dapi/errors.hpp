/*
 Copyright 2026 DAPI Toolkit Contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <stdexcept>
#include <string>

namespace dapi {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Argument dimensions do not agree (matrix/vector size mismatch, bad index).
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// An input object violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (JSON syntax, missing field, wrong type).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Function evaluated outside the open interval it is defined on.
class DomainViolation : public Error {
public:
    using Error::Error;
};

/// An iterative solve exhausted its iteration budget.
class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// The Laplacian nullspace is not one-dimensional (no globally reachable node).
class NullspaceNotOneDimensional : public Error {
public:
    using Error::Error;
};

/// Reduced susceptance matrix is singular (electrically disconnected network).
class SingularNetwork : public Error {
public:
    using Error::Error;
};

/// Dispatch problem has no strictly feasible point.
class Infeasible : public Error {
public:
    using Error::Error;
};

/// w'K1 <= 0: the gain matrix kills the averaging direction.
class GainConditionViolated : public Error {
public:
    using Error::Error;
};

/// Lyapunov equation unsolvable or its solution not positive definite.
class NotHurwitz : public Error {
public:
    using Error::Error;
};

/// Integration produced a non-finite state component.
class NonFiniteState : public Error {
public:
    using Error::Error;
};

} // namespace dapi

// SPDX-License-Identifier: Apache-2.0
//
// trilat: device-free trilateration with two base stations and one passive IRS
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace trilat {

// Base of all pipeline failures. Argument validation uses std::invalid_argument.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A path falls outside the L-tap delay window.
class DelaySpreadError : public Error
{
public:
    DelaySpreadError(double distance_m, long bin, long n_taps)
        : Error("scene exceeds delay spread: path of " + std::to_string(distance_m) + " m maps to bin " +
                std::to_string(bin) + " > L = " + std::to_string(n_taps)),
          bin_(bin)
    {
    }
    long bin() const noexcept { return bin_; }

private:
    long bin_;
};

class CongestedSceneError : public Error
{
public:
    using Error::Error;
};

// Proximal solver hit max_iters; carries the final first-order optimality gap.
class NonConvergenceError : public Error
{
public:
    NonConvergenceError(const std::string &solver, int iterations, double gap)
        : Error(solver + " did not converge in " + std::to_string(iterations) +
                " iterations (optimality gap " + std::to_string(gap) + ")"),
          iterations_(iterations), gap_(gap)
    {
    }
    int iterations() const noexcept { return iterations_; }
    double gap() const noexcept { return gap_; }

private:
    int iterations_;
    double gap_;
};

class InconsistentDetectionError : public Error
{
public:
    using Error::Error;
};

class NoConsistentAssociationError : public Error
{
public:
    using Error::Error;
};

class LocalizationError : public Error
{
public:
    using Error::Error;
};

// Malformed or invariant-violating configuration.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace trilat

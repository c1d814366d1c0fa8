#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noisy {

/// Base class of every error raised by the engine. Messages name the
/// precondition that failed.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A measure that was required to have zero total mass did not.
class NonZeroMass : public Error {
public:
    NonZeroMass(const std::string& where, double mass);
    double mass() const noexcept { return mass_; }

private:
    double mass_;
};

/// A signed noise kernel used as a derivative kernel has non-zero mass.
class NonZeroMassKernel : public Error {
public:
    explicit NonZeroMassKernel(double mass);
    double mass() const noexcept { return mass_; }

private:
    double mass_;
};

/// delta * Lip(S) >= 1, so 1 + delta*S is not a bijection of [0,1].
class NotBijective : public Error {
public:
    NotBijective(double delta, double lipschitz);
};

/// Uniform noise radius outside its admissible range.
class BadRadius : public Error {
public:
    BadRadius(double radius, const std::string& range);
};

/// A map image left [0,1] by more than the tolerance.
class MapRangeError : public Error {
public:
    MapRangeError(const std::string& label, double x, double image);
};

/// An iterative solver ran out of iterations.
class NotConverged : public Error {
public:
    NotConverged(const std::string& what, double last_residual, std::size_t iterations);
    double last_residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

/// The control formula divides by a pushforward density below the floor.
class DenominatorVanishes : public Error {
public:
    DenominatorVanishes(double position, double value, double floor);
};

}  // namespace noisy

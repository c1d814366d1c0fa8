#include "noisy/errors.hpp"

#include "noisy/format.hpp"

namespace noisy {

NonZeroMass::NonZeroMass(const std::string& where, double mass)
    : Error(where + ": total mass must be 0 (|mass| <= 1e-10), got " + format_double(mass)),
      mass_(mass) {}

NonZeroMassKernel::NonZeroMassKernel(double mass)
    : Error("derivative kernel must have total mass 0, got " + format_double(mass)), mass_(mass) {}

NotBijective::NotBijective(double delta, double lipschitz)
    : Error("perturbation: delta * Lip(S) must be < 1, got delta=" + format_double(delta) +
            " Lip(S)=" + format_double(lipschitz)) {}

BadRadius::BadRadius(double radius, const std::string& range)
    : Error("kernel.radius must lie in " + range + ", got " + format_double(radius)) {}

MapRangeError::MapRangeError(const std::string& label, double x, double image)
    : Error("map '" + label + "' sends x=" + format_double(x) + " to " + format_double(image) +
            ", outside [0,1]") {}

NotConverged::NotConverged(const std::string& what, double last_residual, std::size_t iterations)
    : Error(what + ": not converged after " + std::to_string(iterations) +
            " iterations (last residual " + format_double(last_residual) + ")"),
      residual_(last_residual),
      iterations_(iterations) {}

DenominatorVanishes::DenominatorVanishes(double position, double value, double floor)
    : Error("control: pushforward density " + format_double(value) + " at t=" +
            format_double(position) + " is below the floor " + format_double(floor) +
            " where S must be nonzero") {}

}  // namespace noisy

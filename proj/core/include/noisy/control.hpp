#pragma once

#include <string>
#include <vector>

#include "noisy/dynamics.hpp"
#include "noisy/measures.hpp"
#include "noisy/response.hpp"
#include "noisy/transfer.hpp"

namespace noisy {

struct DeconvolutionResult {
    GridDensity density;
    /// ||N f - y||_1.
    double residual;
    /// residual / ||y||_1 (0 when y = 0).
    double relative_residual;
    /// Set when the relative residual exceeds 1e-3: y is outside the numerical
    /// range of N.
    bool out_of_range;
};

inline constexpr double kDeconvolutionRidge = 1e-10;
inline constexpr double kOutOfRangeThreshold = 1e-3;

/// Zero-mass Tikhonov least squares: minimizes ||N f - y||^2 + lambda ||f||^2
/// subject to sum f = 0, with lambda = relative_ridge * max diag(N^T N).
/// Throws NonZeroMass if |mass y| > 1e-10.
DeconvolutionResult deconvolve(const TransferMatrix& N, const GridDensity& y,
                               double relative_ridge = kDeconvolutionRidge);

struct ControlOptions {
    double relative_ridge = kDeconvolutionRidge;
    /// Smallest admissible |L_T f0| where S is nonzero.
    double denominator_floor = 1e-6;
};

struct ControlSolution {
    /// Nodes at the cell boundaries; S(0) = S(1) = 0.
    PerturbationS shape;
    GridDensity deconvolved;
    double deconvolution_residual;
    double relative_residual;
    bool out_of_range;
    /// Max node slope of `shape`.
    double lipschitz;
    /// min |L_T f0| over the boundaries where S is nonzero, minus the floor.
    double denominator_margin;
    /// Value of the numerator at t = 1 before it was pinned to zero.
    double end_defect;
    std::vector<std::string> advisories;
};

/// Solves rho * (-(L_T f0) S)' = mu - L mu for S:
/// y = mu - L mu, f = deconvolve(N, y), S(x_k) = (int_0^{x_k} f) / (-L_T f0 (x_k)).
/// Throws NonZeroMass or DenominatorVanishes.
ControlSolution solve_linear_request(const GridDensity& target, const AssembledSystem& system,
                                     const GridDensity& f0, const ControlOptions& options = {});

}  // namespace noisy

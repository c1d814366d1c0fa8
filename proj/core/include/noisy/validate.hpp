#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "noisy/dynamics.hpp"
#include "noisy/measures.hpp"
#include "noisy/response.hpp"
#include "noisy/transfer.hpp"

namespace noisy {

struct FDPoint {
    double delta;
    /// ||(f_delta - f0)/delta - nu|| in the report's norm.
    double error;
    /// Total mass of (f_delta - f0)/delta.
    double direction_mass;
    std::size_t iterations;
};

struct FDReport {
    NormKind norm;
    /// Strictly decreasing deltas.
    std::vector<FDPoint> points;
    /// Error at the smallest delta.
    double floor;
    /// Least-squares slope of log(error) against log(delta) over the points
    /// whose error exceeds 3 * floor; NaN when fewer than two qualify.
    double order;
    /// Number of points used by the fit.
    std::size_t fitted_points;
    /// Each error is at most max(previous error, 3 * floor).
    bool monotone;
};

/// Fits order, floor and the monotone flag for (delta, error) pairs.
FDReport summarize_fd(NormKind norm, std::vector<FDPoint> points);

/// For each delta builds the perturbed operator, solves its stationary density
/// (starting from f0) and compares the difference quotient with nu.
/// Deltas must be positive and strictly decreasing.
FDReport finite_difference_response(const PerturbationSpec& spec, const AssembledSystem& system,
                                    const GridDensity& f0, const GridDensity& nu,
                                    const std::vector<double>& deltas, NormKind norm,
                                    const StationaryOptions& options = {});

/// With probability `weight` a step applies T2 alone instead of the noisy map.
struct MixtureStep {
    MapModel second_map;
    double weight;
};

struct SimulationOptions {
    std::uint64_t seed = 0;
    std::size_t steps = 1000000;
    std::size_t burn_in = 1000;
    double start = 0.5;
};

struct SimulationReport {
    std::uint64_t seed;
    std::size_t steps;
    std::size_t burn_in;
    /// Normalized histogram of the post-burn-in states.
    GridDensity histogram;
    /// ||histogram - f0||_1 when a reference density was supplied.
    std::optional<double> distance;
};

/// Iterates x <- pi(T(x) + w) (or the wrap in periodic mode) with w drawn by
/// inverse-CDF sampling from a 64-bit Mersenne Twister seeded with `seed`.
/// The reference, if given, may live on a finer grid whose size is a multiple
/// of the histogram grid; it is cell-averaged before comparison.
SimulationReport simulate_trajectories(const MapModel& map, const NoiseKernel& kernel, BoundaryMode mode,
                                       const Grid& grid, const SimulationOptions& options,
                                       const std::optional<GridDensity>& reference = std::nullopt,
                                       const std::optional<MixtureStep>& mixture = std::nullopt);

}  // namespace noisy

#include "noisy/validate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <stdexcept>

#include "noisy/format.hpp"
#include "noisy/parallel.hpp"

namespace noisy {

FDReport summarize_fd(NormKind norm, std::vector<FDPoint> points) {
    FDReport report{norm, std::move(points), 0.0, std::numeric_limits<double>::quiet_NaN(), 0, true};
    if (report.points.empty()) return report;
    report.floor = report.points.back().error;
    const double cutoff = 3.0 * report.floor;

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    for (const FDPoint& p : report.points) {
        if (!(p.error > cutoff) || !(p.error > 0.0)) continue;
        const double x = std::log(p.delta);
        const double y = std::log(p.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    report.fitted_points = m;
    if (m >= 2) {
        const double md = static_cast<double>(m);
        const double denom = md * sxx - sx * sx;
        if (denom > 0.0) report.order = (md * sxy - sx * sy) / denom;
    }
    for (std::size_t k = 1; k < report.points.size(); ++k)
        if (report.points[k].error > std::max(report.points[k - 1].error, cutoff)) report.monotone = false;
    return report;
}

FDReport finite_difference_response(const PerturbationSpec& spec, const AssembledSystem& system,
                                    const GridDensity& f0, const GridDensity& nu,
                                    const std::vector<double>& deltas, NormKind norm,
                                    const StationaryOptions& options) {
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        if (!(deltas[k] > 0.0)) throw std::invalid_argument("FD deltas must be positive");
        if (k > 0 && !(deltas[k] < deltas[k - 1]))
            throw std::invalid_argument("FD deltas must be strictly decreasing");
    }
    std::vector<FDPoint> points(deltas.size());
    parallel::for_chunks(deltas.size(), [&](std::size_t first, std::size_t last) {
        for (std::size_t k = first; k < last; ++k) {
            const double delta = deltas[k];
            const TransferMatrix L = perturbed_operator(spec, system, delta);
            const StationaryResult fd = stationary_density(L, options, f0);
            GridDensity quotient = (fd.density - f0) * (1.0 / delta);
            const double mass = quotient.mass();
            GridDensity diff = quotient - nu;
            // Both densities are probabilities, so the quotient is zero-mass up
            // to rounding; the projection keeps the W norm's mass gate quiet.
            if (norm == NormKind::Wasserstein) diff = project_zero_average(diff);
            points[k] = FDPoint{delta, noisy::norm(norm, diff), mass, fd.iterations};
        }
    });
    return summarize_fd(norm, std::move(points));
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SimulationReport simulate_trajectories(const MapModel& map, const NoiseKernel& kernel, BoundaryMode mode,
                                       const Grid& grid, const SimulationOptions& options,
                                       const std::optional<GridDensity>& reference,
                                       const std::optional<MixtureStep>& mixture) {
    if (!kernel.is_probability()) throw std::invalid_argument("simulate_trajectories: kernel must be a probability kernel");
    if (!(options.steps > options.burn_in))
        throw std::invalid_argument("simulate_trajectories: steps must exceed burn_in");
    if (!(options.start >= 0.0 && options.start <= 1.0))
        throw std::invalid_argument("simulate_trajectories: start must lie in [0,1]");
    if (mixture && !(mixture->weight >= 0.0 && mixture->weight <= 1.0))
        throw std::invalid_argument("simulate_trajectories: mixture weight must lie in [0,1]");

    std::mt19937_64 rng(options.seed);
    std::vector<double> counts(grid.size(), 0.0);
    double x = options.start;
    for (std::size_t step = 0; step < options.steps; ++step) {
        if (mixture && uniform01(rng) < mixture->weight) {
            x = std::clamp(mixture->second_map(x), 0.0, 1.0);
        } else {
            const double y = map(x) + kernel.quantile(uniform01(rng));
            x = mode == BoundaryMode::Reflecting ? reflect(y) : wrap(y);
        }
        if (step >= options.burn_in) counts[grid.cell_of(x)] += 1.0;
    }
    const double samples = static_cast<double>(options.steps - options.burn_in);
    GridDensity histogram(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) histogram[k] = counts[k] * static_cast<double>(grid.size()) / samples;

    SimulationReport report{options.seed, options.steps, options.burn_in, std::move(histogram), std::nullopt};
    if (reference) {
        GridDensity ref = *reference;
        if (ref.size() != grid.size()) {
            if (ref.size() % grid.size() != 0)
                throw std::invalid_argument("simulate_trajectories: reference grid " + std::to_string(ref.size()) +
                                            " is not a refinement of the histogram grid " +
                                            std::to_string(grid.size()));
            ref = coarsen(ref, ref.size() / grid.size());
        }
        report.distance = l1_norm(report.histogram - ref);
    }
    return report;
}

}  // namespace noisy

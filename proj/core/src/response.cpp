#include "noisy/response.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "noisy/errors.hpp"
#include "noisy/format.hpp"
#include "noisy/parallel.hpp"

namespace noisy {

AssembledSystem assemble(SystemSpec spec) {
    TransferMatrix deterministic = ulam_matrix(spec.map, spec.grid, spec.quadrature, spec.scheme);
    TransferMatrix convolution = convolution_matrix(spec.kernel, spec.grid, spec.mode);
    TransferMatrix annealed = multiply(convolution, deterministic);
    return AssembledSystem{std::move(spec), std::move(deterministic), std::move(convolution),
                           std::move(annealed)};
}

namespace {

void normalize_mass(GridDensity& f) {
    const double mass = f.mass();
    if (mass != 0.0) f *= 1.0 / mass;
}

}  // namespace

StationaryResult stationary_density(const TransferMatrix& L, const StationaryOptions& options,
                                    const std::optional<GridDensity>& initial) {
    GridDensity f = initial ? *initial : GridDensity::uniform(L.grid());
    if (!(f.grid() == L.grid())) throw std::invalid_argument("stationary_density: initial density grid mismatch");
    normalize_mass(f);
    GridDensity next(L.grid());
    double residual = 0.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        L.apply(f.values(), next.values());
        normalize_mass(next);
        residual = l1_norm(next - f);
        if (residual < options.tolerance) return {std::move(f), residual, it};
        std::swap(f, next);
    }
    throw NotConverged("stationary_density", residual, options.max_iterations);
}

MixingEstimate mixing_contraction(const TransferMatrix& L, std::size_t steps, std::size_t exact_max_cells) {
    const std::size_t n = L.size();
    const double h = L.grid().width();
    const double height = static_cast<double>(n);

    GridDensity mean = GridDensity::uniform(L.grid());
    for (std::size_t s = 0; s < steps; ++s) mean = L.apply(mean);

    const bool want_exact = n <= exact_max_cells;
    // Column-major store of L^n u_i, only for the exact pass.
    std::vector<double> images(want_exact ? n * n : 0);

    constexpr std::size_t kBlock = 32;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> block_upper(blocks, 0.0);
    parallel::for_chunks(blocks, [&](std::size_t first, std::size_t last) {
        std::vector<double> a(n * kBlock), b(n * kBlock);
        for (std::size_t blk = first; blk < last; ++blk) {
            const std::size_t col0 = blk * kBlock;
            const std::size_t width = std::min(kBlock, n - col0);
            std::fill(a.begin(), a.end(), 0.0);
            for (std::size_t c = 0; c < width; ++c) a[(col0 + c) * kBlock + c] = height;
            for (std::size_t s = 0; s < steps; ++s) {
                L.apply_block(a, b, kBlock);
                std::swap(a, b);
            }
            double worst = 0.0;
            for (std::size_t c = 0; c < width; ++c) {
                double dist = 0.0;
                for (std::size_t k = 0; k < n; ++k) dist += std::abs(a[k * kBlock + c] - mean[k]);
                worst = std::max(worst, dist * h);
                if (want_exact)
                    for (std::size_t k = 0; k < n; ++k) images[(col0 + c) * n + k] = a[k * kBlock + c];
            }
            block_upper[blk] = worst;
        }
    });

    MixingEstimate est{steps, *std::max_element(block_upper.begin(), block_upper.end()), std::nullopt};
    if (want_exact) {
        std::vector<double> row_best(n, 0.0);
        parallel::for_chunks(n, [&](std::size_t first, std::size_t last) {
            for (std::size_t i = first; i < last; ++i) {
                const double* ci = images.data() + i * n;
                double best = 0.0;
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double* cj = images.data() + j * n;
                    double dist = 0.0;
                    for (std::size_t k = 0; k < n; ++k) dist += std::abs(ci[k] - cj[k]);
                    best = std::max(best, dist);
                }
                row_best[i] = best * h / 2.0;
            }
        });
        est.exact = *std::max_element(row_best.begin(), row_best.end());
    }
    return est;
}

ResolventResult resolvent_apply(const TransferMatrix& L, const GridDensity& g, const ResolventOptions& options) {
    const double mass = g.mass();
    if (!(std::abs(mass) <= kZeroMassGate)) throw NonZeroMass("resolvent_apply", mass);
    GridDensity term = project_zero_average(g);
    GridDensity sum = term;
    GridDensity next(L.grid());
    double increment = l1_norm(term);
    std::size_t terms = 1;
    while (increment >= options.tolerance) {
        if (terms >= options.max_terms) throw NotConverged("resolvent_apply", increment, terms);
        L.apply(term.values(), next.values());
        // Keeps the iterates in the zero-average space despite rounding.
        next = project_zero_average(next);
        increment = l1_norm(next);
        if (increment < options.tolerance) break;
        sum += next;
        std::swap(term, next);
        ++terms;
    }
    return {std::move(sum), terms, increment};
}

SignedMeasure distributional_derivative(const GridDensity& h) {
    const Grid& grid = h.grid();
    const std::size_t n = grid.size();
    std::vector<Atom> atoms;
    atoms.reserve(n + 1);
    atoms.push_back({0.0, h[0]});
    for (std::size_t k = 1; k < n; ++k) atoms.push_back({grid.boundary(k), h[k] - h[k - 1]});
    atoms.push_back({1.0, -h[n - 1]});
    return SignedMeasure::atoms_only(grid, std::move(atoms));
}

namespace {

// Derivative in delta of the interpolated Ulam image of f under
// (1 + delta S) o T, at delta = 0+. Each piece spreads its mass uniformly over
// [lo, hi]; moving the ends with velocities S(lo), S(hi) changes the mass left
// of a boundary x inside the piece at rate -(mass/len) * V(x), with V the
// linear interpolation of the end velocities. Boundaries that coincide with a
// piece end only feel the end moving across them, hence the one-sided tests.
GridDensity ulam_map_derivative(const GridDensity& f, const MapModel& map, std::size_t quadrature,
                                const PerturbationS& s) {
    const Grid& grid = f.grid();
    const std::size_t n = grid.size();
    const double nd = static_cast<double>(n);
    std::vector<double> flux(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (f[i] == 0.0) continue;
        for_each_ulam_piece(map, grid, i, quadrature, [&](const UlamPiece& piece) {
            const double lo = std::min(piece.p, piece.q);
            const double hi = std::max(piece.p, piece.q);
            const double len = hi - lo;
            if (!(len > 0.0)) return;
            const double s_lo = s(lo);
            const double s_hi = s(hi);
            const double coeff = f[i] * piece.fraction / len;
            auto k = static_cast<std::size_t>(std::ceil(lo * nd));
            const auto k_end = std::min(n, static_cast<std::size_t>(std::floor(hi * nd)));
            for (; k <= k_end; ++k) {
                const double x = grid.boundary(k);
                if (x < lo || x > hi) continue;
                if (x == lo && !(s_lo < 0.0)) continue;
                if (x == hi && !(s_hi > 0.0)) continue;
                const double velocity = s_lo + (x - lo) / len * (s_hi - s_lo);
                flux[k] += coeff * velocity;
            }
        });
    }
    GridDensity out(grid);
    for (std::size_t j = 0; j < n; ++j) out[j] = flux[j] - flux[j + 1];
    return out;
}

}  // namespace

std::vector<double> boundary_pushforward(const GridDensity& f, const MapModel& map, std::size_t quadrature) {
    const Grid& grid = f.grid();
    const std::size_t n = grid.size();
    const double nd = static_cast<double>(n);
    std::vector<double> density(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (f[i] == 0.0) continue;
        for_each_ulam_piece(map, grid, i, quadrature, [&](const UlamPiece& piece) {
            const double lo = std::min(piece.p, piece.q);
            const double hi = std::max(piece.p, piece.q);
            const double len = hi - lo;
            if (!(len > 0.0)) return;
            // fraction is relative to the cell mass f[i] / n.
            const double value = f[i] * piece.fraction / (len * nd);
            auto k = static_cast<std::size_t>(std::ceil(lo * nd));
            const auto k_end = std::min(n, static_cast<std::size_t>(std::floor(hi * nd)));
            for (; k <= k_end; ++k) {
                const double x = grid.boundary(k);
                if (x < lo || x > hi) continue;
                density[k] += (x == lo || x == hi) ? 0.5 * value : value;
            }
        });
    }
    return density;
}

GridDensity derivative_map(const GridDensity& f0, const AssembledSystem& system, const PerturbationS& s,
                           MapDerivativeScheme scheme) {
    if (!(f0.grid() == system.grid())) throw std::invalid_argument("derivative_map: grid mismatch");
    if (s.is_zero()) return GridDensity(system.grid());
    if (scheme == MapDerivativeScheme::Consistent) {
        if (system.spec.scheme != UlamScheme::Interpolated)
            throw std::invalid_argument(
                "derivative_map: the consistent scheme needs the interpolated Ulam discretization");
        const GridDensity moved = ulam_map_derivative(f0, system.spec.map, system.spec.quadrature, s);
        return system.convolution.apply(moved);
    }
    GridDensity pushed = system.deterministic.apply(f0);
    const Grid& grid = system.grid();
    for (std::size_t k = 0; k < grid.size(); ++k) pushed[k] *= s(grid.center(k));
    SignedMeasure d = distributional_derivative(pushed);
    d *= -1.0;
    return convolve(system.spec.kernel, d, system.spec.mode);
}

GridDensity derivative_noise(const GridDensity& f0, const AssembledSystem& system, const NoiseKernel& rho_dot) {
    const double mass = rho_dot.mass();
    if (!(std::abs(mass) <= kMassTolerance)) throw NonZeroMassKernel(mass);
    const GridDensity pushed = system.deterministic.apply(f0);
    return convolution_matrix(rho_dot, system.grid(), system.spec.mode).apply(pushed);
}

GridDensity derivative_mixture(const GridDensity& f0, const TransferMatrix& second_map) {
    return second_map.apply(f0) - f0;
}

NormKind default_norm(const PerturbationSpec& spec) {
    return std::holds_alternative<NoiseRadiusPerturbation>(spec) ? NormKind::Wasserstein : NormKind::L1;
}

namespace {

double uniform_radius_of(const AssembledSystem& system, const NoiseRadiusPerturbation& p) {
    const auto radius = system.spec.kernel.uniform_radius();
    if (!radius) throw std::invalid_argument("noise perturbation requires a uniform system kernel");
    if (std::abs(*radius - p.radius) > 1e-15)
        throw std::invalid_argument("noise perturbation radius " + format_double(p.radius) +
                                    " differs from the system kernel radius " + format_double(*radius));
    return *radius;
}

// bv_variation of g.S over runs of consecutive cells whose centres lie in the
// support of S.
double restricted_variation(const GridDensity& pushed, const PerturbationS& s) {
    const Grid& grid = pushed.grid();
    const auto support = s.support();
    auto inside = [&](double x) {
        for (const auto& [a, b] : support)
            if (x >= a && x <= b) return true;
        return false;
    };
    double total = 0.0;
    bool prev_in = false;
    double prev = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double x = grid.center(k);
        const bool in = inside(x);
        const double v = pushed[k] * s(x);
        if (in && prev_in) total += std::abs(v - prev);
        prev_in = in;
        prev = v;
    }
    return total;
}

}  // namespace

ResponseResult linear_response(const PerturbationSpec& spec, const AssembledSystem& system, const GridDensity& f0,
                               const ResponseOptions& options) {
    ResponseResult result{GridDensity(system.grid()), GridDensity(system.grid()), 0, 0.0, default_norm(spec),
                          std::nullopt, std::nullopt, {}};
    if (const auto* mp = std::get_if<MapPerturbation>(&spec)) {
        result.derivative = derivative_map(f0, system, mp->shape, options.map_scheme);
        if (!mp->shape.is_zero()) {
            const double coarse = restricted_variation(system.deterministic.apply(f0), mp->shape);
            const Grid fine_grid(2 * system.grid().size());
            const TransferMatrix fine_map =
                ulam_matrix(system.spec.map, fine_grid, system.spec.quadrature, system.spec.scheme);
            const double fine = restricted_variation(fine_map.apply(refine(f0, 2)), mp->shape);
            result.bv_coarse = coarse;
            result.bv_fine = fine;
            if (coarse > 0.0 && fine / coarse > options.bv_refinement_ratio)
                result.warnings.push_back("variation of L_T(f0) S on the support of S grows by " +
                                          format_double(fine / coarse) +
                                          " under grid refinement; the map perturbation may not be regular enough");
        }
    } else if (const auto* np = std::get_if<NoiseRadiusPerturbation>(&spec)) {
        const double radius = uniform_radius_of(system, *np);
        result.derivative = derivative_noise(f0, system, uniform_kernel_derivative(radius));
    } else {
        const auto& mix_spec = std::get<MixturePerturbation>(spec);
        const TransferMatrix second =
            ulam_matrix(mix_spec.second_map, system.grid(), system.spec.quadrature, system.spec.scheme);
        result.derivative = derivative_mixture(f0, second);
    }

    const double mass = result.derivative.mass();
    if (std::abs(mass) > 1e-12)
        result.warnings.push_back("derivative mass " + format_double(mass) + " exceeds 1e-12");
    ResolventResult r = resolvent_apply(system.annealed, result.derivative, options.resolvent);
    result.resolvent_terms = r.terms;
    result.direction = std::move(r.density);
    GridDensity check = result.direction - system.annealed.apply(result.direction);
    check -= project_zero_average(result.derivative);
    result.resolvent_residual = l1_norm(check);
    return result;
}

TransferMatrix perturbed_operator(const PerturbationSpec& spec, const AssembledSystem& system, double magnitude) {
    const SystemSpec& s = system.spec;
    if (const auto* mp = std::get_if<MapPerturbation>(&spec)) {
        const MapModel moved = perturb_map(s.map, mp->shape, magnitude);
        return multiply(system.convolution, ulam_matrix(moved, s.grid, s.quadrature, s.scheme));
    }
    if (const auto* np = std::get_if<NoiseRadiusPerturbation>(&spec)) {
        const double radius = uniform_radius_of(system, *np);
        return multiply(convolution_matrix(uniform_kernel(radius + magnitude), s.grid, s.mode), system.deterministic);
    }
    const auto& mix_spec = std::get<MixturePerturbation>(spec);
    if (!(magnitude >= 0.0 && magnitude <= 1.0))
        throw std::invalid_argument("mixture weight must lie in [0,1], got " + format_double(magnitude));
    return mix(system.annealed, ulam_matrix(mix_spec.second_map, s.grid, s.quadrature, s.scheme), magnitude);
}

}  // namespace noisy

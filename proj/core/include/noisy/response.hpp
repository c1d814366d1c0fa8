#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "noisy/dynamics.hpp"
#include "noisy/measures.hpp"
#include "noisy/transfer.hpp"

namespace noisy {

/// Everything needed to assemble an annealed operator.
struct SystemSpec {
    MapModel map;
    NoiseKernel kernel;
    Grid grid;
    BoundaryMode mode = BoundaryMode::Reflecting;
    std::size_t quadrature = kDefaultQuadrature;
    UlamScheme scheme = UlamScheme::Interpolated;
};

/// The deterministic, convolution and annealed matrices of one system.
struct AssembledSystem {
    SystemSpec spec;
    TransferMatrix deterministic;
    TransferMatrix convolution;
    TransferMatrix annealed;

    const Grid& grid() const noexcept { return spec.grid; }
};

AssembledSystem assemble(SystemSpec spec);

struct StationaryOptions {
    double tolerance = 1e-12;
    std::size_t max_iterations = 100000;
};

struct StationaryResult {
    GridDensity density;
    /// ||L f - f||_1 of the returned density.
    double residual;
    std::size_t iterations;
};

/// Power iteration from `initial` (uniform when absent) with renormalization,
/// until ||L f - f||_1 < tolerance. Throws NotConverged.
StationaryResult stationary_density(const TransferMatrix& L, const StationaryOptions& options = {},
                                    const std::optional<GridDensity>& initial = std::nullopt);

struct MixingEstimate {
    std::size_t steps;
    /// max_i ||L^n u_i - L^n 1||_1 over normalized cell indicators u_i.
    double upper;
    /// max_{i<j} ||L^n (u_i - u_j)||_1 / 2, computed when the grid is small enough.
    std::optional<double> exact;
};

inline constexpr std::size_t kExactMixingMaxCells = 1024;

/// Estimates ||L^n restricted to zero-average densities||_1.
MixingEstimate mixing_contraction(const TransferMatrix& L, std::size_t steps,
                                  std::size_t exact_max_cells = kExactMixingMaxCells);

struct ResolventOptions {
    double tolerance = 1e-12;
    std::size_t max_terms = 1000000;
};

struct ResolventResult {
    GridDensity density;
    std::size_t terms;
    /// ||L^k g||_1 of the first term that was not added.
    double last_increment;
};

/// sum_{k>=0} L^k g for zero-mass g, stopping once ||L^k g||_1 < tolerance.
/// Throws NonZeroMass (|mass g| > 1e-10) or NotConverged.
ResolventResult resolvent_apply(const TransferMatrix& L, const GridDensity& g,
                                const ResolventOptions& options = {});

/// Weak derivative of h extended by zero: atoms (x_k, v_k - v_{k-1}) at the
/// interior boundaries plus (0, v_0) and (1, -v_{n-1}).
SignedMeasure distributional_derivative(const GridDensity& h);

enum class MapDerivativeScheme {
    /// Exact derivative in delta of the interpolated Ulam matrix of
    /// (1 + delta S) o T, followed by the convolution. Matches what the
    /// perturbed discrete operators actually do.
    Consistent,
    /// -(L_T f . S)' with S sampled at cell centres, as atoms, convolved with
    /// exact folded kernel translates.
    CellCentreAtoms,
};

/// L-dot f0 for T_delta = (1 + delta S) o T. Consistent requires the system
/// to use the interpolated Ulam scheme.
GridDensity derivative_map(const GridDensity& f0, const AssembledSystem& system,
                           const PerturbationS& s,
                           MapDerivativeScheme scheme = MapDerivativeScheme::Consistent);

/// rho_dot convolved with L_T f0 and folded. Throws NonZeroMassKernel if the
/// kernel mass exceeds 1e-12 in magnitude.
GridDensity derivative_noise(const GridDensity& f0, const AssembledSystem& system,
                             const NoiseKernel& rho_dot);

/// L_{T2} f0 - f0, where L_{T2} is the deterministic Ulam matrix of T2.
GridDensity derivative_mixture(const GridDensity& f0, const TransferMatrix& second_map);

/// Pushforward density of f through the interpolated Ulam scheme, evaluated at
/// each cell boundary x_k, k = 0..n (an image endpoint counts half).
std::vector<double> boundary_pushforward(const GridDensity& f, const MapModel& map,
                                         std::size_t quadrature);

/// Natural norm for the FD check of each perturbation kind: L1 for map and
/// mixture, Wasserstein for the noise radius.
NormKind default_norm(const PerturbationSpec& spec);

struct ResponseOptions {
    ResolventOptions resolvent{};
    MapDerivativeScheme map_scheme = MapDerivativeScheme::Consistent;
    /// Ratio above which the BV refinement diagnostic warns.
    double bv_refinement_ratio = 1.5;
};

struct ResponseResult {
    /// nu = R(1, L0) L-dot f0, zero mass.
    GridDensity direction;
    /// L-dot f0.
    GridDensity derivative;
    std::size_t resolvent_terms;
    /// ||(I - L0) nu - L-dot f0||_1.
    double resolvent_residual;
    NormKind norm;
    /// For map perturbations: bv_variation of L_T(f0) S on the support of S
    /// at n and 2n.
    std::optional<double> bv_coarse;
    std::optional<double> bv_fine;
    std::vector<std::string> warnings;
};

/// Derivative operator of the given kind followed by the resolvent.
ResponseResult linear_response(const PerturbationSpec& spec, const AssembledSystem& system,
                               const GridDensity& f0, const ResponseOptions& options = {});

/// The matrix of the system perturbed by `magnitude` (delta or xi).
TransferMatrix perturbed_operator(const PerturbationSpec& spec, const AssembledSystem& system,
                                  double magnitude);

}  // namespace noisy

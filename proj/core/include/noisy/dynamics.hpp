#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "noisy/measures.hpp"

namespace noisy {

enum class Monotonicity { Increasing, Decreasing, Constant };

/// One smooth piece of a piecewise map, defined on [lo, hi).
struct MapBranch {
    double lo;
    double hi;
    std::function<double(double)> value;
    std::function<double(double)> slope;
    Monotonicity monotonicity;
};

/// Piecewise map of [0,1] into itself. Branch domains partition [0,1]; the last
/// branch also owns x = 1. Critical points (zero or infinite slope) are listed
/// so that callers never divide by the derivative there.
class MapModel {
public:
    MapModel(std::string label, std::vector<MapBranch> branches,
             std::vector<double> critical_points = {});

    const std::string& label() const noexcept { return label_; }
    const std::vector<MapBranch>& branches() const noexcept { return branches_; }
    const std::vector<double>& critical_points() const noexcept { return critical_points_; }

    std::size_t branch_index(double x) const noexcept;
    double operator()(double x) const;
    double derivative(double x) const;

private:
    std::string label_;
    std::vector<MapBranch> branches_;
    std::vector<double> critical_points_;
};

struct BzConstants {
    double a;
    double b;
    double c;
};

BzConstants bz_constants();

/// The two-branch Belousov-Zhabotinsky model map; continuous with continuous
/// derivative at 0.3, critical points at 1/8 and 0.3.
MapModel make_bz_map();

enum class StandardMap { Identity, Doubling, Tent, Rotation };

/// theta is used only for Rotation and must lie in [0,1).
MapModel make_standard_map(StandardMap kind, double theta = 0.0);

/// Piecewise-linear perturbation field S given by nodes (t, s).
class PerturbationS {
public:
    struct Node {
        double t;
        double s;
        friend bool operator==(const Node&, const Node&) = default;
    };

    /// Nodes must have strictly increasing t inside [0,1].
    explicit PerturbationS(std::vector<Node> nodes);

    static PerturbationS zero();
    /// Tent of the given height centred at `center`, slopes +-height/half_width.
    static PerturbationS tent_bump(double center, double half_width, double height);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    /// Linear interpolation; zero outside the node range.
    double operator()(double t) const noexcept;
    /// Slope of the segment containing t (right segment at a node).
    double slope(double t) const noexcept;
    double lipschitz() const noexcept;
    double sup_abs() const noexcept;
    /// Closure of {S != 0} as merged closed intervals.
    std::vector<std::pair<double, double>> support() const;
    bool is_zero() const noexcept;

    friend bool operator==(const PerturbationS&, const PerturbationS&) = default;

private:
    std::vector<Node> nodes_;
};

struct PerturbationDiagnostics {
    double lipschitz = 0.0;
    double value_at_zero = 0.0;
    double value_at_one = 0.0;
    std::vector<std::pair<double, double>> support;
    bool valid = true;
    std::vector<std::string> violations;
};

PerturbationDiagnostics validate_perturbation(const PerturbationS& s);

/// T_delta = (1 + delta S) o T. Throws NotBijective when |delta| Lip(S) >= 1.
MapModel perturb_map(const MapModel& map, const PerturbationS& s, double delta);

/// Step density on [-1,1] plus optional atoms. Probability kernels have no
/// atoms, non-negative values and unit mass; derivative kernels are signed.
class NoiseKernel {
public:
    /// breakpoints.size() == values.size() + 1, strictly increasing, within [-1,1].
    NoiseKernel(std::string label, std::vector<double> breakpoints, std::vector<double> values,
                std::vector<Atom> atoms = {});

    const std::string& label() const noexcept { return label_; }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }

    /// Set for kernels built by uniform_kernel.
    std::optional<double> uniform_radius() const noexcept { return uniform_radius_; }

    double mass() const noexcept;
    double abs_mass() const noexcept;
    /// Sum of all jumps of the step part, including the jumps to zero at the ends.
    double extended_variation() const noexcept;
    /// ||rho||_1 + extended_variation.
    double bv_norm() const noexcept { return abs_mass() + extended_variation(); }
    bool is_probability(double tol = kMassTolerance) const noexcept;
    std::pair<double, double> support() const noexcept;

    double density(double z) const noexcept;
    /// R(z) = rho((-inf, z]), atoms included at z.
    double cdf(double z) const noexcept;
    /// Exact integral of R over [p, q].
    double integrated_cdf(double p, double q) const noexcept;
    /// Inverse of R for probability kernels, u in [0,1).
    double quantile(double u) const;

private:
    friend NoiseKernel uniform_kernel(double radius);

    double step_cdf(double z) const noexcept;
    double step_cdf_integral(double p, double q) const noexcept;

    std::string label_;
    std::vector<double> breakpoints_;
    std::vector<double> values_;
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;  // step mass left of each breakpoint
    std::optional<double> uniform_radius_;
};

/// a^-1 on [-a/2, a/2]; BadRadius unless 0 < a <= 1.
NoiseKernel uniform_kernel(double radius);

/// d/da of uniform_kernel(a): -a^-2 on [-a/2, a/2] plus atoms a^-1/2 at +-a/2.
/// BadRadius unless 0 < a < 1.
NoiseKernel uniform_kernel_derivative(double radius);

struct MapPerturbation {
    PerturbationS shape;
};

struct NoiseRadiusPerturbation {
    double radius;
};

struct MixturePerturbation {
    MapModel second_map;
};

/// The magnitude (delta or xi) is supplied per evaluation.
using PerturbationSpec = std::variant<MapPerturbation, NoiseRadiusPerturbation, MixturePerturbation>;

}  // namespace noisy

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace noisy {

/// Uniform partition of [0,1] into n cells of width 1/n.
class Grid {
public:
    /// Throws std::invalid_argument when n < 2.
    explicit Grid(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    double width() const noexcept { return 1.0 / static_cast<double>(n_); }
    double boundary(std::size_t k) const noexcept {
        return static_cast<double>(k) / static_cast<double>(n_);
    }
    double center(std::size_t k) const noexcept {
        return (static_cast<double>(k) + 0.5) / static_cast<double>(n_);
    }
    /// Index of the cell containing x; points outside [0,1) are clamped.
    std::size_t cell_of(double x) const noexcept;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t n_;
};

/// Piecewise-constant density (mass per unit length) on a Grid.
class GridDensity {
public:
    explicit GridDensity(Grid grid);
    GridDensity(Grid grid, std::vector<double> values);

    static GridDensity zero(Grid grid) { return GridDensity(grid); }
    static GridDensity uniform(Grid grid);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& operator[](std::size_t k) noexcept { return values_[k]; }

    /// h * sum(values), compensated.
    double mass() const;

    GridDensity& operator+=(const GridDensity& other);
    GridDensity& operator-=(const GridDensity& other);
    GridDensity& operator*=(double s);

    friend GridDensity operator+(GridDensity a, const GridDensity& b) { return a += b; }
    friend GridDensity operator-(GridDensity a, const GridDensity& b) { return a -= b; }
    friend GridDensity operator*(GridDensity a, double s) { return a *= s; }
    friend GridDensity operator*(double s, GridDensity a) { return a *= s; }
    friend bool operator==(const GridDensity&, const GridDensity&) = default;

private:
    Grid grid_;
    std::vector<double> values_;
};

struct Atom {
    double position;
    double weight;
    friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite signed measure on [0,1]: a grid density plus weighted Dirac atoms.
/// Atoms are kept sorted by position; atoms sharing a position are merged.
class SignedMeasure {
public:
    explicit SignedMeasure(GridDensity density, std::vector<Atom> atoms = {});
    static SignedMeasure atoms_only(Grid grid, std::vector<Atom> atoms);

    const Grid& grid() const noexcept { return density_.grid(); }
    const GridDensity& density() const noexcept { return density_; }
    std::span<const Atom> atoms() const noexcept { return atoms_; }

    SignedMeasure& operator*=(double s);
    friend bool operator==(const SignedMeasure&, const SignedMeasure&) = default;

private:
    GridDensity density_;
    std::vector<Atom> atoms_;
};

enum class NormKind { L1, BV, Wasserstein };

const char* to_string(NormKind kind) noexcept;

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> xs) noexcept;

double total_mass(const SignedMeasure& m);

double l1_norm(const GridDensity& f);

/// Sum of interior jumps |v[k+1] - v[k]|; the variation of the step function
/// on the open interval.
double bv_variation(const GridDensity& f);

/// Interior variation plus |v[0]| + |v[n-1]|: the variation of the step
/// function extended by zero to the whole line.
double extended_variation(const GridDensity& f);

/// ||f||_1 + extended_variation(f).
double bv_norm(const GridDensity& f);

/// Integral of |F_m| over [0,1], F_m(x) = m([0,x]). Requires |mass| <= 1e-10
/// and throws NonZeroMass otherwise.
double wasserstein_norm(const SignedMeasure& m);
double wasserstein_norm(const GridDensity& f);

/// Dispatches on kind. BV and Wasserstein have the conventions above.
double norm(NormKind kind, const GridDensity& f);

/// F(x_k) = m([0, x_k]) for k = 0..n (closed on the right, so atoms sitting
/// on a boundary are counted there).
std::vector<double> cdf(const SignedMeasure& m);

/// Subtracts (total mass) times the uniform density.
SignedMeasure project_zero_average(const SignedMeasure& m);
GridDensity project_zero_average(const GridDensity& f);

/// Represents f on a grid refined by an integer factor (same step function).
GridDensity refine(const GridDensity& f, std::size_t factor);

/// Cell-averages f onto a grid coarser by an integer factor.
GridDensity coarsen(const GridDensity& f, std::size_t factor);

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kZeroMassGate = 1e-10;

// CSV: "x_left,x_right,density" rows, then "atom_pos,atom_weight" rows.
// Numbers use the shortest representation that reads back exactly.
void write_csv(std::ostream& os, const SignedMeasure& m);
void write_csv(std::ostream& os, const GridDensity& f);
SignedMeasure read_measure_csv(std::istream& is);

}  // namespace noisy

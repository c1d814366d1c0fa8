#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "noisy/dynamics.hpp"
#include "noisy/measures.hpp"

namespace noisy {

enum class BoundaryMode { Reflecting, Periodic };
enum class Provenance { Deterministic, Convolution, Annealed, Mixture };

const char* to_string(BoundaryMode mode) noexcept;
const char* to_string(Provenance p) noexcept;

/// pi(x) = min over integers i of |x - 2i|.
double reflect(double x) noexcept;
/// x mod 1 in [0,1).
double wrap(double x) noexcept;

/// Index in [0,n) of the cell that line cell [k/n, (k+1)/n) lands on after
/// folding (reflecting) or wrapping (periodic).
std::size_t fold_cell(std::int64_t k, std::size_t n, BoundaryMode mode) noexcept;

/// Sparse column-stored operator on cell densities. Entry (j, i) is the
/// fraction of the mass of cell i that lands in cell j, so applying it to
/// density values gives density values.
class TransferMatrix {
public:
    struct Entry {
        std::uint32_t row;
        double weight;
    };

    /// Rows within each column are sorted and merged; exact zeros are dropped.
    TransferMatrix(Grid grid, BoundaryMode mode, Provenance provenance,
                   std::vector<std::vector<Entry>> columns);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return grid_.size(); }
    BoundaryMode mode() const noexcept { return mode_; }
    Provenance provenance() const noexcept { return provenance_; }

    std::span<const Entry> column(std::size_t i) const noexcept {
        return {entries_.data() + start_[i], entries_.data() + start_[i + 1]};
    }
    std::size_t nonzeros() const noexcept { return entries_.size(); }
    std::vector<double> column_sums() const;
    double min_entry() const noexcept;

    /// out = P * in; out is overwritten.
    void apply(std::span<const double> in, std::span<double> out) const;
    GridDensity apply(const GridDensity& f) const;

    /// out = P * in for `block` vectors stored row-major (n x block).
    void apply_block(std::span<const double> in, std::span<double> out, std::size_t block) const;

    /// Row-major n x n copy.
    std::vector<double> dense() const;

    /// "row,col,weight" lines, ascending column then row.
    void write_triplets(std::ostream& os) const;

private:
    Grid grid_;
    BoundaryMode mode_;
    Provenance provenance_;
    std::vector<std::size_t> start_;
    std::vector<Entry> entries_;
};

enum class UlamScheme {
    /// T is linearly interpolated on each of the K sub-intervals and the
    /// sub-interval mass is spread uniformly over its image. Exact for affine
    /// branches and differentiable in perturbations of T.
    Interpolated,
    /// Each sub-interval midpoint is mapped and deposits mass 1/K.
    Midpoint,
};

inline constexpr std::size_t kDefaultQuadrature = 64;

/// Ulam discretization of the pushforward L_T. Throws MapRangeError if an
/// image leaves [0,1] by more than 1e-12.
TransferMatrix ulam_matrix(const MapModel& map, const Grid& grid,
                           std::size_t quadrature = kDefaultQuadrature,
                           UlamScheme scheme = UlamScheme::Interpolated);

/// One straight piece of the interpolated Ulam scheme: the sub-interval
/// [u, v] of cell `cell` carries `fraction` of the cell's mass and its image
/// under the branch formula runs from p = T(u) to q = T(v) (clamped to [0,1]).
struct UlamPiece {
    std::size_t cell;
    double u, v;
    double p, q;
    double fraction;
};

/// Visits the pieces of cell i in order. Sub-intervals are split at branch
/// boundaries so each piece lies in a single branch.
void for_each_ulam_piece(const MapModel& map, const Grid& grid, std::size_t cell,
                         std::size_t quadrature, const std::function<void(const UlamPiece&)>& visit);

/// Cell-averaged boundary-folding convolution with a step kernel, computed
/// exactly from the kernel CDF. Columns sum to the kernel mass.
TransferMatrix convolution_matrix(const NoiseKernel& kernel, const Grid& grid, BoundaryMode mode);

/// a * b (apply b first).
TransferMatrix multiply(const TransferMatrix& a, const TransferMatrix& b);

/// (1 - weight) a + weight b.
TransferMatrix mix(const TransferMatrix& a, const TransferMatrix& b, double weight);

/// convolution_matrix(kernel) * ulam_matrix(map).
TransferMatrix annealed_operator(const MapModel& map, const NoiseKernel& kernel, const Grid& grid,
                                 BoundaryMode mode, std::size_t quadrature = kDefaultQuadrature,
                                 UlamScheme scheme = UlamScheme::Interpolated);

/// Applies P to a measure. An atom (x, w) contributes w times the columns of
/// the two cells whose centres bracket x, linearly interpolated.
GridDensity apply(const TransferMatrix& p, const SignedMeasure& m);

/// rho convolved with m and folded, exactly: the grid part through the
/// convolution matrix, each atom as a folded, cell-averaged kernel translate.
GridDensity convolve(const NoiseKernel& kernel, const SignedMeasure& m, BoundaryMode mode);

struct QuadratureReport {
    std::size_t quadrature;
    /// max over columns of the L1 distance between the K and 2K matrices.
    double max_column_difference;
};

QuadratureReport quadrature_difference(const MapModel& map, const Grid& grid,
                                       std::size_t quadrature,
                                       UlamScheme scheme = UlamScheme::Interpolated);

}  // namespace noisy

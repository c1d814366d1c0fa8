#include "noisy/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "noisy/errors.hpp"
#include "noisy/format.hpp"
#include "noisy/parallel.hpp"

namespace noisy {

const char* to_string(BoundaryMode mode) noexcept {
    return mode == BoundaryMode::Reflecting ? "reflecting" : "periodic";
}

const char* to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::Deterministic: return "deterministic";
        case Provenance::Convolution: return "convolution";
        case Provenance::Annealed: return "annealed";
        case Provenance::Mixture: return "mixture";
    }
    return "?";
}

double reflect(double x) noexcept {
    double r = std::fmod(std::abs(x), 2.0);
    return r <= 1.0 ? r : 2.0 - r;
}

double wrap(double x) noexcept {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

std::size_t fold_cell(std::int64_t k, std::size_t n, BoundaryMode mode) noexcept {
    const auto nn = static_cast<std::int64_t>(n);
    if (mode == BoundaryMode::Periodic) return static_cast<std::size_t>(((k % nn) + nn) % nn);
    const std::int64_t period = 2 * nn;
    const std::int64_t r = ((k % period) + period) % period;
    return static_cast<std::size_t>(r < nn ? r : period - 1 - r);
}

namespace {

// Dense scratch accumulator for building one column at a time.
class ColumnAccumulator {
public:
    explicit ColumnAccumulator(std::size_t n) : values_(n, 0.0), seen_(n, 0) {}

    void add(std::size_t row, double w) {
        if (!seen_[row]) {
            seen_[row] = 1;
            touched_.push_back(static_cast<std::uint32_t>(row));
        }
        values_[row] += w;
    }

    std::vector<TransferMatrix::Entry> take() {
        std::sort(touched_.begin(), touched_.end());
        std::vector<TransferMatrix::Entry> out;
        out.reserve(touched_.size());
        for (auto r : touched_) {
            if (values_[r] != 0.0) out.push_back({r, values_[r]});
            values_[r] = 0.0;
            seen_[r] = 0;
        }
        touched_.clear();
        return out;
    }

private:
    std::vector<double> values_;
    std::vector<char> seen_;
    std::vector<std::uint32_t> touched_;
};

}  // namespace

TransferMatrix::TransferMatrix(Grid grid, BoundaryMode mode, Provenance provenance,
                               std::vector<std::vector<Entry>> columns)
    : grid_(grid), mode_(mode), provenance_(provenance) {
    const std::size_t n = grid_.size();
    if (columns.size() != n)
        throw std::invalid_argument("TransferMatrix: need one column per cell");
    start_.reserve(n + 1);
    start_.push_back(0);
    for (auto& col : columns) {
        std::sort(col.begin(), col.end(), [](const Entry& a, const Entry& b) { return a.row < b.row; });
        const std::size_t first = entries_.size();
        for (const Entry& e : col) {
            if (e.row >= n) throw std::invalid_argument("TransferMatrix: row index out of range");
            if (entries_.size() > first && entries_.back().row == e.row)
                entries_.back().weight += e.weight;
            else
                entries_.push_back(e);
        }
        auto tail = std::remove_if(entries_.begin() + static_cast<std::ptrdiff_t>(first), entries_.end(),
                                   [](const Entry& e) { return e.weight == 0.0; });
        entries_.erase(tail, entries_.end());
        start_.push_back(entries_.size());
    }
}

std::vector<double> TransferMatrix::column_sums() const {
    std::vector<double> sums(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
        std::vector<double> w;
        for (const Entry& e : column(i)) w.push_back(e.weight);
        sums[i] = compensated_sum(w);
    }
    return sums;
}

double TransferMatrix::min_entry() const noexcept {
    double m = 0.0;
    for (const Entry& e : entries_) m = std::min(m, e.weight);
    return m;
}

void TransferMatrix::apply(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = size();
    if (in.size() != n || out.size() != n)
        throw std::invalid_argument("TransferMatrix::apply: size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = in[i];
        if (x == 0.0) continue;
        for (const Entry& e : column(i)) out[e.row] += e.weight * x;
    }
}

GridDensity TransferMatrix::apply(const GridDensity& f) const {
    if (!(f.grid() == grid_)) throw std::invalid_argument("TransferMatrix::apply: grid mismatch");
    GridDensity out(grid_);
    apply(f.values(), out.values());
    return out;
}

void TransferMatrix::apply_block(std::span<const double> in, std::span<double> out,
                                 std::size_t block) const {
    const std::size_t n = size();
    if (in.size() != n * block || out.size() != n * block)
        throw std::invalid_argument("TransferMatrix::apply_block: size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = in.data() + i * block;
        for (const Entry& e : column(i)) {
            double* y = out.data() + static_cast<std::size_t>(e.row) * block;
            const double w = e.weight;
            for (std::size_t b = 0; b < block; ++b) y[b] += w * x[b];
        }
    }
}

std::vector<double> TransferMatrix::dense() const {
    const std::size_t n = size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (const Entry& e : column(i)) d[static_cast<std::size_t>(e.row) * n + i] = e.weight;
    return d;
}

void TransferMatrix::write_triplets(std::ostream& os) const {
    os << "row,col,weight\n";
    for (std::size_t i = 0; i < size(); ++i)
        for (const Entry& e : column(i)) os << e.row << ',' << i << ',' << format_double(e.weight) << '\n';
}

namespace {

constexpr double kRangeTolerance = 1e-12;

double checked_image(const MapModel& map, double x, double y) {
    if (!(y >= -kRangeTolerance && y <= 1.0 + kRangeTolerance)) throw MapRangeError(map.label(), x, y);
    return std::clamp(y, 0.0, 1.0);
}

// Spreads `mass` uniformly over [lo, hi] into the cells it meets.
void deposit(const Grid& grid, double lo, double hi, double mass, ColumnAccumulator& acc) {
    const std::size_t j0 = grid.cell_of(lo);
    std::size_t j1 = grid.cell_of(hi);
    if (j1 > j0 && grid.boundary(j1) >= hi) --j1;
    const double len = hi - lo;
    if (j1 == j0 || !(len > 0.0)) {
        acc.add(j0, mass);
        return;
    }
    for (std::size_t j = j0; j <= j1; ++j) {
        const double overlap = std::min(hi, grid.boundary(j + 1)) - std::max(lo, grid.boundary(j));
        if (overlap > 0.0) acc.add(j, mass * (overlap / len));
    }
}

void ulam_column_interpolated(const MapModel& map, const Grid& grid, std::size_t i, std::size_t K,
                              ColumnAccumulator& acc) {
    for_each_ulam_piece(map, grid, i, K, [&](const UlamPiece& piece) {
        deposit(grid, std::min(piece.p, piece.q), std::max(piece.p, piece.q), piece.fraction, acc);
    });
}

void ulam_column_midpoint(const MapModel& map, const Grid& grid, std::size_t i, std::size_t K,
                          ColumnAccumulator& acc) {
    const double n = static_cast<double>(grid.size());
    const double w = 1.0 / static_cast<double>(K);
    for (std::size_t s = 0; s < K; ++s) {
        const double x = (static_cast<double>(i) + (static_cast<double>(s) + 0.5) * w) / n;
        const double y = checked_image(map, x, map(x));
        acc.add(grid.cell_of(y), w);
    }
}

}  // namespace

void for_each_ulam_piece(const MapModel& map, const Grid& grid, std::size_t cell,
                         std::size_t quadrature, const std::function<void(const UlamPiece&)>& visit) {
    const double n = static_cast<double>(grid.size());
    const double K = static_cast<double>(quadrature);
    const double cell_hi = grid.boundary(cell + 1);
    const auto& branches = map.branches();
    for (std::size_t s = 0; s < quadrature; ++s) {
        const double u = (static_cast<double>(cell) + static_cast<double>(s) / K) / n;
        const double v = s + 1 == quadrature ? cell_hi : (static_cast<double>(cell) + static_cast<double>(s + 1) / K) / n;
        // Each piece uses its own branch formula at both ends, so branch
        // discontinuities never produce a spurious long image.
        double a = u;
        std::size_t b = map.branch_index(a);
        while (a < v && b < branches.size()) {
            const double end = std::min(v, branches[b].hi);
            const double p = checked_image(map, a, branches[b].value(a));
            const double q = checked_image(map, end, branches[b].value(end));
            visit(UlamPiece{cell, a, end, p, q, (end - a) * n});
            a = end;
            ++b;
        }
    }
}

TransferMatrix ulam_matrix(const MapModel& map, const Grid& grid, std::size_t quadrature,
                           UlamScheme scheme) {
    if (quadrature < 1) throw std::invalid_argument("quadrature K must be >= 1");
    const std::size_t n = grid.size();
    std::vector<std::vector<TransferMatrix::Entry>> columns(n);
    parallel::for_chunks(n, [&](std::size_t begin, std::size_t end) {
        ColumnAccumulator acc(n);
        for (std::size_t i = begin; i < end; ++i) {
            if (scheme == UlamScheme::Interpolated)
                ulam_column_interpolated(map, grid, i, quadrature, acc);
            else
                ulam_column_midpoint(map, grid, i, quadrature, acc);
            columns[i] = acc.take();
        }
    });
    return TransferMatrix(grid, BoundaryMode::Reflecting, Provenance::Deterministic, std::move(columns));
}

namespace {

// Unfolded column profile of the convolution: mass of rho * (uniform on cell i)
// in line cell i + d, for d in [first, first + mass.size()). Translation
// invariant, so one profile serves every column.
struct ConvolutionProfile {
    std::int64_t first;
    std::vector<double> mass;
};

ConvolutionProfile convolution_profile(const NoiseKernel& kernel, const Grid& grid) {
    const double n = static_cast<double>(grid.size());
    const auto [lo, hi] = kernel.support();
    const auto d_lo = static_cast<std::int64_t>(std::floor(lo * n)) - 1;
    const auto d_hi = static_cast<std::int64_t>(std::ceil(hi * n)) + 2;
    // Phi[d] = P(X + Z <= (i + d)/n) = n * integral of R over [(d-1)/n, d/n].
    std::vector<double> phi;
    phi.reserve(static_cast<std::size_t>(d_hi - d_lo + 1));
    for (std::int64_t d = d_lo; d <= d_hi; ++d)
        phi.push_back(n * kernel.integrated_cdf(static_cast<double>(d - 1) / n, static_cast<double>(d) / n));
    ConvolutionProfile prof{d_lo, std::vector<double>(phi.size() - 1)};
    const bool probability = kernel.is_probability();
    for (std::size_t k = 0; k + 1 < phi.size(); ++k) {
        double m = phi[k + 1] - phi[k];
        // A non-negative kernel gives non-negative masses; anything below zero
        // is cancellation in the CDF difference.
        if (probability && m < 0.0) m = 0.0;
        prof.mass[k] = m;
    }
    return prof;
}

}  // namespace

TransferMatrix convolution_matrix(const NoiseKernel& kernel, const Grid& grid, BoundaryMode mode) {
    const std::size_t n = grid.size();
    const ConvolutionProfile prof = convolution_profile(kernel, grid);
    std::vector<std::vector<TransferMatrix::Entry>> columns(n);
    parallel::for_chunks(n, [&](std::size_t begin, std::size_t end) {
        ColumnAccumulator acc(n);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t k = 0; k < prof.mass.size(); ++k) {
                if (prof.mass[k] == 0.0) continue;
                const std::int64_t line_cell = static_cast<std::int64_t>(i) + prof.first + static_cast<std::int64_t>(k);
                acc.add(fold_cell(line_cell, n, mode), prof.mass[k]);
            }
            columns[i] = acc.take();
        }
    });
    return TransferMatrix(grid, mode, Provenance::Convolution, std::move(columns));
}

TransferMatrix multiply(const TransferMatrix& a, const TransferMatrix& b) {
    if (!(a.grid() == b.grid())) throw std::invalid_argument("multiply: grid mismatch");
    const std::size_t n = a.size();
    std::vector<std::vector<TransferMatrix::Entry>> columns(n);
    parallel::for_chunks(n, [&](std::size_t begin, std::size_t end) {
        ColumnAccumulator acc(n);
        for (std::size_t i = begin; i < end; ++i) {
            for (const auto& eb : b.column(i))
                for (const auto& ea : a.column(eb.row)) acc.add(ea.row, ea.weight * eb.weight);
            columns[i] = acc.take();
        }
    });
    const Provenance prov =
        (a.provenance() == Provenance::Convolution && b.provenance() == Provenance::Deterministic)
            ? Provenance::Annealed
            : a.provenance();
    return TransferMatrix(a.grid(), a.mode(), prov, std::move(columns));
}

TransferMatrix mix(const TransferMatrix& a, const TransferMatrix& b, double weight) {
    if (!(a.grid() == b.grid())) throw std::invalid_argument("mix: grid mismatch");
    const std::size_t n = a.size();
    std::vector<std::vector<TransferMatrix::Entry>> columns(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& col = columns[i];
        for (const auto& e : a.column(i)) col.push_back({e.row, (1.0 - weight) * e.weight});
        for (const auto& e : b.column(i)) col.push_back({e.row, weight * e.weight});
    }
    return TransferMatrix(a.grid(), a.mode(), Provenance::Mixture, std::move(columns));
}

TransferMatrix annealed_operator(const MapModel& map, const NoiseKernel& kernel, const Grid& grid,
                                 BoundaryMode mode, std::size_t quadrature, UlamScheme scheme) {
    return multiply(convolution_matrix(kernel, grid, mode), ulam_matrix(map, grid, quadrature, scheme));
}

GridDensity apply(const TransferMatrix& p, const SignedMeasure& m) {
    GridDensity out = p.apply(m.density());
    const std::size_t n = p.size();
    const double nd = static_cast<double>(n);
    auto add_column = [&](std::size_t i, double w) {
        for (const auto& e : p.column(i)) out[e.row] += w * e.weight;
    };
    for (const Atom& a : m.atoms()) {
        const double t = a.position * nd - 0.5;
        const double w = a.weight * nd;
        if (t <= 0.0) {
            add_column(0, w);
        } else if (t >= nd - 1.0) {
            add_column(n - 1, w);
        } else {
            const auto j = static_cast<std::size_t>(t);
            const double lambda = t - static_cast<double>(j);
            add_column(j, w * (1.0 - lambda));
            if (lambda > 0.0) add_column(j + 1, w * lambda);
        }
    }
    return out;
}

GridDensity convolve(const NoiseKernel& kernel, const SignedMeasure& m, BoundaryMode mode) {
    const Grid& grid = m.grid();
    GridDensity out = convolution_matrix(kernel, grid, mode).apply(m.density());
    const std::size_t n = grid.size();
    const double nd = static_cast<double>(n);
    const auto [lo, hi] = kernel.support();
    for (const Atom& a : m.atoms()) {
        const auto k_lo = static_cast<std::int64_t>(std::floor((a.position + lo) * nd)) - 1;
        const auto k_hi = static_cast<std::int64_t>(std::ceil((a.position + hi) * nd)) + 1;
        double prev = kernel.cdf(static_cast<double>(k_lo) / nd - a.position);
        for (std::int64_t k = k_lo; k < k_hi; ++k) {
            const double next = kernel.cdf(static_cast<double>(k + 1) / nd - a.position);
            const double cell_mass = next - prev;
            prev = next;
            if (cell_mass != 0.0) out[fold_cell(k, n, mode)] += a.weight * cell_mass * nd;
        }
    }
    return out;
}

QuadratureReport quadrature_difference(const MapModel& map, const Grid& grid, std::size_t quadrature,
                                       UlamScheme scheme) {
    const TransferMatrix coarse = ulam_matrix(map, grid, quadrature, scheme);
    const TransferMatrix fine = ulam_matrix(map, grid, 2 * quadrature, scheme);
    double worst = 0.0;
    std::vector<double> diff(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (const auto& e : coarse.column(i)) diff[e.row] += e.weight;
        for (const auto& e : fine.column(i)) diff[e.row] -= e.weight;
        double col = 0.0;
        for (const auto& e : coarse.column(i)) {
            col += std::abs(diff[e.row]);
            diff[e.row] = 0.0;
        }
        for (const auto& e : fine.column(i)) {
            col += std::abs(diff[e.row]);
            diff[e.row] = 0.0;
        }
        worst = std::max(worst, col);
    }
    return {quadrature, worst};
}

}  // namespace noisy

#include "noisy/measures.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "noisy/errors.hpp"
#include "noisy/format.hpp"

namespace noisy {

Grid::Grid(std::size_t n) : n_(n) {
    if (n < 2) throw std::invalid_argument("grid.n must be >= 2, got " + std::to_string(n));
}

std::size_t Grid::cell_of(double x) const noexcept {
    if (!(x > 0.0)) return 0;
    auto k = static_cast<std::size_t>(x * static_cast<double>(n_));
    return std::min(k, n_ - 1);
}

GridDensity::GridDensity(Grid grid) : grid_(grid), values_(grid.size(), 0.0) {}

GridDensity::GridDensity(Grid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
        throw std::invalid_argument("GridDensity: value count " + std::to_string(values_.size()) +
                                    " does not match grid size " + std::to_string(grid_.size()));
}

GridDensity GridDensity::uniform(Grid grid) {
    return GridDensity(grid, std::vector<double>(grid.size(), 1.0));
}

double GridDensity::mass() const { return compensated_sum(values_) * grid_.width(); }

GridDensity& GridDensity::operator+=(const GridDensity& other) {
    if (!(grid_ == other.grid_)) throw std::invalid_argument("GridDensity: grid mismatch in +=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
}

GridDensity& GridDensity::operator-=(const GridDensity& other) {
    if (!(grid_ == other.grid_)) throw std::invalid_argument("GridDensity: grid mismatch in -=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
}

GridDensity& GridDensity::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

SignedMeasure::SignedMeasure(GridDensity density, std::vector<Atom> atoms)
    : density_(std::move(density)) {
    for (const Atom& a : atoms) {
        if (!(a.position >= 0.0 && a.position <= 1.0) || !std::isfinite(a.weight))
            throw std::invalid_argument("SignedMeasure: atom at " + format_double(a.position) +
                                        " outside [0,1] or with non-finite weight");
    }
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.position < b.position; });
    for (const Atom& a : atoms) {
        if (!atoms_.empty() && atoms_.back().position == a.position)
            atoms_.back().weight += a.weight;
        else
            atoms_.push_back(a);
    }
    std::erase_if(atoms_, [](const Atom& a) { return a.weight == 0.0; });
}

SignedMeasure SignedMeasure::atoms_only(Grid grid, std::vector<Atom> atoms) {
    return SignedMeasure(GridDensity::zero(grid), std::move(atoms));
}

SignedMeasure& SignedMeasure::operator*=(double s) {
    density_ *= s;
    for (Atom& a : atoms_) a.weight *= s;
    if (s == 0.0) atoms_.clear();
    return *this;
}

const char* to_string(NormKind kind) noexcept {
    switch (kind) {
        case NormKind::L1: return "L1";
        case NormKind::BV: return "BV";
        case NormKind::Wasserstein: return "W";
    }
    return "?";
}

double compensated_sum(std::span<const double> xs) noexcept {
    double sum = 0.0;
    double carry = 0.0;
    for (double x : xs) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            carry += (sum - t) + x;
        else
            carry += (x - t) + sum;
        sum = t;
    }
    return sum + carry;
}

double total_mass(const SignedMeasure& m) {
    std::vector<double> parts;
    parts.reserve(m.atoms().size() + 1);
    parts.push_back(m.density().mass());
    for (const Atom& a : m.atoms()) parts.push_back(a.weight);
    return compensated_sum(parts);
}

double l1_norm(const GridDensity& f) {
    double s = 0.0;
    for (double v : f.values()) s += std::abs(v);
    return s * f.grid().width();
}

double bv_variation(const GridDensity& f) {
    auto v = f.values();
    double s = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) s += std::abs(v[k] - v[k - 1]);
    return s;
}

double extended_variation(const GridDensity& f) {
    auto v = f.values();
    return bv_variation(f) + std::abs(v.front()) + std::abs(v.back());
}

double bv_norm(const GridDensity& f) { return l1_norm(f) + extended_variation(f); }

namespace {

// Integral over a segment of length len of |F| where F is linear from a to b.
double integrate_abs_linear(double a, double b, double len) {
    if (len <= 0.0) return 0.0;
    if ((a >= 0.0 && b >= 0.0) || (a <= 0.0 && b <= 0.0))
        return 0.5 * len * (std::abs(a) + std::abs(b));
    return 0.5 * len * (a * a + b * b) / (std::abs(a) + std::abs(b));
}

}  // namespace

double wasserstein_norm(const SignedMeasure& m) {
    const double mass = total_mass(m);
    if (!(std::abs(mass) <= kZeroMassGate)) throw NonZeroMass("wasserstein_norm", mass);

    const Grid& grid = m.grid();
    auto v = m.density().values();
    auto atoms = m.atoms();
    std::size_t next_atom = 0;
    double F = 0.0;
    double integral = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double right = grid.boundary(k + 1);
        double pos = grid.boundary(k);
        while (next_atom < atoms.size() && atoms[next_atom].position < right) {
            const double p = std::max(atoms[next_atom].position, pos);
            const double F_end = F + v[k] * (p - pos);
            integral += integrate_abs_linear(F, F_end, p - pos);
            F = F_end + atoms[next_atom].weight;
            pos = p;
            ++next_atom;
        }
        const double F_end = F + v[k] * (right - pos);
        integral += integrate_abs_linear(F, F_end, right - pos);
        F = F_end;
    }
    return integral;
}

double wasserstein_norm(const GridDensity& f) { return wasserstein_norm(SignedMeasure(f)); }

double norm(NormKind kind, const GridDensity& f) {
    switch (kind) {
        case NormKind::L1: return l1_norm(f);
        case NormKind::BV: return bv_norm(f);
        case NormKind::Wasserstein: return wasserstein_norm(f);
    }
    throw std::invalid_argument("norm: unknown kind");
}

std::vector<double> cdf(const SignedMeasure& m) {
    const Grid& grid = m.grid();
    const double h = grid.width();
    auto v = m.density().values();
    auto atoms = m.atoms();
    std::vector<double> F(grid.size() + 1, 0.0);
    std::size_t next_atom = 0;
    double running = 0.0;
    while (next_atom < atoms.size() && atoms[next_atom].position <= 0.0)
        running += atoms[next_atom++].weight;
    F[0] = running;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        running += v[k] * h;
        const double right = grid.boundary(k + 1);
        while (next_atom < atoms.size() && atoms[next_atom].position <= right)
            running += atoms[next_atom++].weight;
        F[k + 1] = running;
    }
    return F;
}

GridDensity project_zero_average(const GridDensity& f) {
    GridDensity out = f;
    // Second pass removes the rounding left by the first.
    for (int pass = 0; pass < 2; ++pass) {
        const double mass = out.mass();
        for (double& v : out.values()) v -= mass;
    }
    return out;
}

SignedMeasure project_zero_average(const SignedMeasure& m) {
    GridDensity density = m.density();
    std::vector<Atom> atoms(m.atoms().begin(), m.atoms().end());
    for (int pass = 0; pass < 2; ++pass) {
        const double mass = total_mass(SignedMeasure(density, atoms));
        for (double& v : density.values()) v -= mass;
    }
    return SignedMeasure(std::move(density), std::move(atoms));
}

GridDensity refine(const GridDensity& f, std::size_t factor) {
    if (factor == 0) throw std::invalid_argument("refine: factor must be positive");
    Grid fine(f.size() * factor);
    std::vector<double> values(fine.size());
    for (std::size_t k = 0; k < fine.size(); ++k) values[k] = f[k / factor];
    return GridDensity(fine, std::move(values));
}

GridDensity coarsen(const GridDensity& f, std::size_t factor) {
    if (factor == 0 || f.size() % factor != 0)
        throw std::invalid_argument("coarsen: factor must divide the grid size");
    Grid coarse(f.size() / factor);
    std::vector<double> values(coarse.size(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) values[k / factor] += f[k];
    for (double& v : values) v /= static_cast<double>(factor);
    return GridDensity(coarse, std::move(values));
}

void write_csv(std::ostream& os, const SignedMeasure& m) {
    const Grid& grid = m.grid();
    os << "x_left,x_right,density\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        os << format_double(grid.boundary(k)) << ',' << format_double(grid.boundary(k + 1)) << ','
           << format_double(m.density()[k]) << '\n';
    }
    os << "atom_pos,atom_weight\n";
    for (const Atom& a : m.atoms())
        os << format_double(a.position) << ',' << format_double(a.weight) << '\n';
}

void write_csv(std::ostream& os, const GridDensity& f) { write_csv(os, SignedMeasure(f)); }

SignedMeasure read_measure_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("x_left,x_right,density", 0) != 0)
        throw std::invalid_argument("measure csv: missing header 'x_left,x_right,density'");

    std::vector<double> values;
    std::vector<std::pair<double, double>> cells;
    std::vector<Atom> atoms;
    bool in_atoms = false;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("atom_pos,atom_weight", 0) == 0) {
            in_atoms = true;
            continue;
        }
        auto fields = split_csv_line(line);
        try {
            if (!in_atoms) {
                if (fields.size() != 3) throw std::invalid_argument("expected 3 fields");
                const double left = parse_double(fields[0]);
                const double right = parse_double(fields[1]);
                if (!(right > left)) throw std::invalid_argument("x_right must exceed x_left");
                cells.emplace_back(left, right);
                values.push_back(parse_double(fields[2]));
            } else {
                if (fields.size() != 2) throw std::invalid_argument("expected 2 fields");
                atoms.push_back({parse_double(fields[0]), parse_double(fields[1])});
            }
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("measure csv line " + std::to_string(line_no) + ": " +
                                        e.what());
        }
    }
    if (values.size() < 2) throw std::invalid_argument("measure csv: need at least two cells");
    Grid grid(values.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (std::abs(cells[k].first - grid.boundary(k)) > 1e-12 ||
            std::abs(cells[k].second - grid.boundary(k + 1)) > 1e-12)
            throw std::invalid_argument("measure csv: row " + std::to_string(k + 1) +
                                        " is not cell [" + format_double(grid.boundary(k)) + ", " +
                                        format_double(grid.boundary(k + 1)) + "] of a uniform grid");
    }
    for (const Atom& a : atoms)
        if (!(a.position >= 0.0 && a.position <= 1.0))
            throw std::invalid_argument("measure csv: atom position " + format_double(a.position) +
                                        " outside [0,1]");
    return SignedMeasure(GridDensity(grid, std::move(values)), std::move(atoms));
}

}  // namespace noisy

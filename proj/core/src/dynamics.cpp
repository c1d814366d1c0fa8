#include "noisy/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "noisy/errors.hpp"
#include "noisy/format.hpp"

namespace noisy {

MapModel::MapModel(std::string label, std::vector<MapBranch> branches,
                   std::vector<double> critical_points)
    : label_(std::move(label)),
      branches_(std::move(branches)),
      critical_points_(std::move(critical_points)) {
    if (branches_.empty()) throw std::invalid_argument("map '" + label_ + "' has no branches");
    if (branches_.front().lo != 0.0 || branches_.back().hi != 1.0)
        throw std::invalid_argument("map '" + label_ + "': branch domains must cover [0,1]");
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        if (!(branches_[i].hi > branches_[i].lo))
            throw std::invalid_argument("map '" + label_ + "': empty branch domain");
        if (i > 0 && branches_[i].lo != branches_[i - 1].hi)
            throw std::invalid_argument("map '" + label_ + "': branch domains must be contiguous");
    }
}

std::size_t MapModel::branch_index(double x) const noexcept {
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const MapBranch& b) { return v < b.lo; });
    if (it == branches_.begin()) return 0;
    return static_cast<std::size_t>(it - branches_.begin()) - 1;
}

double MapModel::operator()(double x) const { return branches_[branch_index(x)].value(x); }

double MapModel::derivative(double x) const { return branches_[branch_index(x)].slope(x); }

BzConstants bz_constants() {
    const double cbrt75 = std::cbrt(7.0 / 5.0);
    BzConstants k{};
    k.a = 19.0 / 42.0 * cbrt75;
    k.b = 0.02328852830307032054478158044023918735669943648088852646123182739831022528;
    k.c = 20.0 / (std::pow(3.0, 20) * 7.0) * cbrt75 * std::exp(187.0 / 10.0);
    return k;
}

MapModel make_bz_map() {
    const BzConstants k = bz_constants();
    const double a = k.a;
    const double b = k.b;
    const double c = k.c;

    MapBranch left{
        0.0, 0.3,
        [a, b](double x) { return (a + std::cbrt(x - 0.125)) * std::exp(-x) + b; },
        [a](double x) {
            const double u = x - 0.125;
            if (u == 0.0) return std::numeric_limits<double>::infinity();
            const double e = std::exp(-x);
            return e / (3.0 * std::cbrt(u * u)) - (a + std::cbrt(u)) * e;
        },
        Monotonicity::Increasing};
    MapBranch right{
        0.3, 1.0,
        [b, c](double x) {
            const double u = 10.0 * x * std::exp(-10.0 * x / 3.0);
            return c * std::pow(u, 19) + b;
        },
        [c](double x) {
            const double e = std::exp(-10.0 * x / 3.0);
            const double u = 10.0 * x * e;
            return 19.0 * c * std::pow(u, 18) * 10.0 * e * (1.0 - 10.0 * x / 3.0);
        },
        Monotonicity::Decreasing};
    return MapModel("bz", {std::move(left), std::move(right)}, {0.125, 0.3});
}

MapModel make_standard_map(StandardMap kind, double theta) {
    switch (kind) {
        case StandardMap::Identity:
            return MapModel("identity", {MapBranch{0.0, 1.0, [](double x) { return x; },
                                                   [](double) { return 1.0; },
                                                   Monotonicity::Increasing}});
        case StandardMap::Doubling:
            return MapModel(
                "doubling",
                {MapBranch{0.0, 0.5, [](double x) { return 2.0 * x; }, [](double) { return 2.0; },
                           Monotonicity::Increasing},
                 MapBranch{0.5, 1.0, [](double x) { return 2.0 * x - 1.0; },
                           [](double) { return 2.0; }, Monotonicity::Increasing}});
        case StandardMap::Tent:
            return MapModel(
                "tent",
                {MapBranch{0.0, 0.5, [](double x) { return 2.0 * x; }, [](double) { return 2.0; },
                           Monotonicity::Increasing},
                 MapBranch{0.5, 1.0, [](double x) { return 2.0 - 2.0 * x; },
                           [](double) { return -2.0; }, Monotonicity::Decreasing}},
                {0.5});
        case StandardMap::Rotation: {
            if (!(theta >= 0.0 && theta < 1.0))
                throw std::invalid_argument("map.theta must lie in [0,1), got " +
                                            format_double(theta));
            const std::string label = "rotation(" + format_double(theta) + ")";
            if (theta == 0.0)
                return MapModel(label, {MapBranch{0.0, 1.0, [](double x) { return x; },
                                                  [](double) { return 1.0; },
                                                  Monotonicity::Increasing}});
            const double cut = 1.0 - theta;
            return MapModel(
                label,
                {MapBranch{0.0, cut, [theta](double x) { return x + theta; },
                           [](double) { return 1.0; }, Monotonicity::Increasing},
                 MapBranch{cut, 1.0, [theta](double x) { return x + theta - 1.0; },
                           [](double) { return 1.0; }, Monotonicity::Increasing}});
        }
    }
    throw std::invalid_argument("make_standard_map: unknown kind");
}

PerturbationS::PerturbationS(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const Node& n = nodes_[k];
        if (!(n.t >= 0.0 && n.t <= 1.0) || !std::isfinite(n.s))
            throw std::invalid_argument("perturbation node t=" + format_double(n.t) +
                                        " must lie in [0,1] with finite s");
        if (k > 0 && !(n.t > nodes_[k - 1].t))
            throw std::invalid_argument("perturbation nodes must have strictly increasing t");
    }
}

PerturbationS PerturbationS::zero() { return PerturbationS({{0.0, 0.0}, {1.0, 0.0}}); }

PerturbationS PerturbationS::tent_bump(double center, double half_width, double height) {
    const double lo = center - half_width;
    const double hi = center + half_width;
    if (!(half_width > 0.0) || lo < 0.0 || hi > 1.0)
        throw std::invalid_argument("tent_bump: [center - half_width, center + half_width] must lie in [0,1]");
    std::vector<Node> nodes;
    if (lo > 0.0) nodes.push_back({0.0, 0.0});
    nodes.push_back({lo, 0.0});
    nodes.push_back({center, height});
    nodes.push_back({hi, 0.0});
    if (hi < 1.0) nodes.push_back({1.0, 0.0});
    return PerturbationS(std::move(nodes));
}

double PerturbationS::operator()(double t) const noexcept {
    if (nodes_.empty() || t < nodes_.front().t || t > nodes_.back().t) return 0.0;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                               [](double v, const Node& n) { return v < n.t; });
    if (it == nodes_.end()) return nodes_.back().s;
    const Node& hi = *it;
    const Node& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return lo.s + w * (hi.s - lo.s);
}

double PerturbationS::slope(double t) const noexcept {
    if (nodes_.size() < 2 || t < nodes_.front().t || t >= nodes_.back().t) return 0.0;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                               [](double v, const Node& n) { return v < n.t; });
    const Node& hi = *it;
    const Node& lo = *(it - 1);
    return (hi.s - lo.s) / (hi.t - lo.t);
}

double PerturbationS::lipschitz() const noexcept {
    double lip = 0.0;
    for (std::size_t k = 1; k < nodes_.size(); ++k)
        lip = std::max(lip, std::abs(nodes_[k].s - nodes_[k - 1].s) / (nodes_[k].t - nodes_[k - 1].t));
    return lip;
}

double PerturbationS::sup_abs() const noexcept {
    double m = 0.0;
    for (const Node& n : nodes_) m = std::max(m, std::abs(n.s));
    return m;
}

std::vector<std::pair<double, double>> PerturbationS::support() const {
    std::vector<std::pair<double, double>> out;
    auto add = [&](double lo, double hi) {
        if (!out.empty() && out.back().second >= lo)
            out.back().second = std::max(out.back().second, hi);
        else
            out.emplace_back(lo, hi);
    };
    if (nodes_.size() == 1 && nodes_[0].s != 0.0) add(nodes_[0].t, nodes_[0].t);
    for (std::size_t k = 1; k < nodes_.size(); ++k)
        if (nodes_[k - 1].s != 0.0 || nodes_[k].s != 0.0) add(nodes_[k - 1].t, nodes_[k].t);
    return out;
}

bool PerturbationS::is_zero() const noexcept {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.s == 0.0; });
}

PerturbationDiagnostics validate_perturbation(const PerturbationS& s) {
    PerturbationDiagnostics d;
    d.lipschitz = s.lipschitz();
    d.value_at_zero = s(0.0);
    d.value_at_one = s(1.0);
    d.support = s.support();
    const auto& nodes = s.nodes();
    if (!nodes.empty() && (nodes.front().t != 0.0 || nodes.back().t != 1.0)) {
        d.violations.push_back("nodes must span [0,1] (first t = 0, last t = 1)");
    }
    if (d.value_at_zero != 0.0) d.violations.push_back("S(0) must be 0, got " + format_double(d.value_at_zero));
    if (d.value_at_one != 0.0) d.violations.push_back("S(1) must be 0, got " + format_double(d.value_at_one));
    if (d.lipschitz > 1.0)
        d.violations.push_back("Lip(S) must be <= 1, got " + format_double(d.lipschitz));
    d.valid = d.violations.empty();
    return d;
}

MapModel perturb_map(const MapModel& map, const PerturbationS& s, double delta) {
    const double lip = s.lipschitz();
    if (!(std::abs(delta) * lip < 1.0)) throw NotBijective(delta, lip);

    auto shape = std::make_shared<const PerturbationS>(s);
    std::vector<MapBranch> branches;
    branches.reserve(map.branches().size());
    for (const MapBranch& b : map.branches()) {
        MapBranch pb{
            b.lo, b.hi,
            [value = b.value, shape, delta](double x) {
                const double y = value(x);
                return y + delta * (*shape)(y);
            },
            [value = b.value, slope = b.slope, shape, delta](double x) {
                return slope(x) * (1.0 + delta * shape->slope(value(x)));
            },
            b.monotonicity};
        branches.push_back(std::move(pb));
    }
    return MapModel(map.label() + "+" + format_double(delta) + "S", std::move(branches),
                    map.critical_points());
}

NoiseKernel::NoiseKernel(std::string label, std::vector<double> breakpoints,
                         std::vector<double> values, std::vector<Atom> atoms)
    : label_(std::move(label)),
      breakpoints_(std::move(breakpoints)),
      values_(std::move(values)),
      atoms_(std::move(atoms)) {
    if (breakpoints_.size() != values_.size() + 1 || values_.empty())
        throw std::invalid_argument("kernel '" + label_ + "': need values.size() + 1 breakpoints");
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
        if (!(breakpoints_[k] >= -1.0 && breakpoints_[k] <= 1.0))
            throw std::invalid_argument("kernel '" + label_ + "': support must lie in [-1,1]");
        if (k > 0 && !(breakpoints_[k] > breakpoints_[k - 1]))
            throw std::invalid_argument("kernel '" + label_ + "': breakpoints must increase");
    }
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("kernel '" + label_ + "': non-finite value");
    for (const Atom& a : atoms_)
        if (!(a.position >= -1.0 && a.position <= 1.0) || !std::isfinite(a.weight))
            throw std::invalid_argument("kernel '" + label_ + "': atom outside [-1,1]");
    std::sort(atoms_.begin(), atoms_.end(),
              [](const Atom& x, const Atom& y) { return x.position < y.position; });

    cumulative_.resize(breakpoints_.size(), 0.0);
    for (std::size_t k = 0; k < values_.size(); ++k)
        cumulative_[k + 1] = cumulative_[k] + values_[k] * (breakpoints_[k + 1] - breakpoints_[k]);
}

double NoiseKernel::mass() const noexcept {
    double m = cumulative_.back();
    for (const Atom& a : atoms_) m += a.weight;
    return m;
}

double NoiseKernel::abs_mass() const noexcept {
    double m = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k)
        m += std::abs(values_[k]) * (breakpoints_[k + 1] - breakpoints_[k]);
    for (const Atom& a : atoms_) m += std::abs(a.weight);
    return m;
}

double NoiseKernel::extended_variation() const noexcept {
    double v = std::abs(values_.front()) + std::abs(values_.back());
    for (std::size_t k = 1; k < values_.size(); ++k) v += std::abs(values_[k] - values_[k - 1]);
    return v;
}

bool NoiseKernel::is_probability(double tol) const noexcept {
    if (!atoms_.empty()) return false;
    if (std::any_of(values_.begin(), values_.end(), [](double v) { return v < 0.0; })) return false;
    return std::abs(mass() - 1.0) <= tol;
}

std::pair<double, double> NoiseKernel::support() const noexcept {
    double lo = breakpoints_.front();
    double hi = breakpoints_.back();
    for (const Atom& a : atoms_) {
        lo = std::min(lo, a.position);
        hi = std::max(hi, a.position);
    }
    return {lo, hi};
}

double NoiseKernel::density(double z) const noexcept {
    if (z < breakpoints_.front() || z >= breakpoints_.back()) return 0.0;
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), z);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

double NoiseKernel::step_cdf(double z) const noexcept {
    if (z <= breakpoints_.front()) return 0.0;
    if (z >= breakpoints_.back()) return cumulative_.back();
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), z);
    const auto k = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
    return cumulative_[k] + values_[k] * (z - breakpoints_[k]);
}

double NoiseKernel::cdf(double z) const noexcept {
    double r = step_cdf(z);
    for (const Atom& a : atoms_) {
        if (a.position > z) break;
        r += a.weight;
    }
    return r;
}

double NoiseKernel::step_cdf_integral(double p, double q) const noexcept {
    const std::size_t m = values_.size();
    if (q <= breakpoints_.front()) return 0.0;
    double lo = std::max(p, breakpoints_.front());
    double acc = 0.0;
    if (lo < breakpoints_.back()) {
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), lo);
        auto k = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
        while (lo < q && k < m) {
            const double hi = std::min(q, breakpoints_[k + 1]);
            const double r_lo = cumulative_[k] + values_[k] * (lo - breakpoints_[k]);
            const double r_hi = cumulative_[k] + values_[k] * (hi - breakpoints_[k]);
            acc += 0.5 * (hi - lo) * (r_lo + r_hi);
            lo = hi;
            ++k;
        }
    }
    if (lo < q) acc += (q - lo) * cumulative_.back();
    return acc;
}

double NoiseKernel::integrated_cdf(double p, double q) const noexcept {
    if (q < p) return -integrated_cdf(q, p);
    double acc = step_cdf_integral(p, q);
    for (const Atom& a : atoms_) {
        if (a.position >= q) break;
        acc += a.weight * (q - std::max(p, a.position));
    }
    return acc;
}

double NoiseKernel::quantile(double u) const {
    if (!atoms_.empty()) throw std::invalid_argument("quantile: kernel has atoms");
    if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("quantile: u must lie in [0,1)");
    const double target = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    auto k = static_cast<std::size_t>(it - cumulative_.begin());
    k = std::clamp<std::size_t>(k, 1, values_.size()) - 1;
    return breakpoints_[k] + (target - cumulative_[k]) / values_[k];
}

NoiseKernel uniform_kernel(double radius) {
    if (!(radius > 0.0 && radius <= 1.0)) throw BadRadius(radius, "(0,1]");
    NoiseKernel k("uniform(" + format_double(radius) + ")", {-0.5 * radius, 0.5 * radius},
                  {1.0 / radius});
    k.uniform_radius_ = radius;
    return k;
}

NoiseKernel uniform_kernel_derivative(double radius) {
    if (!(radius > 0.0 && radius < 1.0)) throw BadRadius(radius, "(0,1)");
    const double edge = 0.5 / radius;
    return NoiseKernel("d/da uniform(" + format_double(radius) + ")",
                       {-0.5 * radius, 0.5 * radius}, {-1.0 / (radius * radius)},
                       {{-0.5 * radius, edge}, {0.5 * radius, edge}});
}

}  // namespace noisy

// Acceptance checks: one PASS/FAIL line per criterion, followed by indented
// detail lines. Exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <noisy/control.hpp>
#include <noisy/dynamics.hpp>
#include <noisy/errors.hpp>
#include <noisy/format.hpp>
#include <noisy/response.hpp>
#include <noisy/validate.hpp>

#include "experiment.hpp"
#include "oracles.hpp"

using namespace noisy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
    std::vector<std::string> details;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

const std::vector<std::string> kPresets{"doubling_uniform", "doubling_noise_radius", "rotation_periodic",
                                        "bz_xi1",           "bz_xi2",                "mixture_doubling_tent"};

cli::ExperimentConfig preset(const std::string& name) {
    return cli::load_config(fs::path(NOISY_PRESET_DIR) / (name + ".json"));
}

AssembledSystem doubling_system(std::size_t n) {
    return assemble(SystemSpec{make_standard_map(StandardMap::Doubling), uniform_kernel(0.1), Grid(n)});
}

const std::vector<double> kDeltas{1e-2, 1e-3, 1e-4, 1e-5};

std::string fd_line(const FDReport& r) {
    std::ostringstream os;
    os << to_string(r.norm) << " errors";
    for (const FDPoint& p : r.points) os << ' ' << fmt(p.delta) << ":" << fmt(p.error);
    os << "; order " << (std::isnan(r.order) ? std::string("undefined") : fmt(r.order)) << " over "
       << r.fitted_points << " points";
    return os.str();
}

/// Order >= 0.8 and a decrease from the first to the second delta.
bool fd_passes(const FDReport& r) {
    return r.points.size() >= 2 && r.points[1].error < r.points[0].error && std::isfinite(r.order) && r.order >= 0.8;
}

FDReport run_fd(const PerturbationSpec& spec, const AssembledSystem& sys, const GridDensity& f0) {
    const ResponseResult r = linear_response(spec, sys, f0);
    return finite_difference_response(spec, sys, f0, r.direction, kDeltas, r.norm);
}

// ---------------------------------------------------------------------------

Outcome rotation_exactness() {
    const auto t0 = Clock::now();
    const AssembledSystem sys = assemble(SystemSpec{make_standard_map(StandardMap::Rotation, std::sqrt(2.0) - 1.0),
                                                    uniform_kernel(0.1), Grid(1024), BoundaryMode::Periodic});
    const StationaryResult st = stationary_density(sys.annealed);
    const double elapsed = seconds_since(t0);
    double dev = 0.0;
    for (std::size_t k = 0; k < 1024; ++k) dev = std::max(dev, std::abs(st.density[k] - 1.0));
    Outcome o;
    o.pass = st.residual < 1e-13 && dev < 1e-12 && elapsed < 1.0;
    o.summary = "residual " + fmt(st.residual) + ", max |f0 - 1| " + fmt(dev) + ", " + fmt(elapsed) + " s";
    return o;
}

Outcome bz_mixing() {
    const double xi1 = 0.860e-2;
    const double centre = 0.059;
    auto upper_at = [&](std::size_t n, double& secs) {
        const auto t0 = Clock::now();
        const AssembledSystem sys = assemble(SystemSpec{make_bz_map(), uniform_kernel(xi1), Grid(n)});
        const double u = mixing_contraction(sys.annealed, 55, 0).upper;
        secs = seconds_since(t0);
        return u;
    };
    double s1 = 0.0, s2 = 0.0;
    const double u1 = upper_at(4096, s1);
    const double u2 = upper_at(8192, s2);
    Outcome o;
    const bool in_band = u1 >= 0.02 && u1 <= 0.12;
    const bool toward = std::abs(u2 - centre) < std::abs(u1 - centre);
    o.pass = in_band && toward;
    o.summary = "upper(n=4096) " + fmt(u1) + (in_band ? " in" : " outside") + " [0.02, 0.12]; upper(n=8192) " +
                fmt(u2) + (toward ? " moves toward " : " does not move toward ") + "0.059";
    o.details.push_back("wall time " + fmt(s1) + " s and " + fmt(s2) + " s");
    return o;
}

Outcome map_response() {
    const AssembledSystem sys = doubling_system(1024);
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const FDReport fd = run_fd(MapPerturbation{PerturbationS::tent_bump(0.5, 0.25, 0.25)}, sys, f0);
    const FDReport zero = run_fd(MapPerturbation{PerturbationS::zero()}, sys, f0);
    double zero_err = 0.0;
    for (const FDPoint& p : zero.points) zero_err = std::max(zero_err, p.error);
    Outcome o;
    o.pass = fd_passes(fd) && zero_err < 1e-10;
    o.summary = fd_line(fd);
    o.details.push_back("zero-perturbation control: max error " + fmt(zero_err));
    return o;
}

/// BZ with xi1 at n = 1024 has a non-uniform stationary density, so the
/// response is non-trivial; reported for information next to criteria whose
/// prescribed base system is degenerate.
struct BzReference {
    AssembledSystem sys;
    GridDensity f0;
};

const BzReference& bz_reference() {
    static const BzReference ref = [] {
        AssembledSystem sys = assemble(SystemSpec{make_bz_map(), uniform_kernel(0.860e-2), Grid(1024)});
        GridDensity f0 = stationary_density(sys.annealed).density;
        return BzReference{std::move(sys), std::move(f0)};
    }();
    return ref;
}

std::string degenerate_note(const GridDensity& f0, const GridDensity& nu) {
    double dev = 0.0;
    for (double v : f0.values()) dev = std::max(dev, std::abs(v - 1.0));
    return "base f0 is uniform to " + fmt(dev) + " and the predicted response has L1 norm " + fmt(l1_norm(nu)) +
           "; every difference quotient is zero to rounding, so no order can be fitted";
}

Outcome noise_response() {
    const AssembledSystem sys = doubling_system(1024);
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const PerturbationSpec spec = NoiseRadiusPerturbation{0.1};
    const ResponseResult r = linear_response(spec, sys, f0);
    const FDReport fd = finite_difference_response(spec, sys, f0, r.direction, kDeltas, r.norm);
    Outcome o;
    o.pass = fd_passes(fd);
    o.summary = fd_line(fd);
    if (!o.pass) o.details.push_back(degenerate_note(f0, r.direction));
    const BzReference& bz = bz_reference();
    o.details.push_back("note (not counted): BZ, radius 0.0086, n = 1024: " +
                        fd_line(run_fd(NoiseRadiusPerturbation{0.860e-2}, bz.sys, bz.f0)));
    return o;
}

Outcome mixture_response() {
    const AssembledSystem sys = doubling_system(1024);
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const PerturbationSpec spec = MixturePerturbation{make_standard_map(StandardMap::Tent)};
    const ResponseResult r = linear_response(spec, sys, f0);
    const FDReport fd = finite_difference_response(spec, sys, f0, r.direction, kDeltas, NormKind::L1);
    Outcome o;
    o.pass = fd_passes(fd);
    o.summary = fd_line(fd);
    if (!o.pass) o.details.push_back(degenerate_note(f0, r.direction));
    const BzReference& bz = bz_reference();
    o.details.push_back("note (not counted): BZ with tent as second map, radius 0.0086, n = 1024: " +
                        fd_line(run_fd(MixturePerturbation{make_standard_map(StandardMap::Tent)}, bz.sys, bz.f0)));
    return o;
}

Outcome convolution_inequalities() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> radius(0.01, 1.0);
    int v1 = 0, v2 = 0, v3 = 0;
    double worst1 = 0.0, worst2 = 0.0, worst3 = 0.0;
    const int pairs = 500;
    for (int t = 0; t < pairs; ++t) {
        const std::size_t n = 16 + rng() % 300;
        const GridDensity f = oracle::random_density(rng, n, true);
        const NoiseKernel g = uniform_kernel(radius(rng));
        const GridDensity fg = convolution_matrix(g, Grid(n), BoundaryMode::Reflecting).apply(f);
        const double r1 = wasserstein_norm(project_zero_average(fg)) / (wasserstein_norm(f) * g.abs_mass());
        const double r2 = l1_norm(fg) / (3.0 * wasserstein_norm(f) * g.bv_norm());
        const double r3 = bv_norm(fg) / (9.0 * l1_norm(f) * g.bv_norm());
        worst1 = std::max(worst1, r1);
        worst2 = std::max(worst2, r2);
        worst3 = std::max(worst3, r3);
        v1 += r1 > 1.0 + 1e-12;
        v2 += r2 > 1.0 + 1e-12;
        v3 += r3 > 1.0 + 1e-12;
    }
    Outcome o;
    o.pass = v1 + v2 + v3 == 0;
    o.summary = std::to_string(pairs) + " pairs per inequality; violations " + std::to_string(v1) + "/" +
                std::to_string(v2) + "/" + std::to_string(v3) + "; largest lhs/rhs " + fmt(worst1) + ", " +
                fmt(worst2) + ", " + fmt(worst3);
    return o;
}

Outcome stationary_bv_bound() {
    int violations = 0, checked = 0;
    double worst = 0.0;
    Outcome o;
    for (const std::string& name : kPresets) {
        const cli::ExperimentConfig cfg = preset(name);
        for (std::size_t n : {512u, 1024u, 4096u}) {
            SystemSpec spec = cfg.system;
            spec.grid = Grid(n);
            const AssembledSystem sys = assemble(spec);
            try {
                const GridDensity f0 = stationary_density(sys.annealed, cfg.stationary).density;
                const double ratio = bv_norm(f0) / (9.0 * spec.kernel.bv_norm());
                worst = std::max(worst, ratio);
                ++checked;
                if (ratio > 1.0) {
                    ++violations;
                    o.details.push_back(name + " n = " + std::to_string(n) + ": ratio " + fmt(ratio));
                }
            } catch (const NotConverged& e) {
                ++violations;
                o.details.push_back(name + " n = " + std::to_string(n) + ": " + e.what());
            }
        }
    }
    o.pass = violations == 0;
    o.summary = std::to_string(checked) + " stationary densities, " + std::to_string(violations) +
                " violations; largest ||f0||_BV / (9 ||rho||_BV) = " + fmt(worst);
    return o;
}

Outcome wasserstein_oracle() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    const int cases = 200;
    for (int t = 0; t < cases; ++t) {
        const std::size_t n = 2 + rng() % 63;
        double engine = 0.0, lp = 0.0;
        if (t % 2 == 0) {
            std::vector<double> w(n + 1);
            double sum = 0.0;
            for (double& x : w) sum += (x = u(rng));
            for (double& x : w) x -= sum / static_cast<double>(n + 1);
            std::vector<Atom> atoms;
            for (std::size_t k = 0; k <= n; ++k) atoms.push_back({Grid(n).boundary(k), w[k]});
            engine = wasserstein_norm(SignedMeasure::atoms_only(Grid(n), atoms));
            lp = oracle::wasserstein_lp_atoms(w);
        } else {
            const GridDensity f = oracle::random_density(rng, n, true);
            engine = wasserstein_norm(f);
            lp = oracle::wasserstein_lp_density(f);
        }
        worst = std::max(worst, std::abs(engine - lp));
    }
    Outcome o;
    o.pass = worst < 1e-9;
    o.summary = std::to_string(cases) + " measures (atoms on grid points and grid densities, n <= 64); max |W - LP| " +
                fmt(worst);
    return o;
}

Outcome resolvent_oracle() {
    const AssembledSystem sys = assemble(SystemSpec{make_bz_map(), uniform_kernel(0.860e-2), Grid(256)});
    std::mt19937_64 rng(99);
    double worst = 0.0;
    std::size_t terms = 0;
    for (int t = 0; t < 50; ++t) {
        const GridDensity g = oracle::random_density(rng, 256, true);
        const ResolventResult r = resolvent_apply(sys.annealed, g);
        terms = std::max(terms, r.terms);
        worst = std::max(worst, l1_norm(r.density - oracle::dense_resolvent(sys.annealed, g)));
    }
    Outcome o;
    o.pass = worst < 1e-9;
    o.summary = "50 inputs on BZ, radius 0.0086, n = 256: max L1 difference " + fmt(worst) + " (up to " +
                std::to_string(terms) + " Neumann terms)";
    return o;
}

Outcome control_round_trip() {
    const AssembledSystem sys = doubling_system(1024);
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const Grid& g = sys.grid();

    GridDensity target(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double x = g.center(k);
        target[k] = std::exp(-std::pow((x - 0.4) / 0.08, 2)) - std::exp(-std::pow((x - 0.65) / 0.08, 2));
    }
    target = project_zero_average(target);
    const ControlSolution sol = solve_linear_request(target, sys, f0);
    const ResponseResult achieved = linear_response(MapPerturbation{sol.shape}, sys, f0);
    const double rel = l1_norm(achieved.direction - target) / l1_norm(target);

    const PerturbationS known = PerturbationS::tent_bump(0.5, 0.25, 0.25);
    const ResponseResult forward = linear_response(MapPerturbation{known}, sys, f0);
    const ControlSolution back = solve_linear_request(forward.direction, sys, f0);
    double sup = 0.0;
    for (std::size_t k = 0; k <= g.size(); ++k) {
        const double t = g.boundary(k);
        if (t < 0.25 || t > 0.75) continue;
        sup = std::max(sup, std::abs(back.shape(t) - known(t)));
    }
    Outcome o;
    o.pass = rel < 0.05 && sup < 1e-3;
    o.summary = "round-trip relative L1 " + fmt(rel) + "; known-S sup difference on its support " + fmt(sup);
    for (const std::string& a : sol.advisories) o.details.push_back("advisory: " + a);
    return o;
}

Outcome monte_carlo() {
    int passed = 0, total = 0;
    double worst = 0.0;
    Outcome o;
    for (const std::string& name : kPresets) {
        const cli::ExperimentConfig cfg = preset(name);
        const AssembledSystem sys = assemble(cfg.system);
        std::optional<MixtureStep> mixture;
        TransferMatrix L = sys.annealed;
        if (cfg.perturbation && cfg.mixture_weight > 0.0)
            if (const auto* m = std::get_if<MixturePerturbation>(&*cfg.perturbation)) {
                mixture = MixtureStep{m->second_map, cfg.mixture_weight};
                L = perturbed_operator(*cfg.perturbation, sys, cfg.mixture_weight);
            }
        const GridDensity f0 = stationary_density(L, cfg.stationary).density;
        const Grid hist(cfg.histogram_cells ? cfg.histogram_cells : cfg.system.grid.size());
        std::string line = name + ":";
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const SimulationReport r = simulate_trajectories(cfg.system.map, cfg.system.kernel, cfg.system.mode, hist,
                                                             SimulationOptions{seed, 10000000, 10000, 0.5}, f0, mixture);
            ++total;
            passed += *r.distance < 0.05;
            worst = std::max(worst, *r.distance);
            line += " " + fmt(*r.distance);
        }
        o.details.push_back(line);
    }
    o.pass = passed == total;
    o.summary = std::to_string(passed) + "/" + std::to_string(total) +
                " runs of 1e7 steps within L1 0.05 of f0; largest distance " + fmt(worst);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "rotation with periodic noise keeps Lebesgue measure", rotation_exactness},
        {2, "BZ mixing rate after 55 steps", bz_mixing},
        {3, "linear response to a map perturbation", map_response},
        {4, "linear response to a noise-radius perturbation", noise_response},
        {5, "linear response to a mixture perturbation", mixture_response},
        {6, "convolution inequalities", convolution_inequalities},
        {7, "stationary BV bound", stationary_bv_bound},
        {8, "Wasserstein norm vs LP oracle", wasserstein_oracle},
        {9, "Neumann resolvent vs dense solve", resolvent_oracle},
        {10, "control round trip", control_round_trip},
        {11, "Monte Carlo cross-check", monte_carlo},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("error: ") + e.what();
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << o.summary << " ("
                  << fmt(seconds_since(t0)) << " s)\n";
        for (const std::string& d : o.details) std::cout << "        " << d << '\n';
        std::cout.flush();
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}

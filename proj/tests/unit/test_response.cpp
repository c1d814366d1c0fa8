#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <noisy/dynamics.hpp>
#include <noisy/errors.hpp>
#include <noisy/response.hpp>

#include "oracles.hpp"

using namespace noisy;

namespace {

TransferMatrix rank_one(const GridDensity& p) {
    std::vector<std::vector<TransferMatrix::Entry>> cols(p.size());
    for (auto& c : cols)
        for (std::size_t r = 0; r < p.size(); ++r) c.push_back({static_cast<std::uint32_t>(r), p[r]});
    return TransferMatrix(p.grid(), BoundaryMode::Reflecting, Provenance::Deterministic, std::move(cols));
}

AssembledSystem doubling_system(std::size_t n, double radius = 0.1) {
    return assemble(SystemSpec{make_standard_map(StandardMap::Doubling), uniform_kernel(radius), Grid(n)});
}

AssembledSystem bz_system(std::size_t n, double radius = 0.05) {
    return assemble(SystemSpec{make_bz_map(), uniform_kernel(radius), Grid(n)});
}

/// log10 ratio of consecutive errors, i.e. the observed order per decade.
double decade_order(double coarse, double fine) { return std::log10(coarse / fine); }

}  // namespace

TEST_CASE("stationary density of a rank-one operator is its column") {
    std::mt19937_64 rng(41);
    const GridDensity p = oracle::random_probability(rng, 30);
    const StationaryResult r = stationary_density(rank_one(p));
    CHECK(r.residual < 1e-12);
    for (std::size_t k = 0; k < 30; ++k) CHECK(r.density[k] == doctest::Approx(p[k]).epsilon(1e-12));
}

TEST_CASE("random rotation with periodic noise keeps Lebesgue measure") {
    const AssembledSystem sys = assemble(SystemSpec{make_standard_map(StandardMap::Rotation, 0.41421356237309515),
                                                    uniform_kernel(0.1), Grid(1024), BoundaryMode::Periodic});
    const StationaryResult r = stationary_density(sys.annealed);
    CHECK(r.residual < 1e-13);
    for (std::size_t k = 0; k < 1024; ++k) CHECK(r.density[k] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stationary solver reports non-convergence") {
    const AssembledSystem sys = bz_system(256);
    CHECK_THROWS_AS(stationary_density(sys.annealed, StationaryOptions{1e-15, 2}), NotConverged);
}

TEST_CASE("stationary density is a fixed probability density") {
    const AssembledSystem sys = bz_system(512);
    const StationaryResult r = stationary_density(sys.annealed);
    CHECK(r.density.mass() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(l1_norm(sys.annealed.apply(r.density) - r.density) < 1e-12);
    for (std::size_t k = 0; k < 512; ++k) CHECK(r.density[k] >= 0.0);
}

TEST_CASE("mixing contraction: identity, rank-one and the exact/upper relation") {
    const Grid g(16);
    const TransferMatrix id = ulam_matrix(make_standard_map(StandardMap::Identity), g);
    const MixingEstimate mi = mixing_contraction(id, 10);
    REQUIRE(mi.exact);
    CHECK(*mi.exact == doctest::Approx(1.0));
    const MixingEstimate m1 = mixing_contraction(rank_one(GridDensity::uniform(g)), 1);
    CHECK(m1.upper < 1e-14);
    CHECK(*m1.exact < 1e-14);

    const AssembledSystem sys = bz_system(256, 0.02);
    for (std::size_t steps : {1u, 5u, 20u}) {
        const MixingEstimate m = mixing_contraction(sys.annealed, steps);
        REQUIRE(m.exact);
        CHECK(*m.exact <= m.upper + 1e-14);
        CHECK(m.upper <= 2.0 * *m.exact + 1e-14);
    }
    CHECK_FALSE(mixing_contraction(sys.annealed, 3, 128).exact.has_value());
}

TEST_CASE("resolvent: zero input, residual and dense-solve oracle") {
    const AssembledSystem sys = bz_system(256, 0.05);
    const GridDensity zero = GridDensity::zero(Grid(256));
    CHECK(l1_norm(resolvent_apply(sys.annealed, zero).density) == 0.0);
    CHECK_THROWS_AS(resolvent_apply(sys.annealed, GridDensity::uniform(Grid(256))), NonZeroMass);

    std::mt19937_64 rng(42);
    for (int t = 0; t < 5; ++t) {
        const GridDensity g = oracle::random_density(rng, 256, true);
        const ResolventResult r = resolvent_apply(sys.annealed, g);
        CHECK(l1_norm(r.density - sys.annealed.apply(r.density) - g) < 10.0 * 1e-12);
        CHECK(l1_norm(r.density - oracle::dense_resolvent(sys.annealed, g)) < 1e-9);
    }
}

TEST_CASE("resolvent reports non-convergence when the term budget is too small") {
    const AssembledSystem sys = bz_system(128, 0.05);
    std::mt19937_64 rng(43);
    const GridDensity g = oracle::random_density(rng, 128, true);
    CHECK_THROWS_AS(resolvent_apply(sys.annealed, g, ResolventOptions{1e-12, 3}), NotConverged);
}

TEST_CASE("distributional derivative of steps") {
    const Grid g(4);
    const SignedMeasure c = distributional_derivative(GridDensity(g, {3.0, 3.0, 3.0, 3.0}));
    REQUIRE(c.atoms().size() == 2);
    CHECK(c.atoms()[0] == Atom{0.0, 3.0});
    CHECK(c.atoms()[1] == Atom{1.0, -3.0});
    const SignedMeasure s = distributional_derivative(GridDensity(g, {2.0, 2.0, 0.0, 0.0}));
    REQUIRE(s.atoms().size() == 2);
    CHECK(s.atoms()[0] == Atom{0.0, 2.0});
    CHECK(s.atoms()[1] == Atom{0.5, -2.0});
    CHECK(total_mass(s) == 0.0);
}

TEST_CASE("distributional derivative satisfies integration by parts") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng() % 50;
        const GridDensity h = oracle::random_density(rng, n, false);
        // Random piecewise-linear test function with its own nodes.
        const std::size_t m = 2 + rng() % 10;
        std::vector<double> nodes(m + 1), vals(m + 1);
        for (std::size_t i = 0; i <= m; ++i) {
            nodes[i] = static_cast<double>(i) / static_cast<double>(m);
            vals[i] = u(rng);
        }
        auto phi = [&](double x) {
            const std::size_t i = std::min<std::size_t>(m - 1, static_cast<std::size_t>(x * static_cast<double>(m)));
            const double w = (x - nodes[i]) * static_cast<double>(m);
            return vals[i] + w * (vals[i + 1] - vals[i]);
        };
        const SignedMeasure d = distributional_derivative(h);
        double lhs = 0.0;
        for (const Atom& a : d.atoms()) lhs += a.weight * phi(a.position);
        // -int phi' h: integrate the piecewise-constant phi' * h exactly on the
        // common refinement of both partitions.
        std::vector<double> cuts;
        for (std::size_t k = 0; k <= n; ++k) cuts.push_back(static_cast<double>(k) / static_cast<double>(n));
        for (double x : nodes) cuts.push_back(x);
        std::sort(cuts.begin(), cuts.end());
        double rhs = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double a = cuts[k], b = cuts[k + 1];
            if (!(b > a)) continue;
            const double mid = 0.5 * (a + b);
            const std::size_t i = std::min<std::size_t>(m - 1, static_cast<std::size_t>(mid * static_cast<double>(m)));
            const double slope = (vals[i + 1] - vals[i]) * static_cast<double>(m);
            rhs -= slope * h[Grid(n).cell_of(mid)] * (b - a);
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("map derivative: zero field, zero mass and one-step consistency") {
    const AssembledSystem sys = doubling_system(512);
    std::mt19937_64 rng(45);
    const GridDensity f0 = oracle::random_probability(rng, 512);
    CHECK(l1_norm(derivative_map(f0, sys, PerturbationS::zero())) == 0.0);

    const PerturbationS s({{0.0, 0.0}, {0.2, 0.1}, {0.5, 0.0}, {0.7, -0.15}, {1.0, 0.0}});
    for (MapDerivativeScheme scheme : {MapDerivativeScheme::Consistent, MapDerivativeScheme::CellCentreAtoms})
        CHECK(std::abs(derivative_map(f0, sys, s, scheme).mass()) < 1e-12);

    const GridDensity dot = derivative_map(f0, sys, s);
    const GridDensity base = sys.annealed.apply(f0);
    std::vector<double> errors;
    for (double delta : {1e-2, 1e-3, 1e-4}) {
        const TransferMatrix Ld = perturbed_operator(MapPerturbation{s}, sys, delta);
        errors.push_back(l1_norm((Ld.apply(f0) - base) * (1.0 / delta) - dot));
    }
    INFO(errors[0] << " " << errors[1] << " " << errors[2]);
    CHECK(errors[1] < errors[0]);
    CHECK(errors[2] < errors[1]);
    CHECK(decade_order(errors[0], errors[2]) / 2.0 > 0.8);
}

TEST_CASE("cell-centre map derivative obeys the variation bound") {
    std::mt19937_64 rng(46);
    const AssembledSystem sys = bz_system(400, 0.07);
    const PerturbationS s = PerturbationS::tent_bump(0.35, 0.2, 0.15);
    for (int t = 0; t < 10; ++t) {
        const GridDensity f0 = oracle::random_probability(rng, 400);
        const GridDensity pushed = sys.deterministic.apply(f0);
        GridDensity weighted = pushed;
        for (std::size_t k = 0; k < 400; ++k) weighted[k] *= s(sys.grid().center(k));
        const GridDensity dot = derivative_map(f0, sys, s, MapDerivativeScheme::CellCentreAtoms);
        CHECK(l1_norm(dot) <= sys.spec.kernel.extended_variation() * l1_norm(weighted) * (1.0 + 1e-12));
    }
}

TEST_CASE("noise derivative: zero kernel, mass check and W consistency") {
    const double a = 0.1;
    const AssembledSystem sys = doubling_system(1024, a);
    std::mt19937_64 rng(47);
    const GridDensity f0 = oracle::random_probability(rng, 1024);
    const NoiseKernel zero("zero", {-0.1, 0.1}, {0.0});
    CHECK(l1_norm(derivative_noise(f0, sys, zero)) == 0.0);
    CHECK_THROWS_AS(derivative_noise(f0, sys, uniform_kernel(a)), NonZeroMassKernel);

    const GridDensity dot = derivative_noise(f0, sys, uniform_kernel_derivative(a));
    CHECK(std::abs(dot.mass()) < 1e-12);
    const GridDensity base = sys.annealed.apply(f0);
    std::vector<double> errors;
    for (double xi : {1e-2, 1e-3, 1e-4}) {
        const TransferMatrix Lx = perturbed_operator(NoiseRadiusPerturbation{a}, sys, xi);
        errors.push_back(wasserstein_norm(project_zero_average((Lx.apply(f0) - base) * (1.0 / xi) - dot)));
    }
    INFO(errors[0] << " " << errors[1] << " " << errors[2]);
    CHECK(errors[1] < errors[0]);
    CHECK(errors[2] < errors[1]);
}

TEST_CASE("mixture derivative vanishes for a map fixing f0") {
    std::mt19937_64 rng(48);
    const Grid g(128);
    const GridDensity f0 = oracle::random_probability(rng, 128);
    const TransferMatrix id = ulam_matrix(make_standard_map(StandardMap::Identity), g);
    CHECK(l1_norm(derivative_mixture(f0, id)) < 1e-14);
    const TransferMatrix tent = ulam_matrix(make_standard_map(StandardMap::Tent), g);
    CHECK(std::abs(derivative_mixture(f0, tent).mass()) < 1e-12);
}

TEST_CASE("linear response of zero perturbations is zero") {
    const AssembledSystem sys = doubling_system(256);
    const GridDensity f0 = stationary_density(sys.annealed).density;
    CHECK(l1_norm(linear_response(MapPerturbation{PerturbationS::zero()}, sys, f0).direction) < 1e-14);
    CHECK(l1_norm(linear_response(MixturePerturbation{make_standard_map(StandardMap::Doubling)}, sys, f0).direction) <
          1e-10);
}

TEST_CASE("linear response direction has zero mass and solves the resolvent equation") {
    const AssembledSystem sys = bz_system(512, 0.0086);
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const std::vector<PerturbationSpec> specs{MapPerturbation{PerturbationS({{0.0, 0.0}, {0.5, 0.0}, {0.7, 0.05}, {0.9, 0.0}, {1.0, 0.0}})},
                                              NoiseRadiusPerturbation{0.0086},
                                              MixturePerturbation{make_standard_map(StandardMap::Tent)}};
    for (const PerturbationSpec& spec : specs) {
        const ResponseResult r = linear_response(spec, sys, f0);
        CHECK(std::abs(r.direction.mass()) < 1e-10);
        CHECK(r.resolvent_residual < 1e-10);
        CHECK(r.norm == default_norm(spec));
    }
}

TEST_CASE("perturbed operator at zero magnitude is the base operator") {
    const AssembledSystem sys = doubling_system(64);
    const PerturbationSpec map = MapPerturbation{PerturbationS::tent_bump(0.5, 0.25, 0.25)};
    const PerturbationSpec mixture = MixturePerturbation{make_standard_map(StandardMap::Tent)};
    const PerturbationSpec noise = NoiseRadiusPerturbation{0.1};
    for (const PerturbationSpec& spec : {map, mixture, noise}) {
        const auto a = perturbed_operator(spec, sys, 0.0).dense();
        const auto b = sys.annealed.dense();
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-14).scale(1.0));
    }
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <noisy/dynamics.hpp>
#include <noisy/response.hpp>
#include <noisy/validate.hpp>

using namespace noisy;

TEST_CASE("FD summary fits the slope of synthetic first-order errors") {
    std::vector<FDPoint> pts;
    for (double d : {1e-1, 1e-2, 1e-3, 1e-4}) pts.push_back({d, 3.0 * d, 0.0, 1});
    const FDReport r = summarize_fd(NormKind::L1, pts);
    CHECK(r.order == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.fitted_points == 3);
    CHECK(r.monotone);
    CHECK(r.floor == doctest::Approx(3e-4));
}

TEST_CASE("FD summary stops fitting at the floor and flags growth") {
    const FDReport plateau = summarize_fd(NormKind::L1, {{1e-1, 1e-1, 0, 1}, {1e-2, 1e-2, 0, 1}, {1e-3, 1e-3, 0, 1}, {1e-4, 1e-3, 0, 1}});
    CHECK(plateau.fitted_points == 2);
    CHECK(plateau.order == doctest::Approx(1.0));
    CHECK(plateau.monotone);
    const FDReport growing = summarize_fd(NormKind::L1, {{1e-1, 1e-3, 0, 1}, {1e-2, 1e-1, 0, 1}, {1e-3, 1e-4, 0, 1}});
    CHECK_FALSE(growing.monotone);
    const FDReport zeros = summarize_fd(NormKind::L1, {{1e-1, 0.0, 0, 1}, {1e-2, 0.0, 0, 1}});
    CHECK(std::isnan(zeros.order));
}

TEST_CASE("zero perturbation gives exactly zero FD error") {
    const AssembledSystem sys =
        assemble(SystemSpec{make_standard_map(StandardMap::Doubling), uniform_kernel(0.1), Grid(256)});
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const PerturbationSpec spec = MapPerturbation{PerturbationS::zero()};
    const ResponseResult r = linear_response(spec, sys, f0);
    const FDReport fd = finite_difference_response(spec, sys, f0, r.direction, {1e-2, 1e-3}, NormKind::L1);
    for (const FDPoint& p : fd.points) CHECK(p.error < 1e-10);
}

TEST_CASE("FD validation of a map perturbation on BZ away from the maximum") {
    const AssembledSystem sys = assemble(SystemSpec{make_bz_map(), uniform_kernel(0.0086), Grid(1024)});
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const PerturbationSpec spec = MapPerturbation{PerturbationS({{0.0, 0.0}, {0.6, 0.0}, {0.7, 0.02}, {0.8, 0.0}, {1.0, 0.0}})};
    const ResponseResult r = linear_response(spec, sys, f0);
    const FDReport fd = finite_difference_response(spec, sys, f0, r.direction, {1e-2, 1e-3, 1e-4}, NormKind::L1);
    INFO(fd.points[0].error << " " << fd.points[1].error << " " << fd.points[2].error);
    CHECK(fd.monotone);
    CHECK(fd.points[1].error < fd.points[0].error);
}

TEST_CASE("FD deltas must be positive and decreasing") {
    const AssembledSystem sys =
        assemble(SystemSpec{make_standard_map(StandardMap::Doubling), uniform_kernel(0.1), Grid(32)});
    const GridDensity f0 = GridDensity::uniform(Grid(32));
    const PerturbationSpec spec = MapPerturbation{PerturbationS::zero()};
    CHECK_THROWS_AS(finite_difference_response(spec, sys, f0, f0 * 0.0, {1e-3, 1e-2}, NormKind::L1), std::invalid_argument);
    CHECK_THROWS_AS(finite_difference_response(spec, sys, f0, f0 * 0.0, {-1e-3}, NormKind::L1), std::invalid_argument);
}

TEST_CASE("simulation is reproducible per seed and normalized") {
    const MapModel T = make_standard_map(StandardMap::Tent);
    const NoiseKernel k = uniform_kernel(0.2);
    const Grid g(64);
    const SimulationOptions opts{7, 200000, 1000, 0.5};
    const SimulationReport a = simulate_trajectories(T, k, BoundaryMode::Reflecting, g, opts);
    const SimulationReport b = simulate_trajectories(T, k, BoundaryMode::Reflecting, g, opts);
    CHECK(a.histogram == b.histogram);
    CHECK(a.histogram.mass() == doctest::Approx(1.0).epsilon(1e-12));
    SimulationOptions other = opts;
    other.seed = 8;
    CHECK_FALSE(simulate_trajectories(T, k, BoundaryMode::Reflecting, g, other).histogram == a.histogram);
    CHECK_FALSE(a.distance.has_value());
}

TEST_CASE("simulation compares with a reference on a finer grid") {
    const AssembledSystem sys =
        assemble(SystemSpec{make_standard_map(StandardMap::Doubling), uniform_kernel(0.1), Grid(512)});
    const GridDensity f0 = stationary_density(sys.annealed).density;
    const SimulationReport r = simulate_trajectories(sys.spec.map, sys.spec.kernel, BoundaryMode::Reflecting, Grid(128),
                                                     SimulationOptions{3, 2000000, 1000, 0.5}, f0);
    REQUIRE(r.distance);
    CHECK(*r.distance < 0.05);
    CHECK_THROWS_AS(simulate_trajectories(sys.spec.map, sys.spec.kernel, BoundaryMode::Reflecting, Grid(100),
                                          SimulationOptions{3, 2000, 10, 0.5}, f0),
                    std::invalid_argument);
}

TEST_CASE("simulation rejects invalid options") {
    const MapModel T = make_standard_map(StandardMap::Doubling);
    CHECK_THROWS_AS(simulate_trajectories(T, uniform_kernel_derivative(0.1), BoundaryMode::Reflecting, Grid(8), {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_trajectories(T, uniform_kernel(0.1), BoundaryMode::Reflecting, Grid(8), {1, 10, 10, 0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_trajectories(T, uniform_kernel(0.1), BoundaryMode::Reflecting, Grid(8), {1, 100, 10, 0.5},
                                          std::nullopt, MixtureStep{T, 1.5}),
                    std::invalid_argument);
}

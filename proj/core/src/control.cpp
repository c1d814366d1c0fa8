#include "noisy/control.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "noisy/errors.hpp"
#include "noisy/format.hpp"

namespace noisy {

DeconvolutionResult deconvolve(const TransferMatrix& N, const GridDensity& y, double relative_ridge) {
    const double mass = y.mass();
    if (!(std::abs(mass) <= kZeroMassGate)) throw NonZeroMass("deconvolve", mass);
    const std::size_t n = N.size();
    const GridDensity target = project_zero_average(y);

    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& e : N.column(i)) dense(e.row, static_cast<Eigen::Index>(i)) = e.weight;
    Eigen::Map<const Eigen::VectorXd> rhs(target.values().data(), static_cast<Eigen::Index>(n));

    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nn + 1, nn + 1);
    kkt.topLeftCorner(nn, nn).noalias() = dense.transpose() * dense;
    const double lambda = relative_ridge * kkt.topLeftCorner(nn, nn).diagonal().maxCoeff();
    kkt.topLeftCorner(nn, nn).diagonal().array() += lambda;
    kkt.block(0, nn, nn, 1).setOnes();
    kkt.block(nn, 0, 1, nn).setOnes();
    Eigen::VectorXd b(nn + 1);
    b.head(nn) = dense.transpose() * rhs;
    b(nn) = 0.0;
    const Eigen::VectorXd sol = kkt.partialPivLu().solve(b);

    GridDensity f(N.grid(), std::vector<double>(sol.data(), sol.data() + nn));
    f = project_zero_average(f);
    const double residual = l1_norm(N.apply(f) - target);
    const double scale = l1_norm(target);
    const double relative = scale > 0.0 ? residual / scale : 0.0;
    return {std::move(f), residual, relative, relative > kOutOfRangeThreshold};
}

ControlSolution solve_linear_request(const GridDensity& target, const AssembledSystem& system,
                                     const GridDensity& f0, const ControlOptions& options) {
    const double mass = target.mass();
    if (!(std::abs(mass) <= kZeroMassGate)) throw NonZeroMass("solve_linear_request", mass);
    const Grid& grid = system.grid();
    const std::size_t n = grid.size();
    const double h = grid.width();

    const GridDensity mu = project_zero_average(target);
    const GridDensity y = mu - system.annealed.apply(mu);
    DeconvolutionResult dec = deconvolve(system.convolution, y, options.relative_ridge);

    std::vector<double> numerator(n + 1, 0.0);
    std::vector<double> running;
    running.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
        running.push_back(dec.density[k - 1] * h);
        numerator[k] = compensated_sum(running);
    }
    const double end_defect = numerator[n];
    // S(0) = 0 forces C = 0; S(1) = 0 holds because f has zero mass.
    numerator[0] = 0.0;
    numerator[n] = 0.0;

    double scale = 0.0;
    for (double v : numerator) scale = std::max(scale, std::abs(v));
    const double negligible = 1e-9 * scale;

    const std::vector<double> pushed = boundary_pushforward(f0, system.spec.map, system.spec.quadrature);
    std::vector<PerturbationS::Node> nodes;
    nodes.reserve(n + 1);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= n; ++k) {
        const double x = grid.boundary(k);
        double s = 0.0;
        if (std::abs(numerator[k]) > negligible) {
            const double g = pushed[k];
            if (!(std::abs(g) >= options.denominator_floor)) throw DenominatorVanishes(x, g, options.denominator_floor);
            margin = std::min(margin, std::abs(g) - options.denominator_floor);
            s = numerator[k] / -g;
        }
        nodes.push_back({x, s});
    }
    nodes.front().t = 0.0;
    nodes.back().t = 1.0;

    PerturbationS shape(std::move(nodes));
    ControlSolution sol{shape,
                        std::move(dec.density),
                        dec.residual,
                        dec.relative_residual,
                        dec.out_of_range,
                        shape.lipschitz(),
                        std::isfinite(margin) ? margin : 0.0,
                        end_defect,
                        {}};
    if (sol.out_of_range)
        sol.advisories.push_back("target is outside the numerical range of the noise convolution (relative residual " +
                                 format_double(sol.relative_residual) + ")");
    if (sol.lipschitz > 1.0)
        sol.advisories.push_back("Lip(S) = " + format_double(sol.lipschitz) +
                                 " exceeds 1; the target scaled by 1/Lip(S) is reached by S/Lip(S)");
    sol.advisories.push_back("N^-1 preimage chosen by minimal-norm Tikhonov regularization");
    return sol;
}

}  // namespace noisy

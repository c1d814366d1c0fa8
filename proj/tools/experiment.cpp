#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include <noisy/errors.hpp>
#include <noisy/format.hpp>
#include <noisy/parallel.hpp>

namespace noisy::cli {

namespace {

using json = nlohmann::json;

// Object view that rejects keys outside an allowed set and reports every
// problem with its dotted path.
class Section {
public:
    Section(const json& node, std::string path, std::initializer_list<const char*> keys)
        : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(where() + " must be an object");
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& item : node_.items())
            if (!allowed.count(item.key())) throw ConfigError("unknown key '" + join(item.key()) + "'");
    }

    bool has(const char* key) const { return node_.contains(key); }
    const json& at(const char* key) const { return node_.at(key); }
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const char* key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(join(key) + " is required");
        }
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(join(key) + " must be a number");
        return v.get<double>();
    }

    std::size_t count(const char* key, std::size_t fallback, std::size_t minimum) const {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(minimum))
            throw ConfigError(join(key) + " must be an integer >= " + std::to_string(minimum) + ", got " + v.dump());
        return v.get<std::size_t>();
    }

    std::string text(const char* key, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(join(key) + " is required");
        }
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(join(key) + " must be a string");
        return v.get<std::string>();
    }

    Section child(const char* key, std::initializer_list<const char*> keys) const {
        return Section(at(key), join(key), keys);
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& node_;
    std::string path_;
};

MapModel parse_map(const Section& s) {
    const std::string name = s.text("name");
    if (name == "bz") return make_bz_map();
    if (name == "doubling") return make_standard_map(StandardMap::Doubling);
    if (name == "tent") return make_standard_map(StandardMap::Tent);
    if (name == "identity") return make_standard_map(StandardMap::Identity);
    if (name == "rotation") {
        const double theta = s.number("theta");
        if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError(s.join("theta") + " must lie in [0,1)");
        return make_standard_map(StandardMap::Rotation, theta);
    }
    throw ConfigError(s.join("name") + " must be one of bz, doubling, tent, rotation, identity; got '" + name + "'");
}

NoiseKernel parse_kernel(const Section& s) {
    const std::string type = s.text("type", "uniform");
    if (type != "uniform") throw ConfigError(s.join("type") + " must be 'uniform'");
    const double radius = s.number("radius");
    if (!(radius > 0.0 && radius <= 1.0)) throw ConfigError(s.join("radius") + " must lie in (0,1]");
    return uniform_kernel(radius);
}

double map_maximum(const MapModel& map) {
    double best = 0.0;
    constexpr int kSamples = 100000;
    for (int k = 0; k <= kSamples; ++k) best = std::max(best, map(static_cast<double>(k) / kSamples));
    for (double c : map.critical_points()) best = std::max(best, map(c));
    return best;
}

PerturbationS parse_shape(const Section& s, const MapModel& map) {
    const int forms = int(s.has("nodes")) + int(s.has("tent")) + int(s.has("avoid_maximum"));
    if (forms != 1)
        throw ConfigError("perturbation: exactly one of nodes, tent, avoid_maximum must be given for kind 'map'");
    if (s.has("nodes")) {
        const json& arr = s.at("nodes");
        if (!arr.is_array()) throw ConfigError(s.join("nodes") + " must be an array of [t, s] pairs");
        std::vector<PerturbationS::Node> nodes;
        for (const json& p : arr) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                throw ConfigError(s.join("nodes") + " entries must be [t, s] number pairs");
            nodes.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        try {
            return PerturbationS(std::move(nodes));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(s.join("nodes") + ": " + e.what());
        }
    }
    if (s.has("tent")) {
        const Section t = s.child("tent", {"center", "half_width", "height"});
        return PerturbationS::tent_bump(t.number("center"), t.number("half_width"), t.number("height"));
    }
    // Tent bump on [lower, max T - radius]: keeps the support of S away from
    // the image of the map's maximum, where L_T f0 is singular.
    const Section t = s.child("avoid_maximum", {"lower", "radius", "height"});
    const double radius = t.number("radius", 0.02);
    const double lower = t.number("lower", 0.1);
    const double upper = map_maximum(map) - radius;
    if (!(upper > lower)) throw ConfigError(t.join("radius") + " leaves no room below the map maximum");
    const double half = (upper - lower) / 2.0;
    return PerturbationS::tent_bump(lower + half, half, t.number("height", 0.5 * half));
}

NormKind parse_norm(const std::string& key, const std::string& value) {
    if (value == "L1") return NormKind::L1;
    if (value == "BV") return NormKind::BV;
    if (value == "W" || value == "Wasserstein") return NormKind::Wasserstein;
    throw ConfigError(key + " must be one of L1, BV, W; got '" + value + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    const Section top(root, "", {"map", "kernel", "grid", "boundary", "perturbation", "stationary", "mixing",
                                 "validate", "simulate", "control", "output", "description"});

    const Section grid = top.child("grid", {"n", "quadrature", "scheme"});
    if (!grid.has("n")) throw ConfigError("grid.n is required");
    const std::size_t n = grid.count("n", 0, 2);
    const std::size_t quadrature = grid.count("quadrature", kDefaultQuadrature, 1);
    const std::string scheme = grid.text("scheme", "interpolated");
    if (scheme != "interpolated" && scheme != "midpoint")
        throw ConfigError("grid.scheme must be 'interpolated' or 'midpoint'");

    const std::string boundary = top.has("boundary") ? top.text("boundary") : "reflecting";
    if (boundary != "reflecting" && boundary != "periodic")
        throw ConfigError("boundary must be 'reflecting' or 'periodic'");

    MapModel map = parse_map(top.child("map", {"name", "theta"}));
    NoiseKernel kernel = parse_kernel(top.child("kernel", {"type", "radius"}));

    ExperimentConfig cfg(SystemSpec{map, kernel, Grid(n),
                                    boundary == "periodic" ? BoundaryMode::Periodic : BoundaryMode::Reflecting,
                                    quadrature, scheme == "midpoint" ? UlamScheme::Midpoint : UlamScheme::Interpolated});

    if (top.has("perturbation")) {
        const Section p = top.child("perturbation", {"kind", "nodes", "tent", "avoid_maximum", "second_map", "weight"});
        const std::string kind = p.text("kind");
        if (kind == "map") {
            cfg.perturbation = MapPerturbation{parse_shape(p, cfg.system.map)};
        } else if (kind == "noise") {
            if (!(*kernel.uniform_radius() < 1.0))
                throw ConfigError("kernel.radius must be < 1 for a noise perturbation");
            cfg.perturbation = NoiseRadiusPerturbation{*kernel.uniform_radius()};
        } else if (kind == "mixture") {
            if (!p.has("second_map")) throw ConfigError("perturbation.second_map is required for kind 'mixture'");
            cfg.perturbation = MixturePerturbation{parse_map(p.child("second_map", {"name", "theta"}))};
            cfg.mixture_weight = p.number("weight", 0.0);
            if (!(cfg.mixture_weight >= 0.0 && cfg.mixture_weight <= 1.0))
                throw ConfigError("perturbation.weight must lie in [0,1]");
        } else {
            throw ConfigError("perturbation.kind must be one of map, noise, mixture; got '" + kind + "'");
        }
    }

    if (top.has("stationary")) {
        const Section s = top.child("stationary", {"tolerance", "max_iterations", "export_matrix"});
        cfg.stationary.tolerance = s.number("tolerance", cfg.stationary.tolerance);
        if (!(cfg.stationary.tolerance > 0.0)) throw ConfigError("stationary.tolerance must be positive");
        cfg.stationary.max_iterations = s.count("max_iterations", cfg.stationary.max_iterations, 1);
        if (s.has("export_matrix")) {
            if (!s.at("export_matrix").is_boolean()) throw ConfigError("stationary.export_matrix must be a boolean");
            cfg.export_matrix = s.at("export_matrix").get<bool>();
        }
    }
    if (top.has("mixing")) {
        const Section s = top.child("mixing", {"steps", "exact_max_cells"});
        cfg.mixing_steps = s.count("steps", cfg.mixing_steps, 1);
        cfg.exact_mixing_max_cells = s.count("exact_max_cells", cfg.exact_mixing_max_cells, 0);
    }
    if (top.has("validate")) {
        const Section s = top.child("validate", {"deltas", "norm"});
        if (s.has("deltas")) {
            const json& d = s.at("deltas");
            if (!d.is_array() || d.empty()) throw ConfigError("validate.deltas must be a non-empty array");
            cfg.deltas.clear();
            for (const json& v : d) {
                if (!v.is_number() || !(v.get<double>() > 0.0))
                    throw ConfigError("validate.deltas entries must be positive numbers");
                if (!cfg.deltas.empty() && !(v.get<double>() < cfg.deltas.back()))
                    throw ConfigError("validate.deltas must be strictly decreasing");
                cfg.deltas.push_back(v.get<double>());
            }
        }
        if (s.has("norm")) cfg.norm = parse_norm("validate.norm", s.text("norm"));
    }
    if (top.has("simulate")) {
        const Section s = top.child("simulate", {"seeds", "steps", "burn_in", "histogram_cells"});
        if (s.has("seeds")) {
            const json& d = s.at("seeds");
            if (!d.is_array() || d.empty()) throw ConfigError("simulate.seeds must be a non-empty array");
            cfg.seeds.clear();
            for (const json& v : d) {
                if (!v.is_number_unsigned()) throw ConfigError("simulate.seeds entries must be non-negative integers");
                cfg.seeds.push_back(v.get<std::uint64_t>());
            }
        }
        cfg.simulation_steps = s.count("steps", cfg.simulation_steps, 1);
        cfg.burn_in = s.count("burn_in", cfg.burn_in, 0);
        if (!(cfg.simulation_steps > cfg.burn_in)) throw ConfigError("simulate.steps must exceed simulate.burn_in");
        cfg.histogram_cells = s.count("histogram_cells", 0, 2);
        if (cfg.histogram_cells != 0 && n % cfg.histogram_cells != 0)
            throw ConfigError("simulate.histogram_cells must divide grid.n");
    }
    if (top.has("control")) {
        const Section s = top.child("control", {"target", "denominator_floor", "ridge"});
        cfg.control.denominator_floor = s.number("denominator_floor", cfg.control.denominator_floor);
        cfg.control.relative_ridge = s.number("ridge", cfg.control.relative_ridge);
        if (!(cfg.control.denominator_floor > 0.0)) throw ConfigError("control.denominator_floor must be positive");
        if (!(cfg.control.relative_ridge >= 0.0)) throw ConfigError("control.ridge must be non-negative");
        if (s.has("target")) {
            const Section t = s.child("target", {"file", "plus_center", "minus_center", "width"});
            if (t.has("file")) {
                std::filesystem::path file = t.text("file");
                if (file.is_relative()) file = base_dir / file;
                if (!std::filesystem::exists(file))
                    throw ConfigError("control.target.file '" + file.string() + "' does not exist");
                cfg.target.file = file;
            }
            cfg.target.plus_center = t.number("plus_center", cfg.target.plus_center);
            cfg.target.minus_center = t.number("minus_center", cfg.target.minus_center);
            cfg.target.width = t.number("width", cfg.target.width);
            if (!(cfg.target.width > 0.0)) throw ConfigError("control.target.width must be positive");
        }
    }
    if (top.has("output")) cfg.output = top.text("output");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

void write_density(const std::filesystem::path& path, const GridDensity& f) {
    std::ostringstream os;
    write_csv(os, f);
    write_text(path, os.str());
}

json to_json(const FDReport& r) {
    json points = json::array();
    for (const FDPoint& p : r.points)
        points.push_back({{"delta", p.delta}, {"error", p.error}, {"direction_mass", p.direction_mass},
                          {"iterations", p.iterations}});
    json j{{"norm", to_string(r.norm)}, {"points", points}, {"floor", r.floor},
           {"fitted_points", r.fitted_points}, {"monotone", r.monotone}};
    j["order"] = std::isfinite(r.order) ? json(r.order) : json(nullptr);
    return j;
}

std::string fd_csv(const FDReport& r) {
    std::string s = "delta,error,direction_mass,iterations\n";
    for (const FDPoint& p : r.points)
        s += format_double(p.delta) + ',' + format_double(p.error) + ',' + format_double(p.direction_mass) + ',' +
             std::to_string(p.iterations) + '\n';
    return s;
}

json system_json(const ExperimentConfig& cfg) {
    return {{"map", cfg.system.map.label()},
            {"kernel", cfg.system.kernel.label()},
            {"grid_n", cfg.system.grid.size()},
            {"quadrature", cfg.system.quadrature},
            {"scheme", cfg.system.scheme == UlamScheme::Interpolated ? "interpolated" : "midpoint"},
            {"boundary", to_string(cfg.system.mode)}};
}

GridDensity build_target(const ExperimentConfig& cfg) {
    if (cfg.target.file) {
        std::ifstream in(*cfg.target.file);
        SignedMeasure m = read_measure_csv(in);
        if (!m.atoms().empty()) throw ConfigError("control.target.file must not contain atoms");
        if (!(m.grid() == cfg.system.grid)) throw ConfigError("control.target.file grid does not match grid.n");
        return m.density();
    }
    const Grid& grid = cfg.system.grid;
    GridDensity mu(grid);
    const auto& t = cfg.target;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double x = grid.center(k);
        mu[k] = std::exp(-std::pow((x - t.plus_center) / t.width, 2)) - std::exp(-std::pow((x - t.minus_center) / t.width, 2));
    }
    return project_zero_average(mu);
}

const PerturbationSpec& require_perturbation(const ExperimentConfig& cfg, const std::string& command) {
    if (!cfg.perturbation) throw ConfigError("perturbation is required for the " + command + " command");
    return *cfg.perturbation;
}

}  // namespace

ExitCode run(const std::string& command, const ExperimentConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
        throw ConfigError("unknown command '" + command + "'");
    std::filesystem::create_directories(cfg.output);
    const auto& out = cfg.output;

    json diag{{"command", command}, {"system", system_json(cfg)}};
    ExitCode code = ExitCode::Ok;
    const AssembledSystem sys = assemble(cfg.system);

    auto solve_f0 = [&] {
        StationaryResult st = stationary_density(sys.annealed, cfg.stationary);
        write_density(out / "f0.csv", st.density);
        diag["stationary"] = {{"iterations", st.iterations}, {"residual", st.residual}};
        return st;
    };

    if (command == "stationary") {
        const StationaryResult st = solve_f0();
        double worst_sum = 0.0;
        for (double c : sys.annealed.column_sums()) worst_sum = std::max(worst_sum, std::abs(c - 1.0));
        diag["stationary"]["mass"] = st.density.mass();
        diag["stationary"]["bv_variation"] = bv_variation(st.density);
        diag["stationary"]["bv_bound"] = 9.0 * cfg.system.kernel.bv_norm();
        diag["operator"] = {{"nonzeros", sys.annealed.nonzeros()}, {"max_column_sum_error", worst_sum}};
        const QuadratureReport q =
            quadrature_difference(cfg.system.map, cfg.system.grid, cfg.system.quadrature, cfg.system.scheme);
        diag["operator"]["quadrature_K_vs_2K"] = q.max_column_difference;
        if (cfg.export_matrix) {
            std::ostringstream os;
            sys.annealed.write_triplets(os);
            write_text(out / "operator.csv", os.str());
        }
    } else if (command == "mixing") {
        const MixingEstimate m = mixing_contraction(sys.annealed, cfg.mixing_steps, cfg.exact_mixing_max_cells);
        diag["mixing"] = {{"steps", m.steps}, {"upper", m.upper}};
        diag["mixing"]["exact"] = m.exact ? json(*m.exact) : json(nullptr);
        std::string csv = "steps,upper,exact\n" + std::to_string(m.steps) + ',' + format_double(m.upper) + ',' +
                          (m.exact ? format_double(*m.exact) : std::string()) + '\n';
        write_text(out / "mixing.csv", csv);
    } else if (command == "respond" || command == "validate") {
        const PerturbationSpec& spec = require_perturbation(cfg, command);
        const StationaryResult st = solve_f0();
        ResponseResult r = linear_response(spec, sys, st.density);
        if (cfg.norm) r.norm = *cfg.norm;
        write_density(out / "derivative.csv", r.derivative);
        write_density(out / "response.csv", r.direction);
        diag["response"] = {{"resolvent_terms", r.resolvent_terms},
                            {"resolvent_residual", r.resolvent_residual},
                            {"mass", r.direction.mass()},
                            {"norm", to_string(r.norm)},
                            {"warnings", r.warnings}};
        if (r.bv_coarse) diag["response"]["bv_refinement"] = {{"coarse", *r.bv_coarse}, {"fine", *r.bv_fine}};
        if (command == "validate") {
            const FDReport fd = finite_difference_response(spec, sys, st.density, r.direction, cfg.deltas, r.norm,
                                                           cfg.stationary);
            write_text(out / "fd_report.csv", fd_csv(fd));
            diag["fd"] = to_json(fd);
            if (!fd.monotone) code = ExitCode::ValidationFailed;
        }
    } else if (command == "simulate") {
        std::optional<MixtureStep> mixture;
        TransferMatrix L = sys.annealed;
        if (cfg.perturbation && cfg.mixture_weight > 0.0) {
            if (const auto* m = std::get_if<MixturePerturbation>(&*cfg.perturbation)) {
                mixture = MixtureStep{m->second_map, cfg.mixture_weight};
                L = perturbed_operator(*cfg.perturbation, sys, cfg.mixture_weight);
            }
        }
        const StationaryResult st = stationary_density(L, cfg.stationary);
        write_density(out / "f0.csv", st.density);
        diag["stationary"] = {{"iterations", st.iterations}, {"residual", st.residual}};
        const Grid hist_grid(cfg.histogram_cells ? cfg.histogram_cells : cfg.system.grid.size());
        std::vector<SimulationReport> reports(cfg.seeds.size(), SimulationReport{0, 0, 0, GridDensity(hist_grid), {}});
        parallel::for_chunks(cfg.seeds.size(), [&](std::size_t first, std::size_t last) {
            for (std::size_t k = first; k < last; ++k)
                reports[k] = simulate_trajectories(cfg.system.map, cfg.system.kernel, cfg.system.mode, hist_grid,
                                                   SimulationOptions{cfg.seeds[k], cfg.simulation_steps, cfg.burn_in, 0.5},
                                                   st.density, mixture);
        });
        std::string csv = "seed,steps,burn_in,l1_distance\n";
        json runs = json::array();
        for (const SimulationReport& r : reports) {
            csv += std::to_string(r.seed) + ',' + std::to_string(r.steps) + ',' + std::to_string(r.burn_in) + ',' +
                   format_double(*r.distance) + '\n';
            write_density(out / ("histogram_seed" + std::to_string(r.seed) + ".csv"), r.histogram);
            runs.push_back({{"seed", r.seed}, {"steps", r.steps}, {"burn_in", r.burn_in}, {"l1_distance", *r.distance}});
        }
        write_text(out / "simulate.csv", csv);
        diag["simulate"] = runs;
    } else if (command == "control") {
        const StationaryResult st = solve_f0();
        const GridDensity target = build_target(cfg);
        write_density(out / "target.csv", target);
        const ControlSolution sol = solve_linear_request(target, sys, st.density, cfg.control);
        std::string csv = "t,s\n";
        for (const auto& node : sol.shape.nodes()) csv += format_double(node.t) + ',' + format_double(node.s) + '\n';
        write_text(out / "control_s.csv", csv);
        write_density(out / "deconvolved.csv", sol.deconvolved);
        const ResponseResult achieved = linear_response(MapPerturbation{sol.shape}, sys, st.density);
        write_density(out / "achieved.csv", achieved.direction);
        const double round_trip = l1_norm(achieved.direction - target) / std::max(l1_norm(target), 1e-300);
        diag["control"] = {{"deconvolution_residual", sol.deconvolution_residual},
                           {"relative_residual", sol.relative_residual},
                           {"out_of_range", sol.out_of_range},
                           {"lipschitz", sol.lipschitz},
                           {"denominator_margin", sol.denominator_margin},
                           {"end_defect", sol.end_defect},
                           {"round_trip_relative_l1", round_trip},
                           {"advisories", sol.advisories}};
    }

    diag["exit_code"] = static_cast<int>(code);
    diag["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_text(out / "diagnostics.json", diag.dump(2) + "\n");
    return code;
}

int run_guarded(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out_dir, std::optional<std::uint64_t> seed,
                std::ostream& err) {
    try {
        ExperimentConfig cfg = load_config(config_path);
        if (out_dir) cfg.output = *out_dir;
        if (seed) cfg.seeds = {*seed};
        return static_cast<int>(run(command, cfg));
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::ConfigError);
    } catch (const NotConverged& e) {
        err << "not converged: " << e.what() << '\n';
        return static_cast<int>(ExitCode::NotConverged);
    } catch (const DenominatorVanishes& e) {
        err << "control: " << e.what() << '\n';
        return static_cast<int>(ExitCode::NotConverged);
    } catch (const Error& e) {
        err << "precondition failed: " << e.what() << '\n';
        return static_cast<int>(ExitCode::ConfigError);
    } catch (const std::invalid_argument& e) {
        err << "precondition failed: " << e.what() << '\n';
        return static_cast<int>(ExitCode::ConfigError);
    }
}

}  // namespace noisy::cli

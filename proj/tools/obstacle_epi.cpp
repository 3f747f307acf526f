// Batch front-end for the obstacle-problem free-boundary laboratory.
//
// Subcommands:
//   verify-epi   flat + singular competitor suites, CSV/JSON reports
//   solve        projected-SOR obstacle solve, binary grid + JSON sidecar
//   classify     free-boundary extraction and blow-up classification
//   decay        Weiss gap / rotation defect series at a point
//   sharpness    scaling scan of the borderline singular example
//
// Exit codes: 0 success, 1 configuration error, 2 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "obsepi/config.hpp"
#include "obsepi/fb_analysis.hpp"
#include "obsepi/grid_energy.hpp"
#include "obsepi/obstacle_solver.hpp"
#include "obsepi/report_io.hpp"

using namespace obsepi;

namespace {

struct CommonOpts {
    std::string config_file;
    std::string out = "out";
    int dim = 0;
    int resolution = 129;
    int modes = 0;
    double eps = 0.01;
    int traces = 100;
    std::uint64_t seed = 1;
    double delta0 = 0.1;
    std::string data = "qnu";
    double weight = 0.0;
    std::string eps_list = "0.16,0.08,0.04,0.02,0.01";
    std::string input;
    std::string point = "0,0,0";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_file, "key = value configuration file");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--dim", o.dim, "dimension (2 or 3; 0 = both where applicable)");
    cmd->add_option("--resolution", o.resolution, "grid nodes per side");
    cmd->add_option("--modes", o.modes, "spectral band limit (0 = dimension default)");
    cmd->add_option("--eps", o.eps, "epiperimetric constant for the singular suite");
    cmd->add_option("--traces", o.traces, "sampled traces per dimension");
    cmd->add_option("--seed", o.seed, "seed for sampled families");
    cmd->add_option("--delta0", o.delta0, "flat-point cap opening");
    cmd->add_option("--data", o.data, "boundary datum: qnu | qa | qa_kernel");
    cmd->add_option("--weight", o.weight, "w in q(x) = 1 + w |x|^{1/2} (0: unit weight)");
    cmd->add_option("--eps-list", o.eps_list, "comma-separated sharpness eps values");
    cmd->add_option("--in", o.input, "input grid function (binary)");
    cmd->add_option("--point", o.point, "point x0 as comma-separated coordinates");
}

// File config first, then command-line overrides.
RunConfig merge_config(const CommonOpts& o, const CLI::App* cmd) {
    RunConfig cfg;
    if (!o.config_file.empty()) cfg = RunConfig::from_file(o.config_file);
    auto set_if = [&](const char* flag, const std::string& key, const std::string& val) {
        if (cmd->count(flag) > 0 || !cfg.has(key)) cfg.kv[key] = val;
    };
    set_if("--out", "out", o.out);
    set_if("--dim", "dim", std::to_string(o.dim));
    set_if("--resolution", "resolution", std::to_string(o.resolution));
    set_if("--modes", "modes", std::to_string(o.modes));
    set_if("--eps", "eps", num(o.eps));
    set_if("--traces", "traces", std::to_string(o.traces));
    set_if("--seed", "seed", std::to_string(o.seed));
    set_if("--delta0", "delta0", num(o.delta0));
    set_if("--data", "data", o.data);
    set_if("--weight", "weight", num(o.weight));
    set_if("--eps-list", "eps_list", o.eps_list);
    set_if("--in", "in", o.input);
    set_if("--point", "point", o.point);
    return cfg;
}

int default_modes(int d) { return d == 2 ? 37 : 81; }

std::function<double(const Vec&)> boundary_datum(const std::string& name, int d) {
    Vec ed = Vec::Zero();
    ed[d - 1] = 0.5;
    if (name == "qnu")
        return [ed](const Vec& x) {
            double t = std::max(0.0, x.dot(ed));
            return t * t;
        };
    if (name == "qa") {
        double diag = 1.0 / (4.0 * d);
        return [diag, d](const Vec& x) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += x[k] * x[k];
            return diag * s;
        };
    }
    if (name == "qa_kernel")
        return [d](const Vec& x) { return 0.25 * x[d - 1] * x[d - 1]; };
    throw Error("unknown boundary datum '" + name + "' (qnu | qa | qa_kernel)");
}

Vec parse_point(const std::string& s, int d) {
    Vec p = Vec::Zero();
    std::stringstream ss(s);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',') && i < 3) p[i++] = std::stod(tok);
    require(i >= d, "point: expected " + std::to_string(d) + " coordinates");
    return p;
}

int cmd_verify_epi(const RunConfig& cfg) {
    std::string hash = config_hash(cfg.canonical());
    std::string out = cfg.str("out", "out");
    int dim = cfg.integer("dim", 0);
    int traces = cfg.integer("traces", 100);
    double eps = cfg.real("eps", 0.01);
    double delta0 = cfg.real("delta0", 0.1);
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));

    std::vector<int> dims = dim == 0 ? std::vector<int>{2, 3} : std::vector<int>{dim};
    json summary;
    summary["config"] = cfg.canonical();
    summary["config_hash"] = hash;
    bool all_ok = true;
    for (int d : dims) {
        int modes = cfg.integer("modes", 0);
        if (modes == 0) modes = default_modes(d);
        auto basis = make_basis(SphericalDomain::full(d), modes);
        auto cap = make_basis(SphericalDomain::cap(d, delta0), d + 6);
        // the indefinite singular family needs l <= 12 in d = 3 to resolve the
        // capacitary lens inside the admissible cone distance
        auto sing_basis = (d == 3 && !cfg.has("modes"))
                              ? make_basis(SphericalDomain::full(3), 169)
                              : basis;

        SuiteResult flat = run_flat_suite(d, traces, seed, basis, cap, delta0);
        SuiteResult sing = run_singular_suite(d, traces, eps, seed, sing_basis);
        write_file_atomic(out + "/epi_flat_d" + std::to_string(d) + ".csv",
                          suite_csv(flat, hash));
        write_file_atomic(out + "/epi_singular_d" + std::to_string(d) + ".csv",
                          suite_csv(sing, hash));
        summary["flat_d" + std::to_string(d)] = suite_summary(flat);
        summary["singular_d" + std::to_string(d)] = suite_summary(sing);
        all_ok = all_ok && flat.all_satisfied && sing.all_satisfied;
        std::printf("d=%d: flat %d/%d, singular %d/%d satisfied\n", d,
                    static_cast<int>(flat.rows.size()) - flat.violations,
                    static_cast<int>(flat.rows.size()),
                    static_cast<int>(sing.rows.size()) - sing.violations,
                    static_cast<int>(sing.rows.size()));
    }
    summary["all_satisfied"] = all_ok;
    write_file_atomic(out + "/epi_summary.json", summary.dump(2) + "\n");
    return all_ok ? 0 : 2;
}

int cmd_solve(const RunConfig& cfg) {
    std::string hash = config_hash(cfg.canonical());
    std::string out = cfg.str("out", "out");
    int d = cfg.integer("dim", 2);
    if (d == 0) d = 2;
    int n = cfg.integer("resolution", 129);
    Grid grid{d, 1.0, n};
    SolverConfig scfg;
    double w = cfg.real("weight", 0.0);
    if (w > 0.0)
        scfg.weight = [w](const Vec& x) { return 1.0 + w * std::sqrt(x.norm()); };
    SolveInfo info;
    GridFunction u = solve_obstacle(boundary_datum(cfg.str("data", "qnu"), d), scfg, grid, &info);
    std::filesystem::create_directories(out);
    u.save(out + "/solution.bin");
    json sidecar;
    sidecar["config"] = cfg.canonical();
    sidecar["config_hash"] = hash;
    sidecar["dim"] = d;
    sidecar["resolution"] = n;
    sidecar["sweeps"] = info.sweeps;
    sidecar["last_change"] = info.last_change;
    sidecar["converged"] = info.converged;
    write_file_atomic(out + "/solution.json", sidecar.dump(2) + "\n");
    write_file_atomic(out + "/free_boundary.csv",
                      free_boundary_csv(free_boundary_nodes(u), hash));
    std::printf("solved %dD n=%d in %d sweeps (last change %.3e)\n", d, n, info.sweeps,
                info.last_change);
    return 0;
}

int cmd_classify(const RunConfig& cfg) {
    std::string hash = config_hash(cfg.canonical());
    std::string out = cfg.str("out", "out");
    std::string in = cfg.str("in");
    require(!in.empty(), "classify: --in <solution.bin> is required");
    GridFunction u = GridFunction::load(in);
    int modes = cfg.integer("modes", 0);
    if (modes == 0) modes = default_modes(u.grid.d);
    auto basis = make_basis(SphericalDomain::full(u.grid.d), modes);
    GridGradient du(u);
    std::vector<Vec> fb = free_boundary_nodes(u);
    std::vector<Vec> pts;
    for (const Vec& p : fb) {
        bool room = true;
        for (int k = 0; k < u.grid.d; ++k)
            if (std::abs(p[k]) > u.grid.L - 16.0 * u.grid.h()) room = false;
        if (room) pts.push_back(p);
    }
    std::vector<PointClassification> rows(pts.size());
    parallel_for(static_cast<int>(pts.size()),
                 [&](int i) { rows[i] = classify_point(u, du, pts[i], basis); });
    write_file_atomic(out + "/classification.csv", classification_csv(rows, hash));
    std::printf("classified %d free-boundary points\n", static_cast<int>(rows.size()));
    return 0;
}

int cmd_decay(const RunConfig& cfg) {
    std::string hash = config_hash(cfg.canonical());
    std::string out = cfg.str("out", "out");
    std::string in = cfg.str("in");
    require(!in.empty(), "decay: --in <solution.bin> is required");
    GridFunction u = GridFunction::load(in);
    int modes = cfg.integer("modes", 0);
    if (modes == 0) modes = default_modes(u.grid.d);
    auto basis = make_basis(SphericalDomain::full(u.grid.d), modes);
    GridGradient du(u);
    Vec x0 = parse_point(cfg.str("point", "0,0,0"), u.grid.d);
    double density = weiss_density(u, du, x0, basis);
    DecaySeries series = decay_series(u, du, x0, basis, density);
    write_file_atomic(out + "/decay.csv", decay_csv(series, hash));
    json j;
    j["config_hash"] = hash;
    j["density"] = density;
    j["r"] = series.r;
    j["e"] = series.e;
    j["f"] = series.f;
    write_file_atomic(out + "/decay.json", j.dump(2) + "\n");
    std::printf("decay series at (%g, %g, %g): %d scales, density %.8f\n", x0[0], x0[1], x0[2],
                static_cast<int>(series.r.size()), density);
    return 0;
}

int cmd_sharpness(const RunConfig& cfg) {
    std::string hash = config_hash(cfg.canonical());
    std::string out = cfg.str("out", "out");
    int d = cfg.integer("dim", 3);
    if (d == 0 || d == 2) d = 3;
    std::vector<double> eps = cfg.reals("eps_list", {0.16, 0.08, 0.04, 0.02, 0.01});
    SharpnessTable t = sharpness_scan(d, eps);
    write_file_atomic(out + "/sharpness.csv", sharpness_csv(t, hash));
    json j;
    j["config_hash"] = hash;
    j["slope_R"] = t.slope_R;
    j["slope_gradR"] = t.slope_gradR;
    j["slope_measure"] = t.slope_measure;
    j["slope_dist"] = t.slope_dist;
    j["ls_slope_R"] = t.ls_slope_R;
    j["ls_slope_gradR"] = t.ls_slope_gradR;
    j["ls_slope_measure"] = t.ls_slope_measure;
    j["ls_slope_dist"] = t.ls_slope_dist;
    j["max_ratio_49"] = t.max_ratio_49;
    write_file_atomic(out + "/sharpness.json", j.dump(2) + "\n");
    std::printf("sharpness d=%d: slopes R=%.3f gradR=%.3f measure=%.3f dist=%.3f\n", d, t.slope_R,
                t.slope_gradR, t.slope_measure, t.slope_dist);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"obstacle-epi: obstacle-problem free-boundary verification lab"};
    app.require_subcommand(1);
    CommonOpts o;
    CLI::App* verify = app.add_subcommand("verify-epi", "run the epiperimetric suites");
    CLI::App* solve = app.add_subcommand("solve", "solve the obstacle problem on a box");
    CLI::App* classify = app.add_subcommand("classify", "classify free-boundary points");
    CLI::App* decay = app.add_subcommand("decay", "Weiss decay series at a point");
    CLI::App* sharp = app.add_subcommand("sharpness", "borderline-example scaling scan");
    for (CLI::App* c : {verify, solve, classify, decay, sharp}) add_common(c, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    try {
        if (verify->parsed()) return cmd_verify_epi(merge_config(o, verify));
        if (solve->parsed()) return cmd_solve(merge_config(o, solve));
        if (classify->parsed()) return cmd_classify(merge_config(o, classify));
        if (decay->parsed()) return cmd_decay(merge_config(o, decay));
        if (sharp->parsed()) return cmd_sharpness(merge_config(o, sharp));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

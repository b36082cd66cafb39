// Command-line front end: validate, simulate, eigen, sweep, reproduce.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfv/analytics.hpp"
#include "gfv/config.hpp"
#include "gfv/experiments.hpp"
#include "gfv/io.hpp"

namespace fs = std::filesystem;
using namespace gfv;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

std::size_t worker_count(std::size_t jobs)
{
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GFV_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

/// Runs fn(index) for every index on a bounded pool; results land in caller-owned slots.
template <class Fn>
void parallel_for(std::size_t jobs, Fn fn)
{
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = worker_count(jobs);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t j = next++; j < jobs; j = next++) fn(j);
        });
    }
    for (auto& t : pool) t.join();
}

nlohmann::json kernel_json(const KernelReport& r)
{
    return {{"stochastic", r.stochastic},
            {"irreducible", r.irreducible},
            {"scc_count", r.scc_count},
            {"scc_membership", r.scc_membership},
            {"heterogeneity_ok", r.heterogeneity_ok},
            {"max_row_deviation", r.max_row_deviation}};
}

nlohmann::json eigen_json(const EigenPair& e, double duality)
{
    return {{"lambda", e.lambda},
            {"lambda_adjoint", e.lambda_adjoint},
            {"growth_factor", e.growth_factor},
            {"dt", e.dt},
            {"residual_direct", e.residual_direct},
            {"residual_adjoint", e.residual_adjoint},
            {"iterations_direct", e.iterations_direct},
            {"iterations_adjoint", e.iterations_adjoint},
            {"duality_residual", duality},
            {"converged", e.converged}};
}

void warn_all(const std::vector<std::string>& warnings)
{
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_validate(const RunConfig& cfg)
{
    Setup s = build_setup(cfg);
    nlohmann::json out;
    out["config"] = to_json(cfg);
    out["kernel"] = kernel_json(s.kernel_report);
    out["dt"] = s.stepper.dt();
    out["max_division_dt"] = s.stepper.max_division_dt();
    out["warnings"] = s.warnings;
    std::cout << out.dump(2) << "\n";
    warn_all(s.warnings);
    return exit_ok;
}

int cmd_eigen(const RunConfig& cfg, const fs::path& out, const std::string& dense_path)
{
    Setup s = build_setup(cfg);
    warn_all(s.warnings);
    const EigenPair e = solve_eigenproblem(s.stepper, eigen_options(cfg));
    const double duality = duality_residual(s.stepper, e);
    std::string header = file_header(cfg);
    if (!e.converged) header += "# partial: power iteration did not converge\n";
    write_file(out / "eigen.csv", [&](std::ostream& os) { write_eigenpair(os, header, s.stepper.grid(), e); });
    if (!dense_path.empty()) {
        const auto matrix = s.stepper.dense();
        write_file(dense_path, [&](std::ostream& os) { write_dense(os, matrix, s.stepper.op().unknowns()); });
    }
    std::cout << eigen_json(e, duality).dump(2) << "\n";
    if (!e.converged) {
        std::cerr << "error: power iteration did not converge within " << cfg.eigen.max_iter << " iterations\n";
        return exit_numerical;
    }
    return exit_ok;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out)
{
    Setup s = build_setup(cfg);
    warn_all(s.warnings);
    std::string header = file_header(cfg);
    std::optional<EigenPair> eig;
    bool partial = false;
    if (s.kernel_report.irreducible) {
        eig = solve_eigenproblem(s.stepper, eigen_options(cfg));
        if (!eig->converged) {
            partial = true;
            header += "# partial: eigenpair did not converge; entropy columns are empty\n";
            eig.reset();
        }
    }
    Schedule schedule = cfg.schedule;
    if (!cfg.output.emit_snapshots) schedule.snapshot_times.clear();
    const Trajectory traj = simulate(s.stepper, schedule, initial_profile(s.stepper.grid(), s.stepper.op().features(),
                                                                        cfg.initial),
                                     eig ? &*eig : nullptr);
    write_file(out / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics(os, header, traj); });
    for (std::size_t q = 0; q < traj.snapshots.size(); ++q) {
        const auto name = "snapshot_" + std::to_string(q) + ".csv";
        write_file(out / name,
                   [&](std::ostream& os) { write_snapshot(os, header, s.stepper.grid(), traj.snapshots[q]); });
    }
    nlohmann::json summary = {{"t_end", traj.rows.back().t}, {"log_mass", traj.rows.back().log_mass}};
    if (traj.rows.back().t >= cfg.schedule.t_end - traj.dt) {
        try {
            const Estimates est = estimates_at(traj, cfg.schedule.t_end);
            summary["lambda_n"] = est.lambda_n;
            summary["lambda_tau"] = est.lambda_tau;
            summary["lambda_gamma"] = est.lambda_gamma;
        } catch (const NumericalError& e) {
            summary["estimators"] = e.what();
        }
    }
    if (eig) summary["lambda_eigen"] = eig->lambda;
    std::cout << summary.dump(2) << "\n";
    return partial ? exit_numerical : exit_ok;
}

int cmd_sweep(const RunConfig& base, const fs::path& out, const std::string& param, const std::vector<double>& values)
{
    if (param != "p" && param != "death_factor") {
        throw ValidationError("sweep: --param must be p or death_factor");
    }
    if (values.empty()) throw ValidationError("sweep: --values is empty");
    if (param == "p" && !base.model.kernel.name) {
        throw ValidationError("sweep: p has no effect on an explicit kernel matrix");
    }
    std::vector<RunConfig> cells;
    for (double v : values) {
        RunConfig c = base;
        (param == "p" ? c.model.kernel.p : c.model.death_factor) = v;
        validate_config(c);
        cells.push_back(std::move(c));
    }
    std::vector<SweepRow> rows(cells.size());
    std::mutex log;
    parallel_for(cells.size(), [&](std::size_t j) {
        SweepRow& r = rows[j];
        r.value = values[j];
        try {
            Setup s = build_setup(cells[j]);
            const EigenPair e = solve_eigenproblem(s.stepper, eigen_options(cells[j]));
            r.lambda_eigen = e.lambda;
            r.converged = e.converged;
            const Trajectory traj = simulate(
                s.stepper, cells[j].schedule,
                initial_profile(s.stepper.grid(), s.stepper.op().features(), cells[j].initial));
            r.lambda_n = estimate_lambda_n(traj, cells[j].schedule.t_end);
            if (!r.converged) r.status = "eigen_not_converged";
        } catch (const std::exception& e) {
            r.status = std::string("failed: ") + e.what();
            std::lock_guard<std::mutex> lock(log);
            std::cerr << "error: " << param << "=" << values[j] << ": " << e.what() << "\n";
        }
    });
    write_file(out / "sweep.csv", [&](std::ostream& os) { write_sweep(os, file_header(base), param, rows); });
    const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == "ok"; });
    for (const auto& r : rows) {
        std::printf("%s=%-10.6g lambda_eigen=%-12.8g lambda_n=%-12.8g %s\n", param.c_str(), r.value, r.lambda_eigen,
                    r.lambda_n, r.status.c_str());
    }
    return all_ok ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

int reproduce_table1(const GridConfig& grid, const fs::path& out)
{
    const auto cases = table1_cases();
    std::vector<Estimates> est(cases.size());
    std::vector<RunConfig> cfgs;
    for (const auto& c : cases) {
        cfgs.push_back(standard_config(c.kernel, {1, 2, 3}, 0.5, grid, table1_t_end));
    }
    parallel_for(cases.size(), [&](std::size_t j) {
        Setup s = build_setup(cfgs[j]);
        const Trajectory traj = simulate(s.stepper, cfgs[j].schedule,
                                         initial_profile(s.stepper.grid(), 3, cfgs[j].initial));
        est[j] = estimates_at(traj, table1_t_end);
        write_file(out / ("table1_" + cases[j].name + "_diagnostics.csv"),
                   [&](std::ostream& os) { write_diagnostics(os, file_header(cfgs[j]), traj); });
    });
    nlohmann::json header = {{"reproduce", "table1"}, {"grid", {{"N", grid.N}, {"k", grid.k}}},
                             {"t_end", table1_t_end}};
    write_file(out / "table1.csv", [&](std::ostream& os) {
        os << file_header(header);
        CsvWriter w(os);
        w.row({"case", "lambda_n", "lambda_n_ref", "lambda_tau", "lambda_tau_ref", "lambda_gamma", "lambda_gamma_ref"});
        for (std::size_t j = 0; j < cases.size(); ++j) {
            w.row({cases[j].name, format_double(est[j].lambda_n), format_double(cases[j].reference[0]),
                   format_double(est[j].lambda_tau), format_double(cases[j].reference[1]),
                   format_double(est[j].lambda_gamma), format_double(cases[j].reference[2])});
        }
    });
    std::printf("%-11s %10s %8s %10s %8s %10s %8s\n", "case", "lambda_n", "ref", "lambda_tau", "ref", "lambda_gam",
                "ref");
    for (std::size_t j = 0; j < cases.size(); ++j) {
        std::printf("%-11s %10.5f %8.3f %10.5f %8.3f %10.5f %8.3f\n", cases[j].name.c_str(), est[j].lambda_n,
                    cases[j].reference[0], est[j].lambda_tau, cases[j].reference[1], est[j].lambda_gamma,
                    cases[j].reference[2]);
    }
    return exit_ok;
}

int reproduce_figure2(const GridConfig& grid, const fs::path& out)
{
    const auto cases = table1_cases();
    parallel_for(cases.size(), [&](std::size_t j) {
        RunConfig cfg = standard_config(cases[j].kernel, {1, 2, 3}, 0.5, grid, 10.0);
        cfg.schedule.snapshot_times = {0.0, 1.0, 2.0, 5.0, 10.0};
        Setup s = build_setup(cfg);
        std::optional<EigenPair> eig;
        if (s.kernel_report.irreducible) eig = solve_eigenproblem(s.stepper, eigen_options(cfg));
        const Trajectory traj = simulate(s.stepper, cfg.schedule, initial_profile(s.stepper.grid(), 3, cfg.initial),
                                         eig ? &*eig : nullptr);
        const auto dir = out / ("figure2_" + cases[j].name);
        write_file(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics(os, file_header(cfg), traj); });
        for (std::size_t q = 0; q < traj.snapshots.size(); ++q) {
            write_file(dir / ("snapshot_" + std::to_string(q) + ".csv"), [&](std::ostream& os) {
                write_snapshot(os, file_header(cfg), s.stepper.grid(), traj.snapshots[q]);
            });
        }
        if (eig) {
            write_file(dir / "eigen.csv",
                       [&](std::ostream& os) { write_eigenpair(os, file_header(cfg), s.stepper.grid(), *eig); });
        }
    });
    std::printf("figure2: wrote %s/figure2_{non-mixing,mixing}\n", out.string().c_str());
    return exit_ok;
}

int reproduce_conjecture(const GridConfig& grid, const fs::path& out, const std::string& name,
                         const std::vector<ConjectureCase>& cases)
{
    std::vector<ConjectureRecord> records(cases.size());
    parallel_for(cases.size(), [&](std::size_t j) {
        RunConfig cfg = standard_config(cases[j].kernel, {1, 2}, cases[j].p, grid, conjecture_t_end);
        cfg.schedule.snapshot_times = {conjecture_t_end};
        Setup s = build_setup(cfg);
        const Trajectory traj = simulate(s.stepper, cfg.schedule, initial_profile(s.stepper.grid(), 2, cfg.initial));
        const ConjectureRun run = conjecture_run(s.stepper, traj, conjecture_t_end);
        const KernelFamily family = *parse_kernel_family(cases[j].kernel);
        records[j] = {family, cases[j].p, evaluate_conjecture(family, cases[j].p, 1.0, 2.0, run), run.final_shares};
        const auto dir = out / (name + "_" + cases[j].label);
        write_file(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics(os, file_header(cfg), traj); });
        write_file(dir / "snapshot_0.csv", [&](std::ostream& os) {
            write_snapshot(os, file_header(cfg), s.stepper.grid(), traj.snapshots.at(0));
        });
    });
    nlohmann::json header = {{"reproduce", name}, {"grid", {{"N", grid.N}, {"k", grid.k}}},
                             {"t_end", conjecture_t_end}, {"features", {1.0, 2.0}}};
    write_file(out / (name + "_conjecture.csv"),
               [&](std::ostream& os) { write_conjecture(os, file_header(header), records); });
    for (const auto& r : records) {
        std::printf("%-13s p=%.4f lambda=%.5f predicted=%.5f N1=%s N2=%s -> %s\n", family_name(r.family), r.p,
                    r.comparison.measured_lambda, r.comparison.predicted_lambda, to_string(r.comparison.measured[0]),
                    to_string(r.comparison.measured[1]), to_string(r.comparison.outcome));
    }
    return exit_ok;
}

std::vector<double> parse_values(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("sweep: cannot parse value '" + item + "'");
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Growth-fragmentation solver with trait variability"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;

    auto* validate = app.add_subcommand("validate", "Check a configuration and report kernel properties (JSON)");
    validate->add_option("--config", config_path, "Run configuration (JSON)")->required();

    auto* simulate_cmd = app.add_subcommand("simulate", "Time-step the population and write diagnostics");
    simulate_cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    simulate_cmd->add_option("--out", out_dir, "Output directory (default: output.directory)");

    std::string dense_path;
    auto* eigen = app.add_subcommand("eigen", "Compute the Malthus parameter and eigenvectors");
    eigen->add_option("--config", config_path, "Run configuration (JSON)")->required();
    eigen->add_option("--out", out_dir, "Output directory (default: output.directory)");
    eigen->add_option("--dense", dense_path, "Also dump the dense step matrix (small grids only)");

    std::string param, values_text;
    auto* sweep = app.add_subcommand("sweep", "Eigenvalue and simulated growth rate over a parameter");
    sweep->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sweep->add_option("--out", out_dir, "Output directory (default: output.directory)");
    sweep->add_option("--param", param, "p (kernel parameter) or death_factor")->required();
    sweep->add_option("--values", values_text, "Comma-separated values")->required();

    std::string target, preset = "desk";
    auto* reproduce = app.add_subcommand("reproduce", "Canned experiments: table1, figure2, figure4, figure5");
    reproduce->add_option("target", target, "table1 | figure2 | figure4 | figure5")
        ->required()
        ->check(CLI::IsMember({"table1", "figure2", "figure4", "figure5"}));
    reproduce->add_option("--config", config_path, "Configuration whose grid is used (overrides --preset)");
    reproduce->add_option("--preset", preset, "Grid preset: desk (N=600, k=50) or full (N=2501, k=200)")
        ->check(CLI::IsMember({"desk", "full"}));
    reproduce->add_option("--out", out_dir, "Output directory (default: out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*reproduce) {
            GridConfig grid = preset_grid(preset);
            if (!config_path.empty()) grid = parse_config(config_path).grid;
            const fs::path out = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
            if (target == "table1") return reproduce_table1(grid, out);
            if (target == "figure2") return reproduce_figure2(grid, out);
            if (target == "figure4") return reproduce_conjecture(grid, out, "figure4", threshold_cases());
            return reproduce_conjecture(grid, out, "figure5", panel_cases());
        }
        const RunConfig cfg = parse_config(config_path);
        const fs::path out = out_dir.empty() ? fs::path(cfg.output.directory) : fs::path(out_dir);
        if (*validate) return cmd_validate(cfg);
        if (*simulate_cmd) return cmd_simulate(cfg, out);
        if (*eigen) return cmd_eigen(cfg, out, dense_path);
        if (*sweep) return cmd_sweep(cfg, out, param, parse_values(values_text));
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    }
    return exit_ok;
}

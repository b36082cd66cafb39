#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gfv/config.hpp"
#include "gfv/io.hpp"

using namespace gfv;

namespace {

std::string error_of(const std::string& text)
{
    try {
        parse_config_text(text);
    } catch (const ValidationError& e) {
        return e.what();
    } catch (const std::invalid_argument& e) {
        return std::string("invalid_argument: ") + e.what();
    }
    return "";
}

std::vector<std::string> split_lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

const char* small_config = R"({
  "grid": {"N": 60, "k": 12},
  "model": {"features": [1, 2], "kernel": {"name": "irreducible"}},
  "schedule": {"t_end": 2, "record_dt": 0.1, "snapshot_times": [0, 1]}
})";

} // namespace

TEST(Config, DefaultsFollowPreset)
{
    const RunConfig full = parse_config_text("{}");
    EXPECT_EQ(full.grid.N, 2501u);
    EXPECT_EQ(full.grid.k, 200u);
    EXPECT_EQ(full.model.features, (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(full.initial.a, 30.0);
    EXPECT_EQ(full.initial.b_exp, 60.0);
    const RunConfig desk = parse_config_text(R"({"preset": "desk"})");
    EXPECT_EQ(desk.grid.N, 600u);
    EXPECT_EQ(desk.grid.k, 50u);
    const RunConfig custom = parse_config_text(R"({"preset": "custom", "grid": {"N": 30, "k": 6}})");
    EXPECT_EQ(custom.grid.N, 30u);
    EXPECT_NE(error_of(R"({"preset": "custom"})"), "");
    EXPECT_NE(error_of(R"({"preset": "huge"})").find("preset"), std::string::npos);

    // An explicit grid that departs from the preset is recorded as custom.
    EXPECT_EQ(parse_config_text(R"({"grid": {"N": 64, "k": 16}})").preset, "custom");
    EXPECT_EQ(parse_config_text(R"({"preset": "desk", "grid": {"k": 25}})").preset, "custom");
    EXPECT_EQ(parse_config_text(R"({"preset": "desk", "grid": {"N": 600, "k": 50}})").preset, "desk");
    EXPECT_EQ(full.preset, "full");
}

TEST(Config, ParseErrorReportsLine)
{
    const std::string text = "{\n  \"grid\": {\"N\": 60,\n    \"k\": }\n}";
    const std::string err = error_of(text);
    EXPECT_NE(err.find("parse error at line 3"), std::string::npos) << err;
}

TEST(Config, UnknownFieldsRejectedWithPath)
{
    EXPECT_NE(error_of(R"({"gird": {}})").find("'gird'"), std::string::npos);
    EXPECT_NE(error_of(R"({"model": {"kernel": {"nmae": "reducible"}}})").find("model.kernel.nmae"), std::string::npos);
    EXPECT_NE(error_of(R"({"schedule": {"tend": 3}})").find("schedule.tend"), std::string::npos);
}

TEST(Config, WrongTypeNamesField)
{
    EXPECT_NE(error_of(R"({"grid": {"N": "many"}})").find("grid.N"), std::string::npos);
    EXPECT_NE(error_of(R"({"model": {"features": 3}})").find("model.features"), std::string::npos);
}

TEST(Config, ModelInvariantsChecked)
{
    // Non-square kernel.
    EXPECT_NE(error_of(R"({"grid": {"N": 20, "k": 4}, "model": {"features": [1, 2],
        "kernel": {"matrix": [[0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]}}})"),
              "");
    // Rows not summing to one.
    EXPECT_NE(error_of(R"({"grid": {"N": 20, "k": 4}, "model": {"features": [1, 2],
        "kernel": {"matrix": [[0.5, 0.6], [0.2, 0.8]]}}})")
                  .find("sum to 1"),
              std::string::npos);
    // Mutation proportion outside (0, 1).
    EXPECT_NE(error_of(R"({"grid": {"N": 20, "k": 4}, "model": {"features": [1, 2],
        "kernel": {"name": "fast_to_slow", "p": 1.5}}})")
                  .find("p must lie in (0, 1)"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"model": {"kernel": {"name": "fast_to_slow", "matrix": [[1]]}}})"), "");
    EXPECT_NE(error_of(R"({"model": {"kernel": {"name": "chaotic"}}})").find("chaotic"), std::string::npos);
    EXPECT_NE(error_of(R"({"model": {"death_factor": 0}})").find("death factor"), std::string::npos);
    EXPECT_NE(error_of(R"({"model": {"features": [2, 1]}})"), "");
    EXPECT_NE(error_of(R"({"grid": {"N": 3, "k": 5}})"), "");
    EXPECT_NE(error_of(R"({"schedule": {"t_end": 2, "snapshot_times": [3]}})"), "");
    EXPECT_NE(error_of(R"({"initial": {"b_exp": 0}})"), "");
    EXPECT_NE(error_of(R"({"eigen": {"tol": -1}})"), "");
}

TEST(Config, ResolvedJsonRoundTrips)
{
    const RunConfig cfg = parse_config_text(small_config);
    const auto j = to_json(cfg);
    const RunConfig again = parse_config_text(j.dump());
    EXPECT_EQ(to_json(again), j);
    RunConfig seeded = cfg;
    seeded.eigen.seed = 42;
    EXPECT_EQ(parse_config_text(to_json(seeded).dump()).eigen.seed, std::optional<std::uint64_t>(42));
}

TEST(Config, ShippedConfigsParse)
{
    std::size_t count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(GFV_SOURCE_DIR "/configs")) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(parse_config(entry.path().string())) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 5u);
    EXPECT_THROW(parse_config("/nonexistent/config.json"), ValidationError);
}

TEST(Config, SetupCarriesKernelReport)
{
    const RunConfig cfg =
        parse_config_text(R"({"grid": {"N": 20, "k": 4}, "model": {"kernel": {"name": "reducible"}}})");
    const gfv::Setup setup = build_setup(cfg);
    EXPECT_FALSE(setup.kernel_report.irreducible);
    EXPECT_FALSE(setup.warnings.empty());
    EXPECT_EQ(eigen_options(cfg).power.tol, 1e-10);
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

TEST(Csv, DoubleFormatRoundTrips)
{
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    for (int s = 0; s < 1000; ++s) {
        const double x = std::exp(u(rng)) * (s % 2 ? 1 : -1);
        EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
    }
}

TEST(Csv, FieldQuoting)
{
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
    std::ostringstream os;
    CsvWriter(os).row({"x", "y,z"});
    EXPECT_EQ(os.str(), "x,\"y,z\"\r\n");
}

TEST(Csv, HeaderEmbedsConfigAndVersion)
{
    const RunConfig cfg = parse_config_text(small_config);
    const auto lines = split_lines(file_header(cfg));
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "# gfv 1.0.0");
    ASSERT_EQ(lines[1].rfind("# config: ", 0), 0u);
    EXPECT_EQ(nlohmann::json::parse(lines[1].substr(10)), to_json(cfg));
}

class CsvOutputs : public ::testing::Test {
protected:
    void SetUp() override
    {
        cfg = parse_config_text(small_config);
        header = file_header(cfg);
    }
    Trajectory run() const
    {
        const gfv::Setup setup = build_setup(cfg);
        const Grid& g = setup.stepper.grid();
        const EigenPair pair = solve_eigenproblem(setup.stepper, eigen_options(cfg));
        return simulate(setup.stepper, cfg.schedule, initial_profile(g, cfg.model.features.size(), cfg.initial), &pair);
    }
    RunConfig cfg;
    std::string header;
};

TEST_F(CsvOutputs, DiagnosticsColumns)
{
    std::ostringstream os;
    const Trajectory traj = run();
    write_diagnostics(os, header, traj);
    const auto lines = split_lines(os.str());
    ASSERT_GE(lines.size(), 4u);
    EXPECT_EQ(lines[2], "t,log_mass,lambda_n,lambda_tau,lambda_gamma,entropy_sq,dissipation_sq,l1_phi,slice_f0_x1,"
                        "slice_f1_x1\r");
    EXPECT_EQ(lines.size(), 3 + traj.rows.size());
    for (std::size_t q = 3; q < lines.size(); ++q) {
        EXPECT_EQ(std::count(lines[q].begin(), lines[q].end(), ','), 9);
        EXPECT_EQ(lines[q].back(), '\r');
    }
    // Parse back one row.
    std::istringstream row(lines.back());
    std::string cell;
    std::getline(row, cell, ',');
    EXPECT_EQ(std::strtod(cell.c_str(), nullptr), traj.rows.back().t);
    std::getline(row, cell, ',');
    EXPECT_EQ(std::strtod(cell.c_str(), nullptr), traj.rows.back().log_mass);
}

TEST_F(CsvOutputs, SnapshotAndEigenpairColumns)
{
    const Trajectory traj = run();
    ASSERT_EQ(traj.snapshots.size(), 2u);
    const Grid g(cfg.grid.N, cfg.grid.k);
    std::ostringstream snap;
    write_snapshot(snap, header, g, traj.snapshots[1]);
    auto lines = split_lines(snap.str());
    EXPECT_EQ(lines[2].rfind("# t: ", 0), 0u);
    EXPECT_EQ(lines[3], "feature,x,density,log_scale\r");
    EXPECT_EQ(lines.size(), 4 + 2 * g.size());

    const gfv::Setup setup = build_setup(cfg);
    const EigenPair pair = solve_eigenproblem(setup.stepper);
    std::ostringstream eig;
    write_eigenpair(eig, header, g, pair);
    lines = split_lines(eig.str());
    EXPECT_EQ(lines[2], "# lambda: " + format_double(pair.lambda));
    EXPECT_EQ(lines[3], "feature,x,N,phi\r");
    EXPECT_EQ(lines.size(), 4 + 2 * g.size());
}

TEST_F(CsvOutputs, IdenticalRunsGiveIdenticalBytes)
{
    std::ostringstream a, b;
    write_diagnostics(a, header, run());
    write_diagnostics(b, header, run());
    EXPECT_EQ(a.str(), b.str());
}

TEST(Csv, SweepAndConjectureTables)
{
    std::ostringstream sweep;
    write_sweep(sweep, "", "p", {{0.5, 1.0, 1.01, true, "ok"}, {0.9, NAN, NAN, false, "not converged"}});
    auto lines = split_lines(sweep.str());
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "p,lambda_eigen,lambda_n,eigen_converged,status\r");
    EXPECT_EQ(lines[2], "0.90000000000000002,nan,nan,false,not converged\r");

    ConjectureRun run;
    run.lambda = 2.0;
    run.final_shares = {0.0, 1.0};
    run.courant = {0.5, 1.0};
    run.behaviors.resize(2);
    run.behaviors[1].kind = BehaviorVerdict::Class::oscillating;
    ConjectureRecord rec;
    rec.family = KernelFamily::slow_to_fast;
    rec.p = 0.5;
    rec.comparison = evaluate_conjecture(rec.family, rec.p, 1.0, 2.0, run);
    rec.shares = run.final_shares;
    std::ostringstream conj;
    write_conjecture(conj, "", {rec});
    lines = split_lines(conj.str());
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[1].rfind("slow_to_fast,0.5,0,1,zero,periodic,2,zero,periodic,2,0,", 0), 0u) << lines[1];
    EXPECT_NE(lines[1].find(",agrees"), std::string::npos);
}

TEST(Csv, WriteFileCreatesDirectories)
{
    const auto dir = std::filesystem::temp_directory_path() / "gfv_io_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_file(dir / "out.csv", [](std::ostream& os) { os << "x\r\n"; });
    std::ifstream in(dir / "out.csv");
    std::string s;
    std::getline(in, s);
    EXPECT_EQ(s, "x\r");
    std::filesystem::remove_all(dir.parent_path());
}

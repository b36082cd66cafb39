#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "gfv/analytics.hpp"
#include "gfv/config.hpp"
#include "gfv/dynamics.hpp"
#include "gfv/eigenpair.hpp"
#include "gfv/errors.hpp"

namespace gfv {

/// Shortest round-trip form with 17 significant digits; "nan" for undefined values.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// RFC 4180 quoting for text fields.
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Comment lines opening every output file: tool version and the resolved configuration.
inline std::string file_header(const nlohmann::json& config)
{
    return std::string("# gfv ") + version + "\n# config: " + config.dump() + "\n";
}

inline std::string file_header(const RunConfig& cfg) { return file_header(to_json(cfg)); }

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void row(const std::vector<std::string>& fields)
    {
        for (std::size_t q = 0; q < fields.size(); ++q) {
            if (q) os_ << ',';
            os_ << csv_field(fields[q]);
        }
        os_ << "\r\n";
    }

private:
    std::ostream& os_;
};

inline std::vector<std::string> diagnostics_columns(std::size_t features)
{
    std::vector<std::string> cols{"t",           "log_mass",       "lambda_n", "lambda_tau",
                                  "lambda_gamma", "entropy_sq", "dissipation_sq", "l1_phi"};
    for (std::size_t i = 0; i < features; ++i) {
        cols.push_back("slice_f" + std::to_string(i) + "_x1");
    }
    return cols;
}

inline void write_diagnostics(std::ostream& os, const std::string& header, const Trajectory& traj)
{
    os << header;
    CsvWriter w(os);
    const std::size_t features = traj.rows.empty() ? 0 : traj.rows.front().slices.size();
    w.row(diagnostics_columns(features));
    for (const auto& r : traj.rows) {
        std::vector<std::string> f{format_double(r.t),          format_double(r.log_mass),
                                   format_double(r.lambda_n),   format_double(r.lambda_tau),
                                   format_double(r.lambda_gamma), format_double(r.entropy_sq),
                                   format_double(r.dissipation_sq), format_double(r.l1_phi)};
        for (double s : r.slices) f.push_back(format_double(s));
        w.row(f);
    }
}

/// One snapshot: columns feature, x, density, log_scale. The true density is density * exp(log_scale).
inline void write_snapshot(std::ostream& os, const std::string& header, const Grid& grid, const Snapshot& s)
{
    os << header;
    os << "# t: " << format_double(s.t) << "\n";
    CsvWriter w(os);
    w.row({"feature", "x", "density", "log_scale"});
    for (std::size_t i = 0; i < s.density.features(); ++i) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            w.row({std::to_string(i), format_double(grid.node(m)), format_double(s.density(i, m)),
                   format_double(s.log_scale)});
        }
    }
}

inline void write_eigenpair(std::ostream& os, const std::string& header, const Grid& grid, const EigenPair& eig)
{
    os << header;
    os << "# lambda: " << format_double(eig.lambda) << "\n";
    CsvWriter w(os);
    w.row({"feature", "x", "N", "phi"});
    for (std::size_t i = 0; i < eig.N.features(); ++i) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            w.row({std::to_string(i), format_double(grid.node(m)), format_double(eig.N(i, m)),
                   format_double(eig.phi(i, m))});
        }
    }
}

struct SweepRow {
    double value = 0.0;
    double lambda_eigen = std::numeric_limits<double>::quiet_NaN();
    double lambda_n = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    std::string status = "ok";
};

inline void write_sweep(std::ostream& os, const std::string& header, const std::string& param,
                        const std::vector<SweepRow>& rows)
{
    os << header;
    CsvWriter w(os);
    w.row({param, "lambda_eigen", "lambda_n", "eigen_converged", "status"});
    for (const auto& r : rows) {
        w.row({format_double(r.value), format_double(r.lambda_eigen), format_double(r.lambda_n),
               r.converged ? "true" : "false", r.status});
    }
}

inline const char* family_name(KernelFamily f)
{
    switch (f) {
    case KernelFamily::reducible: return "reducible";
    case KernelFamily::irreducible: return "irreducible";
    case KernelFamily::homogeneous: return "homogeneous";
    case KernelFamily::slow_to_fast: return "slow_to_fast";
    case KernelFamily::fast_to_slow: return "fast_to_slow";
    }
    return "unknown";
}

struct ConjectureRecord {
    KernelFamily family = KernelFamily::slow_to_fast;
    double p = 0.0;
    ConjectureComparison comparison;
    std::vector<double> shares;
};

inline void write_conjecture(std::ostream& os, const std::string& header, const std::vector<ConjectureRecord>& rows)
{
    os << header;
    CsvWriter w(os);
    w.row({"family", "p", "p_low", "p_high", "predicted_N1", "predicted_N2", "predicted_lambda", "measured_N1",
           "measured_N2", "measured_lambda", "lambda_rel_error", "share_f0", "share_f1", "diffusion_limited_f0",
           "outcome"});
    for (const auto& r : rows) {
        const auto& c = r.comparison;
        w.row({family_name(r.family), format_double(r.p), format_double(c.predicted.p_low),
               format_double(c.predicted.p_high), to_string(c.predicted.slow), to_string(c.predicted.fast),
               format_double(c.predicted_lambda), to_string(c.measured.at(0)), to_string(c.measured.at(1)),
               format_double(c.measured_lambda), format_double(c.lambda_error), format_double(r.shares.at(0)),
               format_double(r.shares.at(1)), c.diffusion_limited.at(0) ? "true" : "false", to_string(c.outcome)});
    }
}

/// Writes a file, creating parent directories.
template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    fn(os);
    if (!os) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

} // namespace gfv

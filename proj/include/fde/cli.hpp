#pragma once

#include "fde/core.hpp"
#include "fde/problems.hpp"
#include "fde/solver.hpp"
#include "fde/stability.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fde::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_solver = 3;

inline constexpr const char* output_dir_env = "FDE_OUTPUT_DIR";

/// Everything needed to repeat one run.
struct RunSpec {
    std::string command = "solve";
    std::string problem = "linear";
    double alpha = 0.5;
    double lambda = -2.0;
    double a = 1.0;
    double mu = 4.0;
    std::vector<double> y0;  // empty: problem default
    double t0 = 0.0;
    double T = 2.0;
    std::vector<std::string> methods;
    std::vector<std::size_t> N;
    std::optional<double> r;
    std::size_t ref_factor = 8;
    std::vector<double> alphas;
    std::size_t n_theta = 2048;
    std::size_t truncation = default_piu_truncation;
    std::size_t repeats = 3;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    std::string jacobian = "analytic";
    std::string output;
    std::size_t jobs = 1;

    bool operator==(const RunSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const RunSpec& s) {
    j = nlohmann::json{{"command", s.command},
                       {"problem", s.problem},
                       {"alpha", s.alpha},
                       {"lambda", s.lambda},
                       {"a", s.a},
                       {"mu", s.mu},
                       {"y0", s.y0},
                       {"t0", s.t0},
                       {"T", s.T},
                       {"methods", s.methods},
                       {"N", s.N},
                       {"r", s.r ? nlohmann::json(*s.r) : nlohmann::json(nullptr)},
                       {"ref_factor", s.ref_factor},
                       {"alphas", s.alphas},
                       {"n_theta", s.n_theta},
                       {"truncation", s.truncation},
                       {"repeats", s.repeats},
                       {"newton_tol", s.newton_tol},
                       {"newton_max_iter", s.newton_max_iter},
                       {"jacobian", s.jacobian},
                       {"output", s.output},
                       {"jobs", s.jobs}};
}

inline void from_json(const nlohmann::json& j, RunSpec& s) {
    RunSpec d;
    s.command = j.value("command", d.command);
    s.problem = j.value("problem", d.problem);
    s.alpha = j.value("alpha", d.alpha);
    s.lambda = j.value("lambda", d.lambda);
    s.a = j.value("a", d.a);
    s.mu = j.value("mu", d.mu);
    s.y0 = j.value("y0", d.y0);
    s.t0 = j.value("t0", d.t0);
    s.T = j.value("T", d.T);
    s.methods = j.value("methods", d.methods);
    s.N = j.value("N", d.N);
    if (j.contains("r") && !j.at("r").is_null()) {
        s.r = j.at("r").get<double>();
    } else {
        s.r.reset();
    }
    s.ref_factor = j.value("ref_factor", d.ref_factor);
    s.alphas = j.value("alphas", d.alphas);
    s.n_theta = j.value("n_theta", d.n_theta);
    s.truncation = j.value("truncation", d.truncation);
    s.repeats = j.value("repeats", d.repeats);
    s.newton_tol = j.value("newton_tol", d.newton_tol);
    s.newton_max_iter = j.value("newton_max_iter", d.newton_max_iter);
    s.jacobian = j.value("jacobian", d.jacobian);
    s.output = j.value("output", d.output);
    s.jobs = j.value("jobs", d.jobs);
}

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Hash of the spec without the fields that do not affect results.
[[nodiscard]] inline std::string config_hash(const RunSpec& spec) {
    nlohmann::json j = spec;
    j.erase("output");
    j.erase("jobs");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
    return os.str();
}

[[nodiscard]] inline std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// -----------------------------------------------------------------------------
// Spec interpretation
// -----------------------------------------------------------------------------

[[nodiscard]] inline std::vector<MethodKind> parse_methods(const std::vector<std::string>& names) {
    std::vector<MethodKind> out;
    for (const auto& n : names) {
        auto m = parse_method(n);
        if (!m) {
            throw ConfigError("unknown method '" + n + "'; expected one of " +
                              std::string(method_list_text));
        }
        out.push_back(*m);
    }
    return out;
}

[[nodiscard]] inline std::vector<MethodKind> spec_methods(const RunSpec& spec) {
    if (spec.methods.empty()) {
        if (spec.command == "solve") return {MethodKind::FT};
        if (spec.command == "stability") {
            return {MethodKind::PIU, MethodKind::FT, MethodKind::NG, MethodKind::FBDF};
        }
        return {all_methods.begin(), all_methods.end()};
    }
    return parse_methods(spec.methods);
}

[[nodiscard]] inline FdeProblem make_problem(const RunSpec& spec) {
    if (spec.problem == "linear") {
        const auto y0 = spec.y0.empty() ? default_linear_y0(spec.alpha) : spec.y0;
        return make_linear(spec.alpha, spec.lambda, spec.t0, spec.T, y0);
    }
    if (spec.problem == "brusselator") {
        if (spec.y0.empty()) return make_brusselator(spec.alpha, spec.a, spec.mu, spec.T,
                                                     brusselator_default_x1,
                                                     brusselator_default_x2, spec.t0);
        if (spec.y0.size() != 2) throw ConfigError("brusselator takes two initial values");
        return make_brusselator(spec.alpha, spec.a, spec.mu, spec.T, spec.y0[0], spec.y0[1],
                                spec.t0);
    }
    throw ConfigError("unknown problem '" + spec.problem + "'; expected linear or brusselator");
}

[[nodiscard]] inline SolverConfig make_config(const RunSpec& spec) {
    SolverConfig c;
    c.newton_tol = spec.newton_tol;
    c.newton_max_iter = spec.newton_max_iter;
    if (spec.jacobian == "analytic") {
        c.jacobian_mode = JacobianMode::Analytic;
    } else if (spec.jacobian == "fd") {
        c.jacobian_mode = JacobianMode::ForwardDifference;
    } else {
        throw ConfigError("jacobian must be 'analytic' or 'fd'");
    }
    c.validate();
    return c;
}

[[nodiscard]] inline std::vector<std::size_t> spec_sizes(const RunSpec& spec) {
    if (!spec.N.empty()) return spec.N;
    if (spec.command == "solve") return {256};
    std::vector<std::size_t> out;
    for (std::size_t n = 32; n <= 2048; n *= 2) out.push_back(n);
    return out;
}

inline void check_doubling(const std::vector<std::size_t>& sizes) {
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        if (sizes[k + 1] != 2 * sizes[k]) throw ConfigError("N values must double");
    }
}

[[nodiscard]] inline Grid spec_grid(const RunSpec& spec, MethodKind m, std::size_t N) {
    if (spec.r && m != MethodKind::PIG) throw ConfigError("--r applies to PIG only");
    return default_grid(m, spec.alpha, spec.t0, spec.T, N, spec.r);
}

/// Output path inside the output directory (FDE_OUTPUT_DIR, else the working
/// directory) unless `name` is absolute.
[[nodiscard]] inline std::filesystem::path output_path(const std::string& name) {
    std::filesystem::path p(name);
    if (p.is_absolute()) return p;
    if (const char* dir = std::getenv(output_dir_env); dir != nullptr && *dir != '\0') {
        return std::filesystem::path(dir) / p;
    }
    return p;
}

class Sink {
public:
    Sink(const std::string& name, std::ostream& fallback) : out_(&fallback) {
        if (name.empty() || name == "-") return;
        path_ = output_path(name);
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        file_.open(path_);
        if (!file_) throw ConfigError("cannot open output file " + path_.string());
        out_ = &file_;
    }
    std::ostream& stream() { return *out_; }

private:
    std::ofstream file_;
    std::filesystem::path path_;
    std::ostream* out_;
};

inline void write_metadata(std::ostream& os, const RunSpec& spec,
                           const std::vector<std::pair<std::string, std::string>>& extra) {
    os << "# fdesolve " << version << '\n';
    os << "# command=" << spec.command << '\n';
    os << "# problem=" << spec.problem << '\n';
    for (const auto& [k, v] : extra) os << "# " << k << '=' << v << '\n';
    os << "# config_hash=" << config_hash(spec) << '\n';
    nlohmann::json j = spec;
    os << "# spec=" << j.dump() << '\n';
}

[[nodiscard]] inline std::string describe_y0(const FdeProblem& p) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < p.y0().size(); ++k) {
        if (k) os << ';';
        for (Eigen::Index i = 0; i < p.q(); ++i) os << (i ? " " : "") << format_number(p.y0()[k](i));
    }
    os << ']';
    return os.str();
}

// Runs fn(0..count-1) on up to `jobs` threads; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

[[nodiscard]] inline Vector reference_solution(const FdeProblem& problem, const RunSpec& spec,
                                               std::size_t finest, const SolverConfig& config) {
    if (spec.ref_factor < 1) throw ConfigError("ref_factor must be >= 1");
    const auto grid = Grid::uniform(problem.t0(), problem.T(), finest * spec.ref_factor);
    return solve(problem, MethodKind::FT, grid, config).final_value();
}

// -----------------------------------------------------------------------------
// Commands
// -----------------------------------------------------------------------------

inline int cmd_solve(const RunSpec& spec, std::ostream& out, std::ostream& err) {
    const auto methods = spec_methods(spec);
    if (methods.size() != 1) throw ConfigError("solve takes exactly one method");
    const auto sizes = spec_sizes(spec);
    if (sizes.size() != 1) throw ConfigError("solve takes exactly one N");
    const auto problem = make_problem(spec);
    const auto config = make_config(spec);
    const auto grid = spec_grid(spec, methods[0], sizes[0]);
    const auto sol = solve(problem, methods[0], grid, config);
    for (const auto& w : sol.stats.warnings) err << "warning: " << w << '\n';

    Sink sink(spec.output, out);
    auto& os = sink.stream();
    write_metadata(os, spec,
                   {{"method", std::string(to_string(methods[0]))},
                    {"alpha", format_number(spec.alpha)},
                    {"grid", grid.describe()},
                    {"y0", describe_y0(problem)}});
    os << 't';
    for (Eigen::Index i = 0; i < problem.q(); ++i) os << ",y" << i + 1;
    os << '\n';
    for (std::size_t n = 0; n < sol.times.size(); ++n) {
        os << format_number(sol.times[n]);
        for (Eigen::Index i = 0; i < problem.q(); ++i) os << ',' << format_number(sol.values[n](i));
        os << '\n';
    }
    return exit_ok;
}

struct ConvergenceTable {
    std::vector<MethodKind> methods;
    std::vector<std::size_t> sizes;
    std::vector<std::vector<double>> error;  // [method][N]
    std::vector<std::vector<double>> eoc;    // [method][N-1]
    std::vector<std::vector<double>> seconds;
};

/// Error at T in the max norm against the FT reference, per method and N.
[[nodiscard]] inline ConvergenceTable convergence_table(const RunSpec& spec) {
    ConvergenceTable t;
    t.methods = spec_methods(spec);
    t.sizes = spec_sizes(spec);
    check_doubling(t.sizes);
    const auto problem = make_problem(spec);
    const auto config = make_config(spec);
    for (auto m : t.methods) (void)spec_grid(spec, m, t.sizes.front());
    const Vector ref = reference_solution(problem, spec, t.sizes.back(), config);

    const std::size_t nm = t.methods.size();
    const std::size_t nn = t.sizes.size();
    t.error.assign(nm, std::vector<double>(nn, 0.0));
    t.seconds.assign(nm, std::vector<double>(nn, 0.0));
    parallel_for(nm * nn, spec.jobs, [&](std::size_t cell) {
        const std::size_t i = cell / nn;
        const std::size_t k = cell % nn;
        const auto sol = solve(problem, t.methods[i], spec_grid(spec, t.methods[i], t.sizes[k]), config);
        t.error[i][k] = (sol.final_value() - ref).lpNorm<Eigen::Infinity>();
        t.seconds[i][k] = sol.stats.wall_seconds;
    });
    for (std::size_t i = 0; i < nm; ++i) {
        std::vector<std::pair<std::size_t, double>> e;
        for (std::size_t k = 0; k < nn; ++k) e.emplace_back(t.sizes[k], t.error[i][k]);
        t.eoc.push_back(fde::eoc(e));
    }
    return t;
}

inline int cmd_convergence(const RunSpec& spec, std::ostream& out, std::ostream&) {
    const auto t = convergence_table(spec);
    Sink sink(spec.output, out);
    auto& os = sink.stream();
    std::string names;
    for (auto m : t.methods) names += (names.empty() ? "" : " ") + std::string(to_string(m));
    write_metadata(os, spec,
                   {{"methods", names},
                    {"alpha", format_number(spec.alpha)},
                    {"reference", "FT uniform N=" + std::to_string(t.sizes.back() * spec.ref_factor)},
                    {"norm", "max at T"}});
    os << 'N';
    for (auto m : t.methods) os << ',' << to_string(m) << "_error," << to_string(m) << "_eoc";
    os << '\n';
    for (std::size_t k = 0; k < t.sizes.size(); ++k) {
        os << t.sizes[k];
        for (std::size_t i = 0; i < t.methods.size(); ++i) {
            os << ',' << format_number(t.error[i][k]) << ',';
            if (k > 0) os << format_number(t.eoc[i][k - 1]);
        }
        os << '\n';
    }
    return exit_ok;
}

[[nodiscard]] inline std::string stability_file_name(MethodKind m, double alpha) {
    std::ostringstream os;
    os << "stability_" << to_string(m) << "_alpha" << alpha << ".csv";
    return os.str();
}

inline int cmd_stability(const RunSpec& spec, std::ostream& out, std::ostream&) {
    const auto methods = spec_methods(spec);
    std::vector<double> alphas = spec.alphas.empty() ? std::vector<double>{spec.alpha} : spec.alphas;
    for (double a : alphas) validate_order(a);
    for (auto m : methods) {
        if (m == MethodKind::PIG) {
            throw ConfigError("PIG has no convolution structure; stability analysis not applicable");
        }
    }
    for (auto m : methods) {
        for (double a : alphas) {
            const GeneratingFunction gf(m, a, spec.truncation);
            const auto locus = boundary_locus(gf, spec.n_theta);
            const auto path = output_path(stability_file_name(m, a));
            if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
            std::ofstream file(path);
            if (!file) throw ConfigError("cannot open output file " + path.string());
            write_boundary_csv(file, locus);
            out << "method=" << to_string(m) << " alpha=" << format_number(a)
                << " sector_included=" << (locus.sector_included ? "true" : "false")
                << " dropped=" << locus.dropped.size() << " file=" << path.string() << '\n';
        }
    }
    return exit_ok;
}

inline int cmd_bench(const RunSpec& spec, std::ostream& out, std::ostream&) {
    const auto methods = spec_methods(spec);
    const auto sizes = spec_sizes(spec);
    if (spec.repeats < 1) throw ConfigError("repeats must be >= 1");
    const auto problem = make_problem(spec);
    const auto config = make_config(spec);
    const std::size_t finest = *std::max_element(sizes.begin(), sizes.end());
    const Vector ref = reference_solution(problem, spec, finest, config);
    const std::string hash = config_hash(spec);

    Sink sink(spec.output, out);
    auto& os = sink.stream();
    // Serial on purpose: concurrent cells would distort the timings.
    for (auto m : methods) {
        for (auto N : sizes) {
            const auto grid = spec_grid(spec, m, N);
            double best = std::numeric_limits<double>::infinity();
            double error = 0.0;
            for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
                const auto sol = solve(problem, m, grid, config);
                best = std::min(best, sol.stats.wall_seconds);
                error = (sol.final_value() - ref).lpNorm<Eigen::Infinity>();
            }
            nlohmann::json rec{{"method", to_string(m)}, {"N", N},       {"alpha", spec.alpha},
                               {"problem", spec.problem}, {"seconds", best}, {"error", error},
                               {"config_hash", hash},     {"version", version}};
            os << rec.dump() << '\n';
        }
    }
    return exit_ok;
}

inline int dispatch(const RunSpec& spec, std::ostream& out, std::ostream& err) {
    if (spec.command == "solve") return cmd_solve(spec, out, err);
    if (spec.command == "convergence") return cmd_convergence(spec, out, err);
    if (spec.command == "stability") return cmd_stability(spec, out, err);
    if (spec.command == "bench") return cmd_bench(spec, out, err);
    throw ConfigError("unknown command '" + spec.command + "'");
}

// -----------------------------------------------------------------------------
// Argument parsing
// -----------------------------------------------------------------------------

inline void add_common_options(CLI::App& app, RunSpec& s, std::string& spec_file, bool& dump) {
    app.add_option("--problem", s.problem, "linear | brusselator");
    app.add_option("--alpha", s.alpha, "fractional order, 0 < alpha < 2, not an integer");
    app.add_option("--lambda", s.lambda, "linear problem coefficient");
    app.add_option("--a", s.a, "brusselator parameter a");
    app.add_option("--mu", s.mu, "brusselator parameter mu");
    app.add_option("--y0", s.y0, "initial values (problem default if omitted)")->delimiter(',');
    app.add_option("--t0", s.t0, "initial time");
    app.add_option("--T", s.T, "final time");
    app.add_option("--method", s.methods, std::string("methods: ") + std::string(method_list_text))
        ->delimiter(',');
    app.add_option("--N", s.N, "number of steps (list for studies)")->delimiter(',');
    app.add_option("--r", s.r, "grading exponent for PIG (default 2/alpha)");
    app.add_option("--ref-factor", s.ref_factor, "reference grid refinement over the finest N");
    app.add_option("--newton-tol", s.newton_tol, "Newton relative tolerance");
    app.add_option("--newton-max-iter", s.newton_max_iter, "Newton iteration limit");
    app.add_option("--jacobian", s.jacobian, "analytic | fd");
    app.add_option("-o,--output", s.output, "output file (default stdout)");
    app.add_option("--spec", spec_file, "read the run spec from a JSON file");
    app.add_flag("--dump-spec", dump, "print the run spec as JSON and exit");
}

/// Entry point of the fdesolve program; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app("Caputo fractional initial value problem solver", "fdesolve");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version));

    RunSpec spec;
    std::string spec_file;
    bool dump = false;

    auto* solve_cmd = app.add_subcommand("solve", "integrate one problem and write the trajectory");
    auto* conv_cmd = app.add_subcommand("convergence", "error and EOC table over doubling N");
    auto* stab_cmd = app.add_subcommand("stability", "stability region boundaries and verdicts");
    auto* bench_cmd = app.add_subcommand("bench", "error versus wall time, JSON lines");
    for (auto* sub : {solve_cmd, conv_cmd, stab_cmd, bench_cmd}) {
        add_common_options(*sub, spec, spec_file, dump);
    }
    conv_cmd->add_option("--jobs", spec.jobs, "worker threads for independent solves");
    stab_cmd->add_option("--alphas", spec.alphas, "orders to analyse")->delimiter(',');
    stab_cmd->add_option("--n-theta", spec.n_theta, "boundary samples");
    stab_cmd->add_option("--truncation", spec.truncation, "PIU series length");
    bench_cmd->add_option("--repeats", spec.repeats, "timing repeats (minimum is kept)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << version << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    }

    try {
        const auto* chosen = app.get_subcommands().front();
        if (!spec_file.empty()) {
            std::ifstream in(spec_file);
            if (!in) throw ConfigError("cannot read spec file " + spec_file);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("spec file: ") + e.what());
            }
            spec = j.get<RunSpec>();
        }
        spec.command = chosen->get_name();
        if (dump) {
            out << nlohmann::json(spec).dump(2) << '\n';
            return exit_ok;
        }
        return dispatch(spec, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const SolverError& e) {
        err << "solver failure at step " << e.step() << ": " << e.what() << '\n';
        return exit_solver;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    }
}

}  // namespace fde::cli

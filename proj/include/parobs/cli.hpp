#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "parobs/field_io.hpp"
#include "parobs/runner.hpp"
#include "parobs/scenarios.hpp"

// Batch front-end: run scenarios, execute check suites, emit fields, traces,
// graphs and reports as CSV files. No interactive mode, no plotting.

namespace parobs {

struct RunConfig {
    std::string scenario;            // catalogue name or config file path
    std::string out_dir = ".";
    std::optional<int> grid_nodes;   // nodes per axis across [-1, 1]
    std::optional<int> steps;        // time steps
    std::optional<double> dt;        // alternative to steps
    std::optional<double> tol;       // solver tolerance override
    std::vector<std::string> checks; // subset selection; empty = all
    unsigned seed = 7;
};

namespace cli_detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

} // namespace cli_detail

/// Flat `key = value` configuration with optional [run] section headers.
/// Unrecognized keys and sections are fatal.
inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = cli_detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t != "[run]")
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unknown section " + t);
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = cli_detail::trim(t.substr(0, eq));
        const std::string value = cli_detail::trim(t.substr(eq + 1));
        try {
            if (key == "scenario") cfg.scenario = value;
            else if (key == "out") cfg.out_dir = value;
            else if (key == "grid") cfg.grid_nodes = std::stoi(value);
            else if (key == "steps") cfg.steps = std::stoi(value);
            else if (key == "dt") cfg.dt = std::stod(value);
            else if (key == "tol") cfg.tol = std::stod(value);
            else if (key == "seed") cfg.seed = static_cast<unsigned>(std::stoul(value));
            else if (key == "checks") cfg.checks = cli_detail::split_list(value);
            else
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": malformed value for '" + key + "'");
        }
    }
    if (cfg.scenario.empty()) throw std::invalid_argument("config: missing 'scenario' key");
    return cfg;
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path.string());
    return parse_config(in);
}

/// The inequality behind each named check, with its constants.
inline std::string describe_check(const std::string& name) {
    static const std::map<std::string, std::string> table = {
        {"solve",
         "implicit step: laplace(U) - (U - U_prev)/dt = lam+ chi{U>0} - lam- chi{U<0}, "
         "active-set iteration until the sign sets settle"},
        {"reproduction",
         "max interior |U - reference| <= 5e-3 on the default grid"},
        {"nondegeneracy",
         "sup_{Q_r^-(t0,x0)} u >= 1/(8n) inf_{Q_r(t0,x0)} lambda_+ r^2 at boundary points of "
         "{u>0} (mirrored with lambda_- and inf u <= -1/(8n) inf lambda_- r^2 on {u<0}), "
         "sampled with slack factor (1 - h/r)"},
        {"sup-mean-time-derivative",
         "sup_{Q_r^-} |du/dt| <= C (r^2 + (r^(-n-2) Int_{Q_2r^-} |du/dt|^2)^(1/2)); "
         "the ratio is tracked, C is not asserted"},
        {"sup-mean-ratio",
         "sup_{Q_r^-} |du/dt| / (r^2 + (r^(-n-2) Int_{Q_2r^-} |du/dt|^2)^(1/2)) stays bounded"},
        {"directional-monotonicity",
         "eps^-1 d_e u - |u| >= 0 on Q_{1/2} of the rescaled field for every unit e with "
         "e . nu >= eps, under the gate delta = lambda_min eps / (48 n)"},
        {"tempo-spatial-monotonicity",
         "eps^-1 alpha du/dt + eps^-1 d_e u - |u| >= 0 on Q_{1/2} of the rescaled field for "
         "alpha in [-1,1], under the gate delta = lambda_min eps r~^2 sigma~^2 / (48 n)"},
        {"closeness-decay",
         "r^-2 sup_{Q_r}|u - h~| + r^-1 sup_{Q_r}|grad u - grad h~| + sup_{Q_r}|du/dt| "
         "decreases along shrinking r at a branch point"},
        {"time-derivative-decay",
         "sup_{Q_r}|du/dt| is nonincreasing and at least halves along the radius decade"},
        {"phi-monotonicity",
         "Phi(r,w) = r^-4 I(r, max(w,0)) I(r, max(-w,0)) nondecreasing in r, "
         "I(r,v) = Int_{-r^2}^0 Int |grad v|^2 G(t,x) with the mass-normalized backward kernel"},
        {"sign-persistence",
         "u >= 0 on Q_r^-(t0,x0) implies u >= 0 on Q_{c0 r}(t0,x0); the empirical c is recorded"},
        {"forward-uniqueness",
         "forward solutions sharing slice and lateral data agree within 10x the solver tolerance"},
        {"lipschitz-graphs",
         "phase boundaries are graphs x1 = f(t,x') with spatial Lipschitz norm <= 1 near the "
         "branch point"},
        {"normal-modulus",
         "max |nu(p) - nu(q)| over boundary pairs within pardist delta, tabulated per delta bin"},
        {"oddness", "reflected field satisfies v(t,x1,x') = -v(t,-x1,x') exactly on nodes"},
        {"reflect-residual", "odd reflection adds no equation residual"},
        {"counterexample-geometry",
         "contact-line boundary stays spatially Lipschitz (norm <= 1) while the maximal temporal "
         "difference quotient survives refinement (not differentiable in time)"},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown check '" + name + "'");
    return it->second;
}

inline std::string list_scenarios_text() {
    std::ostringstream out;
    out << "available scenarios:\n";
    for (const auto& name : scenario_names()) {
        const Scenario sc = build_scenario(name);
        out << "  " << name << "\n    " << sc.description << "\n";
    }
    return out.str();
}

/// Executes a configured run and writes artifacts atomically into out_dir.
/// Returns 0 when all selected checks pass, 1 otherwise.
inline int run_config(const RunConfig& cfg, std::ostream& log) {
    ScenarioOptions opts;
    opts.seed = cfg.seed;
    if (cfg.grid_nodes) {
        if (*cfg.grid_nodes < 3 || (*cfg.grid_nodes - 1) % 2 != 0)
            throw std::invalid_argument("grid nodes must be an odd count >= 3");
        opts.cells = *cfg.grid_nodes - 1;
    }
    if (cfg.steps) opts.steps = *cfg.steps;

    Scenario sc = build_scenario(cfg.scenario, opts);
    if (cfg.dt) {
        const double span = sc.grid.time[1] - sc.grid.time[0];
        const int steps = static_cast<int>(std::llround(span / *cfg.dt));
        if (steps < 1 || std::abs(span / steps - *cfg.dt) > 1e-9)
            throw std::invalid_argument("dt does not tile the scenario time interval");
        opts.steps = steps;
        sc = build_scenario(cfg.scenario, opts);
    }
    if (cfg.tol) sc.controls.tolerance = *cfg.tol;

    const std::filesystem::path out_dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    {
        std::ofstream probe(out_dir / ".parobs_write_probe");
        if (!probe) throw std::runtime_error("output directory is not writable: " + cfg.out_dir);
    }
    std::filesystem::remove(out_dir / ".parobs_write_probe", ec);

    const RunOutcome outcome = run_scenario(sc, cfg.checks, opts);
    for (const auto& [name, bytes] : outcome.artifacts)
        io_detail::atomic_write(out_dir / name, bytes);
    log << outcome.summary_text();
    log << (outcome.pass ? "RESULT: pass\n" : "RESULT: FAIL\n");
    return outcome.pass ? 0 : 1;
}

/// argv-level entry point: `run <scenario|config> [--out dir] [--grid N]
/// [--dt v] [--steps N] [--seed s] [--checks a,b] [--tol v]`, `list`,
/// `describe <check>`. Exit codes: 0 pass, 1 check failure, 2 usage/config.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    const std::string usage =
        "usage:\n"
        "  parobs run <scenario|config-file> [--out <dir>] [--grid <N>] [--dt <v>]\n"
        "             [--steps <N>] [--seed <s>] [--checks <a,b,...>] [--tol <v>]\n"
        "  parobs list\n"
        "  parobs describe <check>\n";
    try {
        if (args.empty()) {
            err << usage;
            return 2;
        }
        if (args[0] == "list") {
            out << list_scenarios_text();
            return 0;
        }
        if (args[0] == "describe") {
            if (args.size() != 2) {
                err << usage;
                return 2;
            }
            out << describe_check(args[1]) << "\n";
            return 0;
        }
        if (args[0] != "run" || args.size() < 2) {
            err << usage;
            return 2;
        }

        RunConfig cfg;
        if (std::filesystem::exists(args[1]) && !std::filesystem::is_directory(args[1]))
            cfg = parse_config_file(args[1]);
        else
            cfg.scenario = args[1];
        for (std::size_t i = 2; i < args.size(); i += 2) {
            if (i + 1 >= args.size()) {
                err << "missing value for " << args[i] << "\n" << usage;
                return 2;
            }
            const std::string& flag = args[i];
            const std::string& value = args[i + 1];
            if (flag == "--out") cfg.out_dir = value;
            else if (flag == "--grid") cfg.grid_nodes = std::stoi(value);
            else if (flag == "--steps") cfg.steps = std::stoi(value);
            else if (flag == "--dt") cfg.dt = std::stod(value);
            else if (flag == "--tol") cfg.tol = std::stod(value);
            else if (flag == "--seed") cfg.seed = static_cast<unsigned>(std::stoul(value));
            else if (flag == "--checks") cfg.checks = cli_detail::split_list(value);
            else {
                err << "unknown flag " << flag << "\n" << usage;
                return 2;
            }
        }
        return run_config(cfg, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace parobs

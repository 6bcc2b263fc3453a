#pragma once

// Command-line front end. Exit codes: 0 ok, 1 verification failed,
// 2 usage or input error, 3 numeric failure.

#include "bandctl/error.hpp"
#include "bandctl/fd_oracle.hpp"
#include "bandctl/io.hpp"
#include "bandctl/policy.hpp"
#include "bandctl/qvi.hpp"
#include "bandctl/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace bandctl::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumeric = 3 };

/// Every file written by one invocation, saved as manifest.json.
struct RunManifest {
    std::string command;
    std::vector<std::string> args;
    std::vector<std::pair<std::string, std::string>> outputs;  // (path, kind)
    int exit_code = kOk;

    nlohmann::json to_json() const {
        nlohmann::json outs = nlohmann::json::array();
        for (const auto& [path, kind] : outputs) outs.push_back({{"path", path}, {"kind", kind}});
        return {{"command", command}, {"args", args}, {"outputs", outs}, {"exit_code", exit_code}};
    }
};

inline int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::ParamOutOfRange:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InadmissiblePolicy:
    case ErrorKind::ZeroJump:
    case ErrorKind::OutOfRange:
    case ErrorKind::DomainError: return kUsage;
    case ErrorKind::SingularSystem:
    case ErrorKind::ConvergenceFailure:
    case ErrorKind::NonConvergence: return kNumeric;
    }
    return kNumeric;
}

namespace detail {

class Outputs {
public:
    Outputs(std::string dir, RunManifest& m) : dir_(std::move(dir)), manifest_(m) {}

    std::ofstream open(const std::string& name, const std::string& kind) {
        std::filesystem::create_directories(dir_);
        const std::string path = (std::filesystem::path(dir_) / name).string();
        std::ofstream os(path);
        if (!os) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path + "'");
        os.precision(17);
        manifest_.outputs.emplace_back(path, kind);
        return os;
    }

    void json(const std::string& name, const std::string& kind, const nlohmann::json& j) {
        open(name, kind) << j.dump(2) << '\n';
    }

    void finish() {
        manifest_.outputs.emplace_back((std::filesystem::path(dir_) / "manifest.json").string(),
                                       "manifest");
        std::filesystem::create_directories(dir_);
        std::ofstream os(std::filesystem::path(dir_) / "manifest.json");
        os << manifest_.to_json().dump(2) << '\n';
    }

private:
    std::string dir_;
    RunManifest& manifest_;
};

} // namespace detail

/// Runs the tool; messages go to out/err, files to --out-dir.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Band impulse control for mutual proportional reinsurance", "bandctl"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string out_dir = ".";
    std::string params_path;
    int threads = 0;
    app.add_option("--out-dir", out_dir, "Directory for output files")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (default: BANDCTL_THREADS or all cores)");

    auto* solve_cmd = app.add_subcommand("solve", "Solve for the optimal band policy");
    solve_cmd->add_option("params", params_path, "Parameter JSON file")->required();

    auto add_params = [&](CLI::App* c) {
        c->add_option("--params,-p", params_path, "Parameter JSON file")->required();
    };

    double t_from = 0.0, t_to = 0.0, t_step = 0.0;
    auto* table_cmd = app.add_subcommand("table", "Tabulate V, V', V'' and u");
    add_params(table_cmd);
    table_cmd->add_option("--from", t_from)->required();
    table_cmd->add_option("--to", t_to)->required();
    table_cmd->add_option("--step", t_step)->required();

    int v_grid = 2000;
    double v_tol = 1e-6;
    auto* verify_cmd = app.add_subcommand("verify", "Check the QVI on a grid");
    add_params(verify_cmd);
    verify_cmd->add_option("--grid", v_grid)->capture_default_str();
    verify_cmd->add_option("--tol", v_tol)->capture_default_str();

    double s_x = 0.0, s_dt = 1e-3, s_horizon = 20.0;
    std::size_t s_paths = 1000, s_log_paths = 0;
    std::uint64_t s_seed = 0;
    std::string s_method = "full_path";
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo cost of the optimal policy");
    add_params(sim_cmd);
    sim_cmd->add_option("--x", s_x)->required();
    sim_cmd->add_option("--paths", s_paths)->capture_default_str();
    sim_cmd->add_option("--dt", s_dt)->capture_default_str();
    sim_cmd->add_option("--horizon", s_horizon)->capture_default_str();
    sim_cmd->add_option("--seed", s_seed)->capture_default_str();
    sim_cmd->add_option("--method", s_method)
        ->check(CLI::IsMember({"full_path", "regenerative"}))
        ->capture_default_str();
    sim_cmd->add_option("--log-paths", s_log_paths, "Paths whose interventions go to interventions.csv")
        ->capture_default_str();

    double f_h = 1e-3, f_xmax = 0.0;
    bool f_uniform = false;
    auto* fd_cmd = app.add_subcommand("fd", "Finite-difference cross-check");
    fd_cmd->set_help_flag("--help", "Print this help message and exit");
    add_params(fd_cmd);
    fd_cmd->add_option("--h", f_h)->capture_default_str();
    fd_cmd->add_option("--xmax", f_xmax, "Right end of the grid (default 3 b_bar)");
    fd_cmd->add_flag("--uniform", f_uniform, "Never grade the grid toward the origin");

    double w_from = 0.0, w_to = 0.0;
    int w_points = 201;
    auto* sweep_cmd = app.add_subcommand("sweep", "Regime and band levels across K_plus");
    add_params(sweep_cmd);
    sweep_cmd->add_option("--kplus-from", w_from)->required();
    sweep_cmd->add_option("--kplus-to", w_to)->required();
    sweep_cmd->add_option("--points", w_points)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "bandctl: " << e.what() << '\n';
        return kUsage;
    }

    RunManifest manifest;
    manifest.command = app.get_subcommands().front()->get_name();
    for (int i = 1; i < argc; ++i) manifest.args.emplace_back(argv[i]);
    detail::Outputs files(out_dir, manifest);

    int code = kOk;
    try {
        const ModelParams p = io::read_params(params_path);
        if (solve_cmd->parsed()) {
            const ValueFunction vf = solve(p);
            files.json("policy.json", "policy", io::to_json(vf));
            out << "regime " << to_string(vf.policy.regime) << " A " << io::fmt17(vf.policy.A)
                << " B " << io::fmt17(vf.policy.B) << " b " << io::fmt17(vf.policy.b) << '\n';
            if (!vf.note.empty()) out << "note: " << vf.note << '\n';
        } else if (table_cmd->parsed()) {
            const ValueFunction vf = solve(p);
            auto os = files.open("table.csv", "table");
            io::write_table_csv(os, vf, t_from, t_to, t_step);
        } else if (verify_cmd->parsed()) {
            const ValueFunction vf = solve(p);
            const QviReport rep = qvi_report(vf, v_grid, v_tol);
            files.json("qvi_report.json", "qvi_report", io::to_json(rep));
            auto os = files.open("qvi_residuals.csv", "qvi_residuals");
            io::write_residuals_csv(os, rep);
            out << (rep.pass ? "PASS" : "FAIL") << " qvi grid " << v_grid << " tol " << v_tol << '\n';
            code = rep.pass ? kOk : kVerifyFailed;
        } else if (sim_cmd->parsed()) {
            const ValueFunction vf = solve(p);
            SimConfig cfg = make_sim_config(vf, s_x, s_dt, s_horizon, s_paths, s_seed,
                                            s_method == "regenerative" ? SimMethod::Regenerative
                                                                       : SimMethod::FullPath);
            cfg.threads = threads;
            const SimResult res = estimate_cost(cfg);
            nlohmann::json j = io::to_json(res);
            j["x"] = s_x;
            j["V"] = V_eval(s_x, vf).value;
            j["dt"] = s_dt;
            j["horizon"] = s_horizon;
            j["seed"] = s_seed;
            files.json("sim_result.json", "sim_result", j);
            if (s_log_paths > 0) {
                auto os = files.open("interventions.csv", "intervention_log");
                io::write_intervention_header(os);
                for (std::uint64_t i = 0; i < s_log_paths; ++i)
                    io::write_interventions_csv(os, i, simulate_path(cfg, i, true));
            }
            out << "mean " << io::fmt17(res.mean_cost) << " se " << io::fmt17(res.std_error) << '\n';
        } else if (fd_cmd->parsed()) {
            const ValueFunction vf = solve(p);
            const double xmax = f_xmax > 0.0 ? f_xmax : 3.0 * vf.aux.b_bar;
            FdOptions opt;
            if (f_uniform) opt.grading = OriginGrading::Never;
            const GridSolution g = solve_qvi_fd(p, xmax, f_h, opt);
            const FdComparison c = compare_to_analytic(g, vf);
            nlohmann::json j = io::to_json(c, g);
            j["graded"] = g.graded;
            j["A"] = vf.policy.A;
            j["B"] = vf.policy.B;
            j["b"] = vf.policy.b;
            j["regime"] = to_string(vf.policy.regime);
            files.json("fd_report.json", "fd_report", j);
            auto os = files.open("fd.csv", "fd_dump");
            io::write_fd_csv(os, g, vf);
            out << "sup error " << io::fmt17(c.sup_error) << " bands within 2h "
                << (c.bands_within_2h ? "yes" : "no") << '\n';
        } else if (sweep_cmd->parsed()) {
            if (w_points < 2 || !(w_to > w_from))
                throw Error(ErrorKind::InvalidConfig, "sweep needs --points >= 2 and kplus-to > kplus-from");
            auto os = files.open("sweep.csv", "sweep");
            os << "k_plus,regime,A,B,b,V0\n";
            for (int i = 0; i < w_points; ++i) {
                ModelParams q = p;
                q.K_plus = w_from + (w_to - w_from) * i / (w_points - 1);
                const ValueFunction vf = solve(q);
                os << io::fmt17(q.K_plus) << ',' << to_string(vf.policy.regime) << ','
                   << io::fmt17(vf.policy.A) << ',' << io::fmt17(vf.policy.B) << ','
                   << io::fmt17(vf.policy.b) << ',' << io::fmt17(V_eval(0.0, vf).value) << '\n';
            }
        }
    } catch (const Error& e) {
        err << "bandctl: " << e.what() << '\n';
        code = exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "bandctl: " << e.what() << '\n';
        code = kUsage;
    }
    manifest.exit_code = code;
    try {
        files.finish();
    } catch (const std::exception& e) {
        err << "bandctl: cannot write manifest: " << e.what() << '\n';
        if (code == kOk) code = kUsage;
    }
    return code;
}

} // namespace bandctl::cli

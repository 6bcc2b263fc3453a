#pragma once

// Monte Carlo simulation of the controlled reserve
//   dX = u(X) mu dt + u(X) sigma dW + jumps
// under a band policy, with Euler-Maruyama stepping and discounted
// intervention costs.

#include "bandctl/error.hpp"
#include "bandctl/model.hpp"
#include "bandctl/policy.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace bandctl {

enum class SimMethod {
    FullPath,     // one path per sample, run to the horizon
    Regenerative, // independent cycles from the restart points A and B
};

inline const char* to_string(SimMethod m) {
    return m == SimMethod::FullPath ? "full_path" : "regenerative";
}

struct SimConfig {
    ModelParams params{};
    BandPolicy policy{};
    double x_init = 0.0;
    double dt = 1e-3;
    double horizon = 20.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    bool use_feedback = true;          // u*(x); false means u = 1 throughout
    int brownian_substeps = 1;         // normals summed per step (coarse/fine coupling)
    double ruin_floor = 1e-9;          // DividendOnly absorption level
    double value_bound = 0.0;          // max |V| used in the truncation bound
    SimMethod method = SimMethod::FullPath;
    int threads = 0;                   // 0: BANDCTL_THREADS or hardware concurrency
    std::size_t n_batches = 50;        // batch-means SE for the regenerative method
};

struct Intervention {
    double time;
    double xi;
    double cost_term;  // exp(-r t) g(xi)
};

struct PathOutcome {
    double discounted_cost = 0.0;
    std::vector<Intervention> log;
    int n_calls = 0;
    int n_refunds = 0;
    bool ruined = false;
};

struct SimResult {
    SimMethod method = SimMethod::FullPath;
    std::size_t n_paths = 0;
    double mean_cost = 0.0;
    double std_error = 0.0;
    double ruin_fraction = 0.0;
    double n_calls = 0.0;     // mean count per path (per cycle for Regenerative)
    double n_refunds = 0.0;
    double truncation_bound = 0.0;
};

struct PolicyComparison {
    BandPolicy policy;
    SimResult result;
    double diff = 0.0;        // perturbed minus reference mean cost
    double pooled_se = 0.0;   // sqrt(se_ref^2 + se_pert^2)
    double paired_se = 0.0;   // SE of the CRN-paired difference
    bool dominated = false;   // diff >= -3 pooled_se
};

namespace sim_detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Per-sample stream key: a hash of (seed, stream, index), so that sample i
/// draws the same normals whatever the scheduling or the policy simulated.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

inline int thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BANDCTL_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Callers write results
/// by index, so any reduction afterwards is scheduling-independent.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(thread_count(threads)),
                                                 std::max<std::size_t>(n, 1));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t lo = n * t / nt;
        const std::size_t hi = n * (t + 1) / nt;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Euler-Maruyama increments of the rate-controlled diffusion.
class Stepper {
public:
    Stepper(const SimConfig& cfg, std::uint64_t key)
        : mu_(cfg.params.mu), sigma_(cfg.params.sigma), dt_(cfg.dt),
          sqrt_sub_(std::sqrt(cfg.dt / cfg.brownian_substeps)), substeps_(cfg.brownian_substeps),
          S_(cfg.policy.S_star), xt0_(cfg.policy.x0 + cfg.policy.S_star),
          feedback_(cfg.use_feedback), rng_(key) {}

    double u(double x) const { return feedback_ ? feedback_u(x, S_, xt0_) : 1.0; }

    double step(double x) {
        double dw = 0.0;
        for (int k = 0; k < substeps_; ++k) dw += normal_(rng_);
        const double uu = u(x);
        return x + uu * (mu_ * dt_ + sigma_ * sqrt_sub_ * dw);
    }

private:
    double mu_, sigma_, dt_, sqrt_sub_;
    int substeps_;
    double S_, xt0_;
    bool feedback_;
    std::mt19937_64 rng_;
    boost::random::normal_distribution<double> normal_;
};

inline std::size_t step_count(const SimConfig& cfg) {
    return static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
}

struct MeanSe {
    double mean;
    double se;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

} // namespace sim_detail

inline void validate_config(const SimConfig& cfg) {
    auto fail = [](const std::string& why) { throw Error(ErrorKind::InvalidConfig, why); };
    validate_params(cfg.params);
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) fail("dt must be positive");
    if (!(cfg.horizon >= cfg.dt)) fail("horizon must be at least dt");
    if (cfg.n_paths < 1) fail("n_paths must be at least 1");
    if (!(cfg.x_init >= 0.0)) fail("x_init must be non-negative");
    if (cfg.brownian_substeps < 1) fail("brownian_substeps must be at least 1");
    if (cfg.method == SimMethod::Regenerative && cfg.n_batches < 2)
        fail("regenerative estimation needs at least 2 batches");
    if (cfg.method == SimMethod::Regenerative && cfg.n_paths < cfg.n_batches)
        fail("n_paths must be at least n_batches");
    const BandPolicy& pol = cfg.policy;
    const bool ok = pol.A >= 0.0 && pol.B >= 0.0 && pol.B < pol.b && pol.A < pol.b &&
                    (pol.regime == Regime::DividendOnly || pol.A > 0.0) && pol.x0 + pol.S_star > 0.0;
    if (!ok) {
        std::ostringstream os;
        os << "inadmissible band (0, " << pol.A << "; " << pol.B << ", " << pol.b << ")";
        throw Error(ErrorKind::InadmissiblePolicy, os.str());
    }
}

/// Simulates one controlled path up to the horizon (or ruin). Overshoot past
/// b is refunded down to B in full; a step below 0 under BandFull is called
/// back up to A exactly.
inline PathOutcome simulate_path(const SimConfig& cfg, std::uint64_t path_index,
                                 bool keep_log = false) {
    validate_config(cfg);
    const ModelParams& p = cfg.params;
    const BandPolicy& pol = cfg.policy;
    sim_detail::Stepper stepper(cfg, sim_detail::stream_seed(cfg.seed, 0, path_index));
    PathOutcome out;

    auto intervene = [&](double t, double& x) -> bool {
        if (x >= pol.b) {
            const double xi = pol.B - x;
            const double term = std::exp(-p.r * t) * cost_g(xi, p);
            out.discounted_cost += term;
            ++out.n_refunds;
            if (keep_log) out.log.push_back({t, xi, term});
            x = pol.B;
        } else if (pol.regime == Regime::BandFull && x <= 0.0) {
            const double xi = pol.A - x;
            const double term = std::exp(-p.r * t) * cost_g(xi, p);
            out.discounted_cost += term;
            ++out.n_calls;
            if (keep_log) out.log.push_back({t, xi, term});
            x = pol.A;
        } else if (pol.regime == Regime::DividendOnly && x <= cfg.ruin_floor) {
            out.ruined = true;
            return false;
        }
        return true;
    };

    double x = cfg.x_init;
    if (!intervene(0.0, x)) return out;
    const std::size_t n = sim_detail::step_count(cfg);
    for (std::size_t k = 1; k <= n; ++k) {
        x = stepper.step(x);
        if (!intervene(static_cast<double>(k) * cfg.dt, x)) break;
    }
    return out;
}

namespace sim_detail {

enum class Exit { Top, Bottom, Ruin, Truncated };

struct Cycle {
    double discount = 0.0;  // exp(-r tau) at the exit (0 when truncated)
    double cost = 0.0;      // exp(-r tau) g(xi) of the exit intervention
    Exit exit = Exit::Truncated;
};

/// One excursion from y until the first intervention (or ruin / horizon).
inline Cycle run_cycle(const SimConfig& cfg, double y, std::uint64_t key) {
    const ModelParams& p = cfg.params;
    const BandPolicy& pol = cfg.policy;
    Stepper stepper(cfg, key);
    const std::size_t n = step_count(cfg);
    double x = y;
    for (std::size_t k = 1; k <= n; ++k) {
        x = stepper.step(x);
        const double t = static_cast<double>(k) * cfg.dt;
        if (x >= pol.b) {
            const double d = std::exp(-p.r * t);
            return {d, d * cost_g(pol.B - x, p), Exit::Top};
        }
        if (pol.regime == Regime::BandFull && x <= 0.0) {
            const double d = std::exp(-p.r * t);
            return {d, d * cost_g(pol.A - x, p), Exit::Bottom};
        }
        if (pol.regime == Regime::DividendOnly && x <= cfg.ruin_floor) return {0.0, 0.0, Exit::Ruin};
    }
    return {};
}

/// Discounted moments of the cycles from one start point.
struct CycleStats {
    double cost = 0.0;  // E[exp(-r tau) g]
    double top = 0.0;   // E[exp(-r tau); exit at b]
    double bot = 0.0;   // E[exp(-r tau); call at 0]
};

struct Sampled {
    std::vector<Cycle> cycles;
    std::size_t ruined = 0;
    std::size_t calls = 0;
    std::size_t refunds = 0;
};

inline Sampled sample_cycles(const SimConfig& cfg, double y, std::uint64_t stream) {
    Sampled s;
    s.cycles.resize(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        s.cycles[i] = run_cycle(cfg, y, stream_seed(cfg.seed, stream, i));
    });
    for (const Cycle& c : s.cycles) {
        s.ruined += c.exit == Exit::Ruin;
        s.calls += c.exit == Exit::Bottom;
        s.refunds += c.exit == Exit::Top;
    }
    return s;
}

inline CycleStats stats(const Sampled& s, std::size_t lo, std::size_t hi) {
    CycleStats st;
    for (std::size_t i = lo; i < hi; ++i) {
        const Cycle& c = s.cycles[i];
        st.cost += c.cost;
        if (c.exit == Exit::Top) st.top += c.discount;
        if (c.exit == Exit::Bottom) st.bot += c.discount;
    }
    const double n = static_cast<double>(hi - lo);
    st.cost /= n;
    st.top /= n;
    st.bot /= n;
    return st;
}

/// Restart values (C(A), C(B)) from the renewal equations
///   C(B) = cB + topB C(B) + botB C(A),  C(A) = cA + topA C(B) + botA C(A).
inline std::pair<double, double> restart_values(const CycleStats& a, const CycleStats& b,
                                                bool band_full) {
    if (!band_full) return {0.0, b.cost / (1.0 - b.top)};
    const double m11 = 1.0 - a.bot, m12 = -a.top;
    const double m21 = -b.bot, m22 = 1.0 - b.top;
    const double det = m11 * m22 - m12 * m21;
    const double CA = (a.cost * m22 - m12 * b.cost) / det;
    const double CB = (m11 * b.cost - m21 * a.cost) / det;
    return {CA, CB};
}

/// First-cycle contribution from x_init, including an intervention at t = 0.
struct StartPlan {
    enum class Kind { AtA, AtB, Interior, Ruined } kind;
    double immediate_cost = 0.0;
};

inline StartPlan plan_start(const SimConfig& cfg) {
    const BandPolicy& pol = cfg.policy;
    const double x = cfg.x_init;
    if (x >= pol.b) return {StartPlan::Kind::AtB, cost_g(pol.B - x, cfg.params)};
    if (pol.regime == Regime::BandFull && x <= 0.0)
        return {StartPlan::Kind::AtA, cost_g(pol.A - x, cfg.params)};
    if (pol.regime == Regime::DividendOnly && x <= cfg.ruin_floor) return {StartPlan::Kind::Ruined};
    if (x == pol.B) return {StartPlan::Kind::AtB};
    if (pol.regime == Regime::BandFull && x == pol.A) return {StartPlan::Kind::AtA};
    return {StartPlan::Kind::Interior};
}

struct RegenerativeRun {
    Sampled at_A, at_B, at_x;
    StartPlan plan;
};

inline RegenerativeRun sample_regenerative(const SimConfig& cfg) {
    RegenerativeRun run;
    run.plan = plan_start(cfg);
    const bool band_full = cfg.policy.regime == Regime::BandFull;
    if (run.plan.kind == StartPlan::Kind::Ruined) return run;
    run.at_B = sample_cycles(cfg, cfg.policy.B, 1);
    if (band_full) run.at_A = sample_cycles(cfg, cfg.policy.A, 2);
    if (run.plan.kind == StartPlan::Kind::Interior) run.at_x = sample_cycles(cfg, cfg.x_init, 3);
    return run;
}

inline double regenerative_estimate(const SimConfig& cfg, const RegenerativeRun& run,
                                    std::size_t lo, std::size_t hi) {
    const bool band_full = cfg.policy.regime == Regime::BandFull;
    switch (run.plan.kind) {
    case StartPlan::Kind::Ruined: return 0.0;
    default: break;
    }
    const CycleStats sB = stats(run.at_B, lo, hi);
    const CycleStats sA = band_full ? stats(run.at_A, lo, hi) : CycleStats{};
    const auto [CA, CB] = restart_values(sA, sB, band_full);
    switch (run.plan.kind) {
    case StartPlan::Kind::AtA: return run.plan.immediate_cost + CA;
    case StartPlan::Kind::AtB: return run.plan.immediate_cost + CB;
    case StartPlan::Kind::Interior: {
        const CycleStats sx = stats(run.at_x, lo, hi);
        return sx.cost + sx.top * CB + sx.bot * CA;
    }
    case StartPlan::Kind::Ruined: break;
    }
    return 0.0;
}

/// Batch estimates (for batch-means SE) and the full-sample estimate.
struct RegenerativeEstimate {
    double full;
    std::vector<double> batches;
};

inline RegenerativeEstimate regenerative_batches(const SimConfig& cfg, const RegenerativeRun& run) {
    RegenerativeEstimate est;
    est.full = regenerative_estimate(cfg, run, 0, cfg.n_paths);
    est.batches.resize(cfg.n_batches);
    for (std::size_t k = 0; k < cfg.n_batches; ++k) {
        const std::size_t lo = cfg.n_paths * k / cfg.n_batches;
        const std::size_t hi = cfg.n_paths * (k + 1) / cfg.n_batches;
        est.batches[k] = regenerative_estimate(cfg, run, lo, hi);
    }
    return est;
}

inline SimResult regenerative_result(const SimConfig& cfg, const RegenerativeRun& run,
                                     const RegenerativeEstimate& est) {
    SimResult res;
    res.method = SimMethod::Regenerative;
    res.n_paths = cfg.n_paths;
    res.mean_cost = est.full;
    res.std_error = mean_se(est.batches).se;

    std::size_t cycles = 0, ruined = 0, calls = 0, refunds = 0;
    double worst_return = 0.0;
    for (const Sampled* s : {&run.at_A, &run.at_B, &run.at_x}) {
        if (s->cycles.empty()) continue;
        cycles += s->cycles.size();
        ruined += s->ruined;
        calls += s->calls;
        refunds += s->refunds;
        const CycleStats st = stats(*s, 0, s->cycles.size());
        worst_return = std::max(worst_return, st.top + st.bot);
    }
    if (run.plan.kind == StartPlan::Kind::Ruined) res.ruin_fraction = 1.0;
    if (cycles > 0) {
        const double n = static_cast<double>(cycles);
        res.ruin_fraction = static_cast<double>(ruined) / n;
        res.n_calls = static_cast<double>(calls) / n;
        res.n_refunds = static_cast<double>(refunds) / n;
    }
    res.truncation_bound = std::exp(-cfg.params.r * cfg.horizon) * cfg.value_bound /
                           std::max(1e-12, 1.0 - worst_return);
    return res;
}

} // namespace sim_detail

namespace sim_detail {

struct PathSummary {
    double cost;
    int calls;
    int refunds;
    bool ruined;
};

inline std::vector<PathSummary> sample_paths(const SimConfig& cfg) {
    std::vector<PathSummary> out(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        const PathOutcome o = simulate_path(cfg, i);
        out[i] = {o.discounted_cost, o.n_calls, o.n_refunds, o.ruined};
    });
    return out;
}

inline SimResult full_path_result(const SimConfig& cfg, const std::vector<PathSummary>& paths) {
    SimResult res;
    res.method = SimMethod::FullPath;
    res.n_paths = paths.size();
    std::vector<double> cost(paths.size());
    double nc = 0.0, nr = 0.0, nru = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        cost[i] = paths[i].cost;
        nc += paths[i].calls;
        nr += paths[i].refunds;
        nru += paths[i].ruined;
    }
    const auto ms = mean_se(cost);
    const double n = static_cast<double>(paths.size());
    res.mean_cost = ms.mean;
    res.std_error = ms.se;
    res.n_calls = nc / n;
    res.n_refunds = nr / n;
    res.ruin_fraction = nru / n;
    res.truncation_bound = std::exp(-cfg.params.r * cfg.horizon) * cfg.value_bound;
    return res;
}

} // namespace sim_detail

/// Discounted-cost estimate. Results are bit-identical for a fixed config
/// whatever the thread count.
inline SimResult estimate_cost(const SimConfig& cfg) {
    validate_config(cfg);
    if (cfg.method == SimMethod::Regenerative) {
        const auto run = sim_detail::sample_regenerative(cfg);
        return sim_detail::regenerative_result(cfg, run, sim_detail::regenerative_batches(cfg, run));
    }
    return sim_detail::full_path_result(cfg, sim_detail::sample_paths(cfg));
}

/// Regenerative estimates for several start points from one sample of the
/// restart cycles. Entry k equals estimate_cost with x_init = xs[k].
inline std::vector<SimResult> estimate_costs(const SimConfig& cfg, const std::vector<double>& xs) {
    if (cfg.method != SimMethod::Regenerative)
        throw Error(ErrorKind::InvalidConfig, "estimate_costs needs the regenerative method");
    validate_config(cfg);
    sim_detail::RegenerativeRun shared;
    shared.at_B = sim_detail::sample_cycles(cfg, cfg.policy.B, 1);
    if (cfg.policy.regime == Regime::BandFull) shared.at_A = sim_detail::sample_cycles(cfg, cfg.policy.A, 2);

    std::vector<SimResult> out;
    for (double x : xs) {
        SimConfig c = cfg;
        c.x_init = x;
        validate_config(c);
        sim_detail::RegenerativeRun run;
        run.plan = sim_detail::plan_start(c);
        if (run.plan.kind != sim_detail::StartPlan::Kind::Ruined) {
            run.at_A = shared.at_A;
            run.at_B = shared.at_B;
        }
        if (run.plan.kind == sim_detail::StartPlan::Kind::Interior)
            run.at_x = sim_detail::sample_cycles(c, x, 3);
        out.push_back(sim_detail::regenerative_result(c, run, sim_detail::regenerative_batches(c, run)));
    }
    return out;
}

/// Common-random-numbers comparison of perturbed bands against cfg.policy.
/// Sample i of every policy uses the same Brownian stream.
inline std::vector<PolicyComparison> compare_policies(const SimConfig& cfg,
                                                      const std::vector<BandPolicy>& perturbations) {
    validate_config(cfg);
    for (const BandPolicy& pol : perturbations) {
        SimConfig c = cfg;
        c.policy = pol;
        validate_config(c);
    }

    std::vector<PolicyComparison> table;
    if (cfg.method == SimMethod::Regenerative) {
        const auto ref_run = sim_detail::sample_regenerative(cfg);
        const auto ref_est = sim_detail::regenerative_batches(cfg, ref_run);
        const SimResult ref = sim_detail::regenerative_result(cfg, ref_run, ref_est);
        for (const BandPolicy& pol : perturbations) {
            SimConfig c = cfg;
            c.policy = pol;
            const auto run = sim_detail::sample_regenerative(c);
            const auto est = sim_detail::regenerative_batches(c, run);
            PolicyComparison row;
            row.policy = pol;
            row.result = sim_detail::regenerative_result(c, run, est);
            row.diff = row.result.mean_cost - ref.mean_cost;
            std::vector<double> d(est.batches.size());
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = est.batches[k] - ref_est.batches[k];
            row.paired_se = sim_detail::mean_se(d).se;
            row.pooled_se = std::hypot(ref.std_error, row.result.std_error);
            row.dominated = row.diff >= -3.0 * row.pooled_se;
            table.push_back(row);
        }
        return table;
    }

    const auto ref_paths = sim_detail::sample_paths(cfg);
    const SimResult ref = sim_detail::full_path_result(cfg, ref_paths);
    for (const BandPolicy& pol : perturbations) {
        SimConfig c = cfg;
        c.policy = pol;
        const auto paths = sim_detail::sample_paths(c);
        PolicyComparison row;
        row.policy = pol;
        row.result = sim_detail::full_path_result(c, paths);
        std::vector<double> d(paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i) d[i] = paths[i].cost - ref_paths[i].cost;
        const auto dm = sim_detail::mean_se(d);
        row.diff = dm.mean;
        row.paired_se = dm.se;
        row.pooled_se = std::hypot(ref.std_error, row.result.std_error);
        row.dominated = row.diff >= -3.0 * row.pooled_se;
        table.push_back(row);
    }
    return table;
}

/// SimConfig for the optimal policy of a solved value function.
inline SimConfig make_sim_config(const ValueFunction& vf, double x_init, double dt, double horizon,
                                 std::size_t n_paths, std::uint64_t seed,
                                 SimMethod method = SimMethod::FullPath) {
    SimConfig cfg;
    cfg.params = vf.params();
    cfg.policy = vf.policy;
    cfg.x_init = x_init;
    cfg.dt = dt;
    cfg.horizon = horizon;
    cfg.n_paths = n_paths;
    cfg.seed = seed;
    cfg.method = method;
    cfg.value_bound = std::fabs(V_eval(vf.policy.b, vf).value);
    return cfg;
}

} // namespace bandctl

#include "stopgame/mc.hpp"

#include "stopgame/error.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace stopgame {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::uint64_t splitmix(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ keyed by (seed, stream): stream i yields the same numbers no
/// matter which thread draws it.
class KeyedEngine {
public:
    using result_type = std::uint64_t;
    KeyedEngine(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (stream * 0xd1b54a32d192ed03ULL + 0x8bb84b93962eacc9ULL);
        for (auto& w : s_) w = splitmix(s);
    }
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() {
        const result_type r = rotl(s_[0] + s_[3], 23) + s_[0];
        const result_type t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return r;
    }

private:
    static result_type rotl(result_type x, int k) { return (x << k) | (x >> (64 - k)); }
    result_type s_[4];
};

// Pairwise summation keeps merged sums independent of chunking.
double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

McEstimate summarize(const std::vector<double>& v, std::size_t truncated, std::size_t paths) {
    McEstimate e;
    const std::size_t n = v.size();
    e.paths_used = paths;
    e.truncation_mass = paths ? static_cast<double>(truncated) / static_cast<double>(paths) : 0.0;
    if (n == 0) return e;
    e.mean = pairwise_sum(v.data(), n) / static_cast<double>(n);
    if (n > 1) {
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) sq[i] = (v[i] - e.mean) * (v[i] - e.mean);
        double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
        e.std_error = std::sqrt(var / static_cast<double>(n));
    }
    return e;
}

struct Absorb {
    bool left = false, right = false;
    double a = 0.0, b = 0.0;
};

// Runs one path for every target. z() returns the next normal increment.
template <class Step, class Normal>
void run_path(double x0, const std::vector<McTarget>& targets, double rate, double dt, std::size_t steps,
              const Absorb& ab, double horizon_value, Step&& step, Normal&& z, double* out, bool* truncated) {
    const std::size_t m = targets.size();
    std::vector<char> done(m, 0);
    std::size_t open = m;
    double band_lo = -kInf, band_hi = kInf;
    auto rebuild = [&]() {
        band_lo = -kInf;
        band_hi = kInf;
        for (std::size_t j = 0; j < m; ++j) {
            if (done[j]) continue;
            band_lo = std::max({band_lo, targets[j].tau.lo, targets[j].sigma.lo});
            band_hi = std::min({band_hi, targets[j].tau.hi, targets[j].sigma.hi});
        }
    };
    auto settle = [&](double x, double t, bool frozen) {
        const double disc = std::exp(-rate * t);
        for (std::size_t j = 0; j < m; ++j) {
            if (done[j]) continue;
            const McTarget& tg = targets[j];
            if (tg.tau.hit(x)) {
                out[j] = tg.G->eval(x) * disc;
            } else if (tg.sigma.hit(x)) {
                out[j] = tg.H->eval(x) * disc;
            } else if (frozen) {
                out[j] = 0.0;  // absorbed without stopping: nothing is ever paid
            } else {
                continue;
            }
            done[j] = 1;
            --open;
        }
        rebuild();
    };

    for (std::size_t j = 0; j < m; ++j) truncated[j] = false;
    rebuild();
    double x = x0;
    if (x <= band_lo || x >= band_hi) settle(x, 0.0, false);
    std::size_t k = 0;
    while (open > 0 && k < steps) {
        // Tight loop: step until the path leaves the band or is absorbed.
        const double lo = ab.left ? std::max(band_lo, ab.a) : band_lo;
        const double hi = ab.right ? std::min(band_hi, ab.b) : band_hi;
        while (k < steps) {
            ++k;
            x = step(x, z());
            if (x <= lo || x >= hi) break;
        }
        if (!(x <= lo || x >= hi)) break;
        bool frozen = false;
        if (ab.left && x <= ab.a) {
            x = ab.a;
            frozen = true;
        } else if (ab.right && x >= ab.b) {
            x = ab.b;
            frozen = true;
        }
        settle(x, static_cast<double>(k) * dt, frozen);
    }
    if (open > 0) {
        const double disc = std::exp(-rate * static_cast<double>(steps) * dt);
        for (std::size_t j = 0; j < m; ++j)
            if (!done[j]) {
                out[j] = horizon_value * disc;
                truncated[j] = true;
            }
    }
}

struct Stepper {
    int kind = 0;  // 0 BM, 1 GBM, 2 general
    double mu = 0.0, sig = 0.0, dt = 0.0, sq = 0.0;
    const DiffusionSpec* spec = nullptr;
};

template <class F>
void dispatch(const Stepper& s, F&& f) {
    switch (s.kind) {
        case 0: {
            const double a = s.mu * s.dt, b = s.sig * s.sq;
            f([a, b](double x, double z) { return x + a + b * z; });
            break;
        }
        case 1: {
            const double a = 1.0 + s.mu * s.dt, b = s.sig * s.sq;
            f([a, b](double x, double z) { return x * (a + b * z); });
            break;
        }
        default: {
            const DiffusionSpec* sp = s.spec;
            const double dt = s.dt, sq = s.sq;
            f([sp, dt, sq](double x, double z) { return x + sp->sde_drift(x) * dt + sp->sde_vol(x) * sq * z; });
        }
    }
}

Stepper make_stepper(const DiffusionSpec& spec, double dt) {
    if (!spec.has_sde()) throw Error(ErrorCode::UnsupportedParameters, "tabulated diffusion cannot be simulated");
    Stepper s;
    s.dt = dt;
    s.sq = std::sqrt(dt);
    s.spec = &spec;
    if (auto* bm = std::get_if<BrownianMotion>(&spec.kind)) {
        s.kind = 0;
        s.mu = bm->drift;
        s.sig = bm->sigma;
    } else if (auto* g = std::get_if<GeometricBM>(&spec.kind)) {
        s.kind = 1;
        s.mu = g->r_drift;
        s.sig = g->sigma;
    } else {
        s.kind = 2;
    }
    return s;
}

Absorb make_absorb(const DiffusionSpec& spec) {
    Absorb ab;
    ab.left = spec.left.kind == Boundary::Kind::Absorbing;
    ab.right = spec.right.kind == Boundary::Kind::Absorbing;
    ab.a = spec.left.at;
    ab.b = spec.right.at;
    return ab;
}

void check_config(const McConfig& cfg, double horizon) {
    if (cfg.paths < 1) throw Error(ErrorCode::ConfigError, "mc.paths must be >= 1");
    if (!(cfg.dt > 0.0)) throw Error(ErrorCode::ConfigError, "mc.dt must be > 0");
    if (!(horizon >= cfg.dt)) throw Error(ErrorCode::ConfigError, "mc.horizon must be >= mc.dt");
    double budget = cfg.budget ? *cfg.budget : mc_budget();
    double work = static_cast<double>(cfg.paths) * horizon / cfg.dt;
    if (work > budget)
        throw Error(ErrorCode::BudgetExceeded,
                    "paths*horizon/dt = " + num(work) + " exceeds the budget " + num(budget));
}

unsigned thread_count(const McConfig& cfg) {
    unsigned t = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
    return std::max(1u, t);
}

// Calls body(stream) for stream in [0, count) across threads.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += threads) body(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace

double mc_budget() {
    if (const char* env = std::getenv("STOPGAME_BUDGET")) {
        char* end = nullptr;
        double v = std::strtod(env, &end);
        if (end != env && v > 0.0) return v;
    }
    return 1e11;
}

double default_horizon(double rate_r, double payoff_scale, double value_scale) {
    double ratio = payoff_scale / (1e-4 * value_scale);
    return ratio > 1.0 ? std::log(ratio) / rate_r : 1.0 / rate_r;
}

double resolve_horizon(const DiffusionSpec& spec, const PayoffSpec& payoff, const McConfig& cfg) {
    if (cfg.horizon > 0.0) return cfg.horizon;
    double lo = spec.lo, hi = spec.hi;
    if (!(lo < hi)) {
        lo = spec.a;
        hi = spec.b;
    }
    double scale = 0.0;
    if (std::isfinite(lo) && std::isfinite(hi)) {
        for (int i = 0; i <= 256; ++i) {
            double x = lo + (hi - lo) * i / 256.0;
            try {
                scale = std::max(scale, std::fabs(payoff.G.eval(x)));
                if (payoff.H) scale = std::max(scale, std::fabs(payoff.H->eval(x)));
            } catch (const Error&) {
            }
        }
    }
    if (!(scale > 0.0)) scale = 1.0;
    return default_horizon(spec.rate_r, scale, scale);
}

std::vector<McEstimate> simulate_multi(const DiffusionSpec& spec, double x0, const std::vector<McTarget>& targets,
                                       const McConfig& cfg, double horizon,
                                       std::vector<std::vector<double>>* per_path) {
    check_config(cfg, horizon);
    for (const auto& t : targets) {
        if (!t.G) throw Error(ErrorCode::ConfigError, "target without G");
        if (!t.H && (std::isfinite(t.sigma.lo) || std::isfinite(t.sigma.hi)))
            throw Error(ErrorCode::ConfigError, "finite sigma thresholds need H");
    }
    const std::size_t m = targets.size();
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / cfg.dt - 1e-9));
    const Stepper stp = make_stepper(spec, cfg.dt);
    const Absorb ab = make_absorb(spec);
    const std::size_t paths = cfg.paths;
    std::vector<double> vals(paths * m);
    std::vector<char> trunc(paths * m);

    const std::size_t streams = cfg.antithetic ? (paths + 1) / 2 : paths;
    parallel_for(streams, thread_count(cfg), [&](std::size_t s) {
        std::unique_ptr<bool[]> tr(new bool[m]);
        const int copies = cfg.antithetic ? 2 : 1;
        for (int c = 0; c < copies; ++c) {
            std::size_t path = cfg.antithetic ? 2 * s + static_cast<std::size_t>(c) : s;
            if (path >= paths) break;
            KeyedEngine eng(cfg.seed, s);
            boost::random::normal_distribution<double> nd;
            const double sign = c == 0 ? 1.0 : -1.0;
            auto z = [&]() { return sign * nd(eng); };
            dispatch(stp, [&](auto step) {
                run_path(x0, targets, spec.rate_r, cfg.dt, steps, ab, cfg.horizon_value, step, z, &vals[path * m],
                         tr.get());
            });
            for (std::size_t j = 0; j < m; ++j) trunc[path * m + j] = tr[j];
        }
    });

    std::vector<McEstimate> out(m);
    if (per_path) per_path->assign(m, {});
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> samples;
        std::size_t tcount = 0;
        for (std::size_t p = 0; p < paths; ++p) tcount += trunc[p * m + j] ? 1 : 0;
        if (cfg.antithetic) {
            for (std::size_t s = 0; s < streams; ++s) {
                std::size_t p0 = 2 * s, p1 = 2 * s + 1;
                samples.push_back(p1 < paths ? 0.5 * (vals[p0 * m + j] + vals[p1 * m + j]) : vals[p0 * m + j]);
            }
        } else {
            samples.resize(paths);
            for (std::size_t p = 0; p < paths; ++p) samples[p] = vals[p * m + j];
        }
        out[j] = summarize(samples, tcount, paths);
        if (per_path) (*per_path)[j] = std::move(samples);
    }
    return out;
}

McEstimate simulate_R(const DiffusionSpec& spec, const PayoffSpec& payoff, double x0, Thresholds tau,
                      Thresholds sigma, const McConfig& cfg) {
    McTarget t{&payoff.G, payoff.H ? &*payoff.H : nullptr, tau, sigma};
    return simulate_multi(spec, x0, {t}, cfg, resolve_horizon(spec, payoff, cfg))[0];
}

std::vector<McEstimate> refinement_series(const DiffusionSpec& spec, const PayoffSpec& payoff, double x0,
                                          Thresholds tau, Thresholds sigma, const McConfig& cfg, int levels) {
    if (levels < 1) throw Error(ErrorCode::ConfigError, "levels must be >= 1");
    const double horizon = resolve_horizon(spec, payoff, cfg);
    const std::size_t fine_per_coarse = std::size_t{1} << (levels - 1);
    McTarget tg{&payoff.G, payoff.H ? &*payoff.H : nullptr, tau, sigma};
    std::vector<McTarget> targets{tg};
    const Absorb ab = make_absorb(spec);
    std::vector<McEstimate> out;
    for (int lvl = 0; lvl < levels; ++lvl) {
        McConfig c = cfg;
        c.dt = cfg.dt / static_cast<double>(std::size_t{1} << lvl);
        check_config(c, horizon);
        const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / c.dt - 1e-9));
        const std::size_t group = fine_per_coarse >> lvl;  // fine normals per step at this level
        const double norm = 1.0 / std::sqrt(static_cast<double>(group));
        const Stepper stp = make_stepper(spec, c.dt);
        std::vector<double> vals(cfg.paths);
        std::vector<char> trunc(cfg.paths);
        parallel_for(cfg.paths, thread_count(cfg), [&](std::size_t p) {
            KeyedEngine eng(cfg.seed, p);
            boost::random::normal_distribution<double> nd;
            auto z = [&]() {
                double s = 0.0;
                for (std::size_t g = 0; g < group; ++g) s += nd(eng);
                return s * norm;
            };
            bool tr = false;
            dispatch(stp, [&](auto step) {
                run_path(x0, targets, spec.rate_r, c.dt, steps, ab, cfg.horizon_value, step, z, &vals[p], &tr);
            });
            trunc[p] = tr;
        });
        std::size_t tcount = static_cast<std::size_t>(std::count(trunc.begin(), trunc.end(), 1));
        out.push_back(summarize(vals, tcount, cfg.paths));
    }
    return out;
}

SaddleReport saddle_check(const DiffusionSpec& spec, const PayoffSpec& payoff, double x0, const GameSolution& sol,
                          const std::vector<Perturbation>& perturbations, const McConfig& cfg) {
    if (!payoff.H) throw Error(ErrorCode::UnsupportedParameters, "saddle check needs H");
    SaddleReport rep;
    auto [tl, th] = sol.tau_thresholds(x0);
    auto [sl, sh] = sol.sigma_thresholds(x0);
    rep.tau_star = {tl, th};
    rep.sigma_star = {sl, sh};
    const PayoffExpr* G = &payoff.G;
    const PayoffExpr* H = &*payoff.H;
    std::vector<McTarget> targets{{G, H, rep.tau_star, rep.sigma_star}};
    for (const auto& p : perturbations) {
        if (p.player == Perturbation::Player::Tau) targets.push_back({G, H, p.thr, rep.sigma_star});
        else targets.push_back({G, H, rep.tau_star, p.thr});
    }
    std::vector<std::vector<double>> per;
    auto est = simulate_multi(spec, x0, targets, cfg, resolve_horizon(spec, payoff, cfg), &per);
    rep.base = est[0];
    for (std::size_t k = 0; k < perturbations.size(); ++k) {
        const auto& base = per[0];
        const auto& alt = per[k + 1];
        std::vector<double> d(base.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = alt[i] - base[i];
        McEstimate de = summarize(d, 0, d.size());
        SaddleEntry e;
        e.pert = perturbations[k];
        e.estimate = est[k + 1];
        e.diff = de.mean;
        e.se_diff = de.std_error;
        if (e.pert.player == Perturbation::Player::Sigma) e.pass = e.diff >= -3.0 * e.se_diff;
        else e.pass = e.diff <= 3.0 * e.se_diff;
        rep.all_pass = rep.all_pass && e.pass;
        rep.entries.push_back(e);
    }
    return rep;
}

}  // namespace stopgame

#include "stopgame/config.hpp"

#include "stopgame/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace stopgame {

namespace {

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

class Reader {
public:
    Reader(std::map<std::string, Entry> entries, std::string origin)
        : entries_(std::move(entries)), origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        auto it = entries_.find(key);
        std::string where = origin_;
        if (it != entries_.end()) where += ":" + std::to_string(it->second.line);
        throw Error(ErrorCode::ConfigError, where + ": key '" + key + "': " + msg);
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::optional<std::string> str(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    double parse_number(const std::string& key, const std::string& text) const {
        double v = 0.0;
        const char* b = text.data();
        const char* e = b + text.size();
        if (!text.empty() && *b == '+') ++b;
        auto res = std::from_chars(b, e, v);
        if (res.ec != std::errc() || res.ptr != e || std::isnan(v)) fail(key, "not a number: '" + text + "'");
        return v;
    }

    std::optional<double> num(const std::string& key) {
        auto s = str(key);
        if (!s) return std::nullopt;
        return parse_number(key, *s);
    }

    double num_or(const std::string& key, double def) {
        auto v = num(key);
        return v ? *v : def;
    }

    std::optional<std::size_t> count(const std::string& key) {
        auto v = num(key);
        if (!v) return std::nullopt;
        if (!(*v >= 0.0) || std::floor(*v) != *v || *v > 1e15) fail(key, "expected a non-negative integer");
        return static_cast<std::size_t>(*v);
    }

    std::vector<double> list(const std::string& key) {
        std::vector<double> out;
        auto s = str(key);
        if (!s) return out;
        std::stringstream ss(*s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) fail(key, "empty list element");
            out.push_back(parse_number(key, item));
        }
        return out;
    }

    std::optional<bool> flag(const std::string& key) {
        auto s = str(key);
        if (!s) return std::nullopt;
        if (*s == "true" || *s == "1" || *s == "yes") return true;
        if (*s == "false" || *s == "0" || *s == "no") return false;
        fail(key, "expected true or false");
    }

    template <class T>
    std::optional<T> choice(const std::string& key, const std::map<std::string, T>& options) {
        auto s = str(key);
        if (!s) return std::nullopt;
        auto it = options.find(*s);
        if (it == options.end()) {
            std::string names;
            for (const auto& [k, v] : options) names += (names.empty() ? "" : ", ") + k;
            fail(key, "unknown value '" + *s + "' (expected one of: " + names + ")");
        }
        return it->second;
    }

    PayoffExpr expr(const std::string& key, const std::map<std::string, double>& constants) {
        auto s = str(key);
        if (!s) fail(key, "missing");
        try {
            return parse(*s, constants);
        } catch (const Error& e) {
            fail(key, e.what());
        }
    }

    std::map<std::string, Entry>& entries() { return entries_; }

private:
    std::map<std::string, Entry> entries_;
    std::string origin_;
};

Boundary boundary(Reader& rd, const std::string& kind_key, const std::string& at_key, double def_at) {
    Boundary b;
    auto k = rd.choice<Boundary::Kind>(kind_key, {{"natural", Boundary::Kind::Natural},
                                                  {"absorbing", Boundary::Kind::Absorbing}});
    if (k) b.kind = *k;
    b.at = rd.num_or(at_key, def_at);
    if (b.kind == Boundary::Kind::Absorbing && !std::isfinite(b.at)) rd.fail(at_key, "absorbing boundary needs a finite position");
    return b;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "diffusion.kind",     "diffusion.rate",     "diffusion.sigma",  "diffusion.drift",
        "diffusion.r_drift",  "diffusion.a",        "diffusion.b",      "diffusion.x_min",
        "diffusion.x_max",    "diffusion.eta",      "diffusion.ref_scale", "diffusion.left",
        "diffusion.left_at",  "diffusion.right",    "diffusion.right_at", "diffusion.grid",
        "diffusion.phi",      "diffusion.psi",      "diffusion.mu",     "diffusion.D",
        "diffusion.anchor",   "diffusion.ode_lo",   "diffusion.ode_hi", "payoff.G",
        "payoff.H",           "payoff.const.<name>", "grid.n",          "grid.spacing",
        "grid.direction",     "grid.polish",        "game.l_a",         "game.l_b",
        "game.w0",            "mc.paths",           "mc.dt",            "mc.horizon",
        "mc.seed",            "mc.antithetic",      "mc.horizon_value", "mc.x0",
        "mc.threads",         "mc.budget",          "output.points",
    };
    return keys;
}

ProblemConfig parse_config(const std::string& text, const std::string& origin) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    const auto& keys = config_keys();
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected 'section.key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        bool known = std::find(keys.begin(), keys.end(), key) != keys.end();
        if (key.rfind("payoff.const.", 0) == 0 && key.size() > 13) known = true;
        if (!known) throw Error(ErrorCode::ConfigError, where + ": key '" + key + "': unknown key");
        if (value.empty()) throw Error(ErrorCode::ConfigError, where + ": key '" + key + "': empty value");
        if (entries.count(key))
            throw Error(ErrorCode::ConfigError, where + ": key '" + key + "': duplicate (first set on line " +
                                                    std::to_string(entries[key].line) + ")");
        entries[key] = {value, lineno, false};
    }

    Reader rd(std::move(entries), origin);
    ProblemConfig cfg;

    // Constants first; expressions may use them.
    std::map<std::string, double> constants;
    for (auto& [key, e] : rd.entries()) {
        if (key.rfind("payoff.const.", 0) != 0) continue;
        std::string name = key.substr(13);
        bool ok = std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_';
        for (char ch : name) ok = ok && (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_');
        if (!ok || name == "x") rd.fail(key, "invalid constant name '" + name + "'");
        constants[name] = rd.num(key).value();
    }

    // Diffusion.
    enum class Kind { Gbm, Bm, Tabulated, Custom };
    auto kind = rd.choice<Kind>("diffusion.kind", {{"gbm", Kind::Gbm},
                                                   {"bm", Kind::Bm},
                                                   {"tabulated", Kind::Tabulated},
                                                   {"custom", Kind::Custom}});
    if (!kind) rd.fail("diffusion.kind", "missing");
    DiffusionSpec& d = cfg.diffusion;
    auto rate = rd.num("diffusion.rate");
    if (!rate) rd.fail("diffusion.rate", "missing");
    d.rate_r = *rate;
    double def_a = -kInf, def_b = kInf;
    switch (*kind) {
        case Kind::Gbm: {
            auto sigma = rd.num("diffusion.sigma");
            if (!sigma) rd.fail("diffusion.sigma", "missing");
            d.kind = GeometricBM{rd.num_or("diffusion.r_drift", d.rate_r), *sigma};
            def_a = 0.0;
            break;
        }
        case Kind::Bm: {
            auto sigma = rd.num("diffusion.sigma");
            if (!sigma) rd.fail("diffusion.sigma", "missing");
            d.kind = BrownianMotion{rd.num_or("diffusion.drift", 0.0), *sigma};
            break;
        }
        case Kind::Tabulated: {
            CustomTabulated t{rd.list("diffusion.grid"), rd.list("diffusion.phi"), rd.list("diffusion.psi")};
            if (t.grid.size() < 2) rd.fail("diffusion.grid", "needs at least two points");
            if (t.phi_values.size() != t.grid.size()) rd.fail("diffusion.phi", "length differs from diffusion.grid");
            if (t.psi_values.size() != t.grid.size()) rd.fail("diffusion.psi", "length differs from diffusion.grid");
            def_a = t.grid.front();
            def_b = t.grid.back();
            d.kind = std::move(t);
            break;
        }
        case Kind::Custom: break;
    }
    const auto x_min = rd.num("diffusion.x_min");
    const auto x_max = rd.num("diffusion.x_max");
    d.a = rd.num_or("diffusion.a", def_a);
    d.b = rd.num_or("diffusion.b", def_b);
    if (!(d.a < d.b)) rd.fail("diffusion.b", "need diffusion.a < diffusion.b");
    if (*kind == Kind::Custom) {
        CustomCoefficients c;
        c.mu = rd.expr("diffusion.mu", constants);
        c.D = rd.expr("diffusion.D", constants);
        c.ode_lo = rd.num_or("diffusion.ode_lo", std::isfinite(d.a) ? d.a : x_min.value_or(-kInf));
        c.ode_hi = rd.num_or("diffusion.ode_hi", std::isfinite(d.b) ? d.b : x_max.value_or(kInf));
        if (!std::isfinite(c.ode_lo) || !std::isfinite(c.ode_hi) || !(c.ode_lo < c.ode_hi))
            rd.fail("diffusion.ode_lo", "custom diffusion needs a finite ODE interval (ode_lo < ode_hi)");
        c.anchor = rd.num_or("diffusion.anchor", 0.5 * (c.ode_lo + c.ode_hi));
        d.kind = std::move(c);
    }
    d.left = boundary(rd, "diffusion.left", "diffusion.left_at", d.a);
    d.right = boundary(rd, "diffusion.right", "diffusion.right_at", d.b);

    double ref = rd.num_or("diffusion.ref_scale", constants.count("K") ? constants["K"] : 1.0);
    if (!(ref > 0.0)) rd.fail("diffusion.ref_scale", "must be > 0");
    if (auto eta = rd.num("diffusion.eta")) {
        if (!(*eta > 0.0)) rd.fail("diffusion.eta", "must be > 0");
        if (std::isfinite(d.a)) d.lo = d.a + *eta;
        if (std::isfinite(d.b)) d.hi = d.b - *eta;
    }
    if (x_min) d.lo = *x_min;
    if (x_max) d.hi = *x_max;
    bool lo_set = x_min || (rd.has("diffusion.eta") && std::isfinite(d.a));
    bool hi_set = x_max || (rd.has("diffusion.eta") && std::isfinite(d.b));
    if (lo_set != hi_set || (!lo_set && !(d.lo < d.hi))) {
        // Fill the missing end from the defaults.
        DiffusionSpec def = d;
        def.lo = def.hi = 0.0;
        try {
            def = with_default_truncation(def, ref);
        } catch (const Error& e) {
            rd.fail("diffusion.x_min", e.what());
        }
        if (!lo_set) d.lo = def.lo;
        if (!hi_set) d.hi = def.hi;
    }
    if (!(d.lo < d.hi) || d.lo < d.a || d.hi > d.b)
        rd.fail("diffusion.x_min", "truncated interval [" + std::to_string(d.lo) + ", " + std::to_string(d.hi) +
                                       "] must be nonempty and inside (a, b)");
    try {
        d.validate();
    } catch (const Error& e) {
        rd.fail("diffusion.kind", e.what());
    }

    // Payoff.
    cfg.payoff.constants = constants;
    cfg.payoff.G = rd.expr("payoff.G", constants);
    if (rd.has("payoff.H")) cfg.payoff.H = rd.expr("payoff.H", constants);

    // Grid and game overrides.
    SolveOptions& so = cfg.solve;
    if (auto n = rd.count("grid.n")) {
        if (*n < 16 || *n > 10'000'000) rd.fail("grid.n", "must be within [16, 1e7]");
        so.n = *n;
    }
    bool gbm = *kind == Kind::Gbm;
    so.spacing = gbm ? Spacing::LogX : Spacing::UniformX;
    if (auto s = rd.choice<Spacing>("grid.spacing", {{"uniform_x", Spacing::UniformX},
                                                     {"uniform_y", Spacing::UniformY},
                                                     {"log_x", Spacing::LogX}}))
        so.spacing = *s;
    if (so.spacing == Spacing::LogX && !(d.lo > 0.0)) rd.fail("grid.spacing", "log_x needs a positive interval");
    if (auto dir = rd.choice<ScaleDirection>("grid.direction", {{"psi", ScaleDirection::UsePsiScale},
                                                                {"phi", ScaleDirection::UsePhiScale}}))
        so.direction = *dir;
    if (auto p = rd.flag("grid.polish")) so.polish = *p;
    so.l_a = rd.num("game.l_a");
    so.l_b = rd.num("game.l_b");
    so.w0 = rd.num("game.w0");

    // Monte Carlo.
    McConfig& mc = cfg.mc;
    if (auto v = rd.count("mc.paths")) {
        if (*v < 1) rd.fail("mc.paths", "must be >= 1");
        mc.paths = *v;
    }
    if (auto v = rd.num("mc.dt")) {
        if (!(*v > 0.0)) rd.fail("mc.dt", "must be > 0");
        mc.dt = *v;
    }
    if (auto v = rd.num("mc.horizon")) {
        if (!(*v > 0.0) || !std::isfinite(*v)) rd.fail("mc.horizon", "must be finite and > 0");
        if (*v < mc.dt) rd.fail("mc.horizon", "must be >= mc.dt");
        mc.horizon = *v;
    }
    if (auto v = rd.count("mc.seed")) mc.seed = *v;
    if (auto v = rd.flag("mc.antithetic")) mc.antithetic = *v;
    if (auto v = rd.num("mc.horizon_value")) mc.horizon_value = *v;
    if (auto v = rd.count("mc.threads")) mc.threads = static_cast<unsigned>(*v);
    if (auto v = rd.num("mc.budget")) {
        if (!(*v > 0.0)) rd.fail("mc.budget", "must be > 0");
        mc.budget = *v;
    }
    if (auto v = rd.num("mc.x0")) {
        if (!(*v > d.a && *v < d.b)) rd.fail("mc.x0", "must lie inside (a, b)");
        cfg.x0 = *v;
    }
    cfg.points = rd.list("output.points");
    for (double p : cfg.points)
        if (!(p > d.a && p < d.b)) rd.fail("output.points", "point " + std::to_string(p) + " outside (a, b)");

    for (auto& [key, e] : rd.entries())
        if (!e.used) rd.fail(key, "not applicable to diffusion.kind");
    return cfg;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::ConfigError, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace stopgame

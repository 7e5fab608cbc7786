#include "stopgame/cli.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace stopgame;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "stopgame");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string temp_file(const std::string& name, const std::string& text) {
    auto p = std::filesystem::temp_directory_path() / ("stopgame_test_" + name);
    std::ofstream(p) << text;
    return p.string();
}

bool has(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

// Value printed after "key = " on its own line.
double field(const std::string& s, const std::string& key) {
    auto at = s.find("\n" + key + " = ");
    if (at == std::string::npos && s.rfind(key + " = ", 0) == 0) at = 0;
    else if (at != std::string::npos) ++at;
    REQUIRE(at != std::string::npos);
    return std::stod(s.substr(at + key.size() + 3));
}

const std::string kGbm = "diffusion.kind = gbm\ndiffusion.rate = 0.05\ndiffusion.sigma = 0.3\npayoff.const.K = 100\n"
                         "grid.n = 1025\n";

}  // namespace

TEST_CASE("put example") {
    auto r = run({"example", "put"});
    CHECK(r.code == 0);
    CHECK(has(r.out, "problem = stopping"));
    CHECK(field(r.out, "b_star") == doctest::Approx(100.0 / 1.9).epsilon(1e-5));
}

TEST_CASE("cancellable put example") {
    auto r = run({"example", "israeli-put"});
    CHECK(r.code == 0);
    CHECK(has(r.out, "equilibrium = NashSaddle"));
    CHECK(field(r.out, "delta_star") == doctest::Approx(23.21467913).epsilon(1e-9));
    CHECK(field(r.out, "x_star") == doctest::Approx(63.3464124727).epsilon(1e-8));
    CHECK(std::fabs(field(r.out, "x_star_residual")) <= 1e-8);

    auto big = run({"example", "israeli-put", "--delta", "46.43"});
    CHECK(big.code == 0);
    CHECK(has(big.out, "equilibrium = Degenerate"));
}

TEST_CASE("example configs round-trip through a file") {
    auto text = run({"example", "put", "--print-config"}).out;
    CHECK(has(text, "payoff.G = max(K - x, 0)"));
    auto path = temp_file("put.cfg", text);
    auto a = run({"solve", path});
    auto b = run({"example", "put"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("wrong subcommand for the problem") {
    auto isr = temp_file("isr.cfg", run({"example", "israeli-put", "--print-config"}).out);
    auto r = run({"solve", isr});
    CHECK(r.code == 1);
    CHECK(has(r.err, "use `game`"));
}

TEST_CASE("exit codes") {
    auto misordered = temp_file("order.cfg", kGbm + "payoff.G = max(K - x, 0)\npayoff.H = max(K - x, 0) - 1\n");
    CHECK(run({"game", misordered}).code == 1);

    auto bad_key = temp_file("badkey.cfg", kGbm + "payoff.G = 1\nfoo.bar = 2\n");
    auto r = run({"solve", bad_key});
    CHECK(r.code == 1);
    CHECK(has(r.err, "foo.bar"));

    CHECK(run({"solve", "/nonexistent/none.cfg"}).code == 1);
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);

    // A payoff growing like psi at the left end: no finite value.
    auto spike = temp_file("spike.cfg", kGbm + "payoff.G = x^(-10/9)\n");
    CHECK(run({"solve", spike}).code == 3);
    auto forced = temp_file("forced.cfg", kGbm + "payoff.G = max(K - x, 0)\ngame.l_a = 1\n");
    CHECK(run({"solve", forced}).code == 3);
}

TEST_CASE("CSV export") {
    auto path = temp_file("csv.cfg", kGbm + "payoff.G = max(K - x, 0)\n");
    auto a = run({"export", path});
    auto b = run({"export", path});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    std::istringstream in(a.out);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,psi,phi,WG,WH,V_scaled,V,eps_star,delta_star,region");
    std::string line;
    std::size_t rows = 0;
    bool stop = false, cont = false;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 10);
        stop = stop || has(line, ",D+");
        cont = cont || has(line, ",C");
    }
    CHECK(rows == 1025);
    CHECK(stop);
    CHECK(cont);

    auto file = (std::filesystem::temp_directory_path() / "stopgame_test_out.csv").string();
    CHECK(run({"solve", path, "-o", file}).code == 0);
    std::ifstream f(file);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == a.out);
}

TEST_CASE("verify") {
    auto put = temp_file("vput.cfg", run({"example", "put", "--print-config"}).out);
    auto few = run({"verify", put, "--paths", "10"});
    CHECK(few.code == 0);
    CHECK(has(few.out, "verify = INCONCLUSIVE"));
    CHECK(has(few.err, "increase --paths"));

    auto a = run({"verify", put, "--paths", "3000", "--dt", "0.004"});
    auto b = run({"verify", put, "--paths", "3000", "--dt", "0.004"});
    CHECK(a.out == b.out);
    CHECK(has(a.out, "quantity analytic mc se z status"));
    CHECK(has(a.out, "verify = PASS"));

    auto isr = temp_file("visr.cfg", run({"example", "israeli-put", "--print-config"}).out);
    auto g = run({"verify", isr, "--paths", "3000", "--dt", "0.004"});
    CHECK(g.code == 0);
    CHECK(has(g.out, "sigma' = never"));
    CHECK(has(g.out, "verify = PASS"));
}

TEST_CASE("custom diffusion given by its coefficients") {
    // The GBM of the put, written out as an ODE.
    auto path = temp_file("custom.cfg",
                          "diffusion.kind = custom\ndiffusion.rate = 0.05\ndiffusion.mu = 0.05 * x\n"
                          "diffusion.D = 0.045 * x^2\ndiffusion.a = 0\ndiffusion.anchor = 100\n"
                          "diffusion.ode_lo = 0.001\ndiffusion.ode_hi = 100000\ndiffusion.x_min = 0.01\n"
                          "diffusion.x_max = 10000\npayoff.const.K = 100\npayoff.G = max(K - x, 0)\n"
                          "grid.n = 2049\n");
    auto r = run({"solve", path});
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "b_star") == doctest::Approx(100.0 / 1.9).epsilon(1e-3));
}

#include "emlrom/response.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace emlrom;

namespace {

std::vector<double> grid(double t_end, std::size_t n)
{
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
    return t;
}

double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

} // namespace

TEST_CASE("relaxation solver agrees with the convolution integral")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> log_tau(std::log(0.1), std::log(100.0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto t = grid(30.0, 121);
    for (int c = 0; c < 20; ++c) {
        const double tau = std::exp(log_tau(rng));
        const double a0 = 2.0 * u(rng) - 1.0, a1 = u(rng), w = 0.05 + 0.5 * u(rng), k = 0.05 + u(rng);
        const double y0 = 2.0 * u(rng) - 1.0;
        const Drive f = [=](double s) { return a0 + a1 * std::sin(w * s) + (1.0 - std::exp(-k * s)); };
        const auto ya = relax_solve(f, tau, y0, t);
        const auto yb = convolution_solve(f, tau, y0, t);
        double worst = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i)
            worst = std::max(worst, rel_err(ya[i], yb[i]));
        INFO("tau " << tau);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("constant drive has the exponential closed form")
{
    // internal step 0.025; at the tau/20 cap alone the error is about 2e-8 |F|
    const auto t = grid(10.0, 101);
    const auto y = relax_solve([](double) { return 2.5; }, 1.0, 0.0, t);
    const auto c = convolution_solve([](double) { return 2.5; }, 1.0, 0.0, t);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double exact = 2.5 * (1.0 - std::exp(-t[i]));
        CHECK(std::abs(y[i] - exact) < 1e-8 * 2.5);
        CHECK(std::abs(c[i] - exact) < 1e-8 * 2.5);
    }
    for (const double tau : {0.2, 7.5, 60.0}) {
        const auto w = relax_solve([](double) { return 2.5; }, tau, -1.0, grid(20.0, 81));
        CHECK(std::abs(w.back() - (2.5 - 3.5 * std::exp(-20.0 / tau))) < 1e-6);
    }
}

TEST_CASE("relaxation solver rejects degenerate input")
{
    const auto t = grid(10.0, 11);
    CHECK_THROWS(relax_solve([](double) { return 1.0; }, 1e-10, 0.0, t));
    CHECK_THROWS(relax_solve([](double) { return 1.0; }, -1.0, 0.0, t));
    CHECK_THROWS(relax_solve([](double s) { return s > 5 ? std::nan("") : 1.0; }, 1.0, 0.0, t));
    const std::vector<double> back = {0.0, 2.0, 1.0};
    CHECK_THROWS(relax_solve([](double) { return 1.0; }, 1.0, 0.0, back));
}

TEST_CASE("activation-suppression optimum matches numeric argmax")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ua(0.01, 0.99), ub(1e-3, 2.0);
    for (int i = 0; i < 100; ++i) {
        const double a = ua(rng), b = ub(rng);
        const double r = m1_optimum(a, b);
        const double hi = 10.0 * r + 1.0;
        // compare candidate points by the exactly rounded difference f(u) - f(v)
        const auto better = [&](double u, double v) {
            const double d = u - v;
            return std::pow(v, a) * std::expm1(a * std::log1p(d / v)) - b * d > 0.0;
        };
        const double num = oracle::golden_argmax_by(better, 0.0, hi);
        CHECK(std::abs(r - num) <= 1e-8 * std::max(1.0, r));
    }
    CHECK_THROWS(m1_optimum(1.0, 0.5));
    CHECK_THROWS(m1_optimum(0.5, 0.0));
}

TEST_CASE("resonant exponential drive")
{
    const auto t = grid(8.0, 33);
    const auto c = convolution_solve([](double s) { return std::exp(-s); }, 1.0, 0.5, t);
    const auto y = relax_solve([](double s) { return std::exp(-s); }, 1.0, 0.5, t);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double exact = (0.5 + t[i]) * std::exp(-t[i]);
        CHECK(std::abs(c[i] - exact) < 1e-6);
        CHECK(std::abs(y[i] - exact) < 1e-6);
    }
}

TEST_CASE("linker occupancy")
{
    CHECK(linker_phi(4, 1.0) == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
    CHECK(linker_phi(3, 0.0) == 0.0);
    CHECK_THROWS(linker_phi(3, -1.0));
    for (const int n : {2, 3, 4}) {
        int turns = 0;
        double prev = linker_phi(n, 0.0);
        double slope_prev = 1.0;
        for (int i = 1; i <= 4000; ++i) {
            const double s = 0.005 * i;
            const double v = linker_phi(n, s);
            const double slope = v - prev;
            if (slope * slope_prev < 0.0)
                ++turns;
            if (slope != 0.0)
                slope_prev = slope;
            prev = v;
        }
        INFO("N = " << n);
        CHECK(turns == 1);
    }
}

TEST_CASE("linker ODE is flat without drive")
{
    const auto t = grid(30.0, 61);
    LinkerModel m{4, 0.0, 0.8, 1e-3, 0.5, 10.0};
    for (const double y : linker_ode(m, 20.0, t))
        CHECK(std::abs(y - 1.0) < 1e-10);
    m.amplitude = 5e5;
    for (const double y : linker_ode(m, 0.0, t))
        CHECK(std::abs(y - 1.0) < 1e-10);
}

TEST_CASE("static gate response peaks inside the window iff the optimum is reachable")
{
    const Expression e = Expression::parse("G(R)");
    const auto t = grid(60.0, 601);
    for (const auto& [a, b] : std::vector<std::pair<double, double>>{{0.5, 0.8}, {0.3, 0.5}, {0.5, 0.3}, {0.7, 0.2}}) {
        const std::vector<double> theta = {0.0, 1.0, 0.3, a, b, 1e-12};
        std::size_t arg = 0;
        double best = -1e300;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double y = static_response(e, BlockKind::Eml, theta, t[i]);
            if (y > best) {
                best = y;
                arg = i;
            }
        }
        const bool reachable = m1_optimum(a, b) < 1.0;
        INFO("a " << a << " b " << b);
        CHECK((arg + 1 < t.size()) == reachable);
    }
}

TEST_CASE("static hill response is monotone")
{
    const Expression e = Expression::parse("H(R)");
    const std::vector<double> theta = {0.5, 0.3, 2.0, 0.4, 2.5};
    double prev = -1e300;
    for (int i = 0; i <= 300; ++i) {
        const double y = static_response(e, BlockKind::Hill, theta, 0.2 * i);
        CHECK(y >= prev);
        prev = y;
    }
}

TEST_CASE("expression family parameter layout")
{
    const auto count = [](const char* s, BlockKind k, Embedding m) {
        return ExpressionFamily(Expression::parse(s), k, m).parameter_count();
    };
    CHECK(count("G(R)", BlockKind::Eml, Embedding::Static) == 6);
    CHECK(count("G(G(R)+R)", BlockKind::Eml, Embedding::Static) == 9);
    CHECK(count("H(R)", BlockKind::Hill, Embedding::Static) == 5);
    CHECK(count("H(R)+H(R)", BlockKind::Hill, Embedding::Static) == 8);
    CHECK(count("G(R)", BlockKind::Eml, Embedding::Relaxation) == 7);
    CHECK(count("G(R)+G(R)", BlockKind::Eml, Embedding::DoseOde) == 9);
    CHECK(count("H(R)", BlockKind::Hill, Embedding::DoseOde) == 5);
    CHECK(count("R", BlockKind::Eml, Embedding::Static) == 3);
    CHECK(LinkerFamily(4).parameter_count() == 5);
}

TEST_CASE("linear parameters enter predictions affinely")
{
    const auto t = grid(20.0, 41);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    const std::vector<std::tuple<const char*, BlockKind, Embedding>> cases = {
        {"G(G(R)+R)", BlockKind::Eml, Embedding::Static},   {"G(R)", BlockKind::Eml, Embedding::Relaxation},
        {"G(R)+G(R)", BlockKind::Eml, Embedding::DoseOde},  {"H(R)+H(R)", BlockKind::Hill, Embedding::Static},
        {"H(H(R)+R)", BlockKind::Hill, Embedding::Relaxation}, {"H(R)", BlockKind::Hill, Embedding::DoseOde},
    };
    for (const auto& [text, kind, emb] : cases) {
        const ExpressionFamily fam(Expression::parse(text), kind, emb);
        const auto bounds = fam.default_bounds();
        std::vector<double> theta;
        for (const auto& b : bounds)
            theta.push_back(b.lo > 0.0 ? std::min(b.hi, 0.1 + u(rng)) : u(rng));
        const auto lin = fam.linear_parameters();
        std::vector<double> direct(t.size());
        REQUIRE(fam.predict(theta, t, 3.0, direct));
        std::vector<double> scratch = theta;
        std::vector<double> cols(t.size() * (lin.size() + 1));
        REQUIRE(fam.predict_basis(scratch, t, 3.0, cols));
        INFO(text << " " << to_string(emb));
        for (std::size_t i = 0; i < t.size(); ++i) {
            double y = cols[i];
            for (std::size_t c = 0; c < lin.size(); ++c)
                y += theta[lin[c]] * cols[(c + 1) * t.size() + i];
            CHECK(y == doctest::Approx(direct[i]).epsilon(1e-10));
        }
    }
    const ExpressionFamily nested(Expression::parse("H(H(R)+R)"), BlockKind::Hill, Embedding::Static);
    CHECK(nested.linear_parameters() == std::vector<std::size_t>{0, 2});
}

TEST_CASE("recruitment input")
{
    CHECK(recruitment_input(0.0, 0.7) == 0.0);
    CHECK(recruitment_input(1e9, 0.7, 3.0) == doctest::Approx(3.0));
    CHECK(recruitment_input(2.0, 0.5) == doctest::Approx(1.0 - std::exp(-1.0)));
}

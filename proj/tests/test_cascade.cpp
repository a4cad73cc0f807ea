#include "emlrom/cascade.hpp"
#include "emlrom/response.hpp"
#include "emlrom/toybench.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace emlrom;

namespace {

Trace small_network_trace()
{
    NetworkParams p;
    const auto t = benchmark_times(40.0, 121);
    const auto traj = simulate_network(p, t);
    const auto y = add_noise(traj.y_true, p.sigma_noise, p.seed);
    return Trace::make("net", t, y, std::vector<double>(t.size(), p.sigma_noise));
}

double readout_chi2(const StateMatrix& z, const std::vector<double>& beta, const Trace& tr)
{
    double s = 0.0;
    for (const std::size_t i : tr.split.train) {
        double y = beta[0];
        for (std::size_t j = 1; j < beta.size(); ++j)
            y += beta[j] * z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1));
        const double r = (tr.y[i] - y) / tr.sigma[i];
        s += r * r;
    }
    return s;
}

} // namespace

TEST_CASE("reservoir schedule")
{
    const auto l1 = gate_schedule(1, 2.0);
    CHECK(l1.gate.a == doctest::Approx(0.45));
    CHECK(l1.gate.b == 1.0);
    CHECK(l1.gate.c == 1e-6);
    CHECK(l1.tau == 2.0);
    const auto l3 = gate_schedule(3, 2.0);
    CHECK(l3.gate.a == doctest::Approx(0.52));
    CHECK(l3.gate.b == doctest::Approx(0.39));
    CHECK(l3.gate.c == 0.08);
    CHECK(l3.tau == doctest::Approx(4.2));
    CHECK(gate_schedule(15, 1.0).gate.b == doctest::Approx(0.27)); // saturates after k = 11
    CHECK_THROWS(gate_schedule(0, 1.0));
}

TEST_CASE("deeper cascades extend shallower ones")
{
    const auto t = benchmark_times(30.0, 121);
    const StateMatrix z3 = cascade_simulate({3, 0.4, 1.5}, t);
    const StateMatrix z7 = cascade_simulate({7, 0.4, 1.5}, t);
    REQUIRE(z7.cols() == 7);
    CHECK(z7.leftCols(3) == z3);
    CHECK(cascade_simulate({0, 0.4, 1.5}, t).cols() == 0);
}

TEST_CASE("first two layers match the convolution form")
{
    const CascadeSpec spec{2, 0.35, 1.2};
    const std::vector<double> t = {0.0, 1.0, 2.5, 5.0, 8.0};
    const StateMatrix z = cascade_simulate(spec, t);
    const auto l1 = spec.layer(1);
    const auto l2 = spec.layer(2);
    // the drive rises like t^a, so the quadrature grid is refined towards 0
    auto conv_at = [](const Drive& d, double tau, double s) {
        if (s == 0.0)
            return 0.0;
        std::vector<double> g;
        for (int j = 30; j >= 0; --j)
            g.push_back(std::ldexp(s, -j));
        return convolution_solve(d, tau, 0.0, g).back();
    };
    const Drive d1 = [&](double s) { return gate_eval(l1.gate, recruitment_input(s, spec.k_fit)); };
    const Drive d2 = [&](double s) { return gate_eval(l2.gate, conv_at(d1, l1.tau, s)); };
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double z1 = conv_at(d1, l1.tau, t[i]);
        CHECK(std::abs(z(row, 0) - z1) <= 1e-6 * std::abs(z1));
        if (i % 2 == 1) {
            const double z2 = conv_at(d2, l2.tau, t[i]);
            CHECK(std::abs(z(row, 1) - z2) <= 1e-6 * std::abs(z2));
        }
    }
}

TEST_CASE("cascade approaches the composed steady state")
{
    const CascadeSpec spec{4, 50.0, 0.5};
    const std::vector<double> t = {0.0, 60.0};
    const StateMatrix z = cascade_simulate(spec, t);
    const auto lr = linearize(spec, 1.0);
    double x = 1.0;
    for (int k = 1; k <= 4; ++k) {
        x = gate_eval(spec.layer(k).gate, x);
        CHECK(z(1, k - 1) == doctest::Approx(x).epsilon(1e-8));
        if (k < 4)
            CHECK(lr.working_point[static_cast<std::size_t>(k)] == doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("linear gains match finite differences")
{
    const CascadeSpec spec{5, 0.45, 1.0};
    const double level = 0.7;
    const auto lr = linearize(spec, level);
    REQUIRE(lr.gains.size() == 5);
    auto compose = [&](double u) {
        for (int k = 1; k <= spec.depth; ++k)
            u = gate_eval(spec.layer(k).gate, u);
        return u;
    };
    double prod = 1.0;
    for (std::size_t k = 0; k < lr.gains.size(); ++k) {
        const auto g = spec.layer(static_cast<int>(k) + 1).gate;
        const double x = lr.working_point[k];
        const double h = 1e-6;
        const double fd = (gate_eval(g, x + h) - gate_eval(g, x - h)) / (2.0 * h);
        CHECK(lr.gains[k] == doctest::Approx(fd).epsilon(1e-6));
        CHECK(lr.taus[k] == doctest::Approx(spec.layer(static_cast<int>(k) + 1).tau));
        prod *= lr.gains[k];
    }
    const double h = 1e-6;
    const double slope = (compose(level + h) - compose(level - h)) / (2.0 * h);
    CHECK(slope == doctest::Approx(prod).epsilon(1e-5));
    CHECK(transfer_function(lr, {0.0, 0.0}).real() == doctest::Approx(prod));
    const auto hw = transfer_function(lr, {0.0, 10.0});
    CHECK(std::abs(hw) < std::abs(prod));
    CHECK_THROWS_AS(transfer_function(lr, {-1.0 / lr.taus[0], 0.0}), DomainError);
}

TEST_CASE("readout is the weighted least-squares optimum")
{
    const Trace tr = small_network_trace();
    const StateMatrix z = cascade_simulate({4, 0.4, 1.0}, tr.t);
    const auto fit = fit_readout(z, 4, tr);
    REQUIRE(fit.readout.beta.size() == 5);
    CHECK_FALSE(fit.readout.rank_deficient);
    CHECK(fit.fit.n_params == 7);
    const double best = readout_chi2(z, fit.readout.beta, tr);
    CHECK(fit.fit.chi2_train == doctest::Approx(best).epsilon(1e-9));
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        auto alt = fit.readout.beta;
        const double scale = i < 25 ? 1e-3 : 1.0;
        for (double& b : alt)
            b += scale * n(rng);
        CHECK(readout_chi2(z, alt, tr) >= best * (1.0 - 1e-12));
    }
    const auto pred = readout_predict(z, fit.readout);
    CHECK(pred.size() == tr.size());
    CHECK_THROWS(fit_readout(z, 5, tr));
}

TEST_CASE("duplicate hidden states are flagged")
{
    const Trace tr = small_network_trace();
    StateMatrix z = cascade_simulate({2, 0.4, 1.0}, tr.t);
    z.col(1) = z.col(0);
    const auto fit = fit_readout(z, 2, tr);
    CHECK(fit.readout.rank_deficient);
    CHECK(std::isfinite(fit.fit.chi2_train));
}

TEST_CASE("parallel grid search equals the serial reference")
{
    const Trace tr = small_network_trace();
    ReservoirGrid g;
    g.k_fit = linspace(0.15, 0.8, 5);
    g.tau0 = linspace(0.5, 5.5, 4);
    const auto a = reservoir_grid_search(tr, 5, g);
    const auto b = reservoir_grid_search_serial(tr, 5, g);
    REQUIRE(a.size() == 5);
    REQUIRE(b.size() == 5);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].depth == static_cast<int>(k) + 1);
        CHECK(a[k].k_fit == b[k].k_fit);
        CHECK(a[k].tau0 == b[k].tau0);
        CHECK(a[k].readout.beta == b[k].readout.beta);
        CHECK(a[k].fit.wmse_hold == b[k].fit.wmse_hold);
    }
    CHECK_THROWS(reservoir_grid_search(tr, 0, g));
}

TEST_CASE("standard grid")
{
    const auto g = ReservoirGrid::standard();
    CHECK(g.k_fit.size() == 18);
    CHECK(g.tau0.size() == 20);
    CHECK(g.k_fit.front() == 0.15);
    CHECK(g.k_fit.back() == doctest::Approx(0.80));
    CHECK(g.tau0.back() == doctest::Approx(5.5));
    CHECK(linspace(1.0, 2.0, 1) == std::vector<double>{1.0});
}

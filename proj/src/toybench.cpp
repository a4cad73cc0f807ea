#include "emlrom/toybench.hpp"

#include "emlrom/response.hpp"
#include "emlrom/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emlrom {

void NetworkParams::validate() const
{
    if (n_a < 1 || n_i < 1)
        throw std::invalid_argument("network chain lengths must be >= 1");
    for (const double v : {k_r, kon_a, koff_a, tau_a, kon_i, koff_i, tau_i})
        if (!(v > 0.0))
            throw std::invalid_argument("network rates and timescales must be positive");
    if (!(k_a > 0.0) || !(k_i > 0.0))
        throw std::invalid_argument("readout half-saturation constants must be positive");
    if (sigma_noise < 0.0)
        throw std::invalid_argument("noise level must be non-negative");
}

NetworkTrajectory simulate_network(const NetworkParams& p, std::span<const double> times)
{
    p.validate();
    const auto na = static_cast<std::size_t>(p.n_a);
    const auto ni = static_cast<std::size_t>(p.n_i);
    const std::size_t n = na + ni;

    auto rhs = [&](double t, const std::vector<double>& s, std::vector<double>& ds) {
        const double r = recruitment_input(t, p.k_r);
        ds[0] = p.kon_a * r * (1.0 - s[0]) - p.koff_a * s[0];
        for (std::size_t j = 1; j < na; ++j)
            ds[j] = (s[j - 1] - s[j]) / p.tau_a;
        ds[na] = p.kon_i * r * (1.0 - s[na]) - p.koff_i * s[na];
        for (std::size_t j = 1; j < ni; ++j)
            ds[na + j] = (s[na + j - 1] - s[na + j]) / p.tau_i;
    };

    const double rate_max = std::max(p.kon_a + p.koff_a, p.kon_i + p.koff_i);
    const double h_max = std::min({p.tau_a / 20.0, p.tau_i / 20.0, 1.0 / (20.0 * rate_max)});

    NetworkTrajectory out;
    out.t.assign(times.begin(), times.end());
    out.act.setZero(static_cast<Eigen::Index>(times.size()), p.n_a);
    out.inh.setZero(static_cast<Eigen::Index>(times.size()), p.n_i);
    std::vector<double> s(n, 0.0), k1(n), k2(n), k3(n), k4(n), tmp(n);
    double t = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t || (i > 0 && !(times[i] > times[i - 1])))
            throw std::invalid_argument("time grid must be non-negative and strictly increasing");
        const double span = times[i] - t;
        if (span > 0.0) {
            const int steps = static_cast<int>(std::max(4.0, std::ceil(span / h_max - 1e-9)));
            const double h = span / steps;
            for (int st = 0; st < steps; ++st) {
                const double t0 = t + st * h;
                rhs(t0, s, k1);
                for (std::size_t j = 0; j < n; ++j)
                    tmp[j] = s[j] + 0.5 * h * k1[j];
                rhs(t0 + 0.5 * h, tmp, k2);
                for (std::size_t j = 0; j < n; ++j)
                    tmp[j] = s[j] + 0.5 * h * k2[j];
                rhs(t0 + 0.5 * h, tmp, k3);
                for (std::size_t j = 0; j < n; ++j)
                    tmp[j] = s[j] + h * k3[j];
                rhs(t0 + h, tmp, k4);
                for (std::size_t j = 0; j < n; ++j)
                    s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            t = times[i];
        }
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < na; ++j)
            out.act(row, static_cast<Eigen::Index>(j)) = s[j];
        for (std::size_t j = 0; j < ni; ++j)
            out.inh(row, static_cast<Eigen::Index>(j)) = s[na + j];
        const double a_end = s[na - 1];
        const double i_end = s[n - 1];
        out.input.push_back(recruitment_input(times[i], p.k_r));
        out.y_true.push_back(p.y0 + p.amp_a * a_end / (p.k_a + a_end) - p.amp_i * i_end / (p.k_i + i_end));
    }
    return out;
}

std::vector<double> add_noise(std::span<const double> y_true, double sigma, std::uint64_t seed)
{
    if (sigma < 0.0)
        throw std::invalid_argument("noise level must be non-negative");
    std::vector<double> out(y_true.begin(), y_true.end());
    if (sigma == 0.0)
        return out;
    const CounterRng rng(seed);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += sigma * rng.normal(i);
    return out;
}

std::vector<double> benchmark_times(double t_end, std::size_t n)
{
    if (n < 2 || !(t_end > 0.0))
        throw std::invalid_argument("benchmark grid needs n >= 2 and t_end > 0");
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
    return t;
}

Trace synthetic_trace(const ResponseFamily& family, std::span<const double> theta, std::span<const double> times,
                      double rel_noise, std::uint64_t seed, std::string label, double dose)
{
    std::vector<double> y(times.size());
    if (!family.predict(theta, times, dose, y))
        throw std::invalid_argument("synthetic parameters are outside the model domain");
    double peak = 0.0;
    for (const double v : y)
        peak = std::max(peak, std::abs(v));
    const double sigma = rel_noise * peak;
    auto obs = add_noise(y, sigma, seed);
    std::vector<double> sem(times.size(), sigma);
    return Trace::make(std::move(label), std::vector<double>(times.begin(), times.end()), std::move(obs),
                       std::move(sem), 3, dose);
}

} // namespace emlrom

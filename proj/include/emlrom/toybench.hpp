#pragma once

#include "emlrom/fitting.hpp"
#include "emlrom/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emlrom {

/// Fast-activation / slow-inhibition network. Defaults are the published
/// benchmark set.
struct NetworkParams {
    int n_a = 20;
    int n_i = 30;
    double k_r = 0.45;
    double kon_a = 2.4;
    double koff_a = 0.55;
    double tau_a = 0.28;
    double kon_i = 0.75;
    double koff_i = 0.08;
    double tau_i = 0.75;
    double amp_a = 1.6;
    double amp_i = 1.25;
    double k_a = 0.18;
    double k_i = 0.22;
    double y0 = 0.0;
    double sigma_noise = 0.015;
    std::uint64_t seed = 1;

    void validate() const;
};

struct NetworkTrajectory {
    std::vector<double> t;
    std::vector<double> input;   ///< R(t)
    Eigen::MatrixXd act;         ///< A_1..A_{n_A}, one row per time
    Eigen::MatrixXd inh;         ///< I_1..I_{n_I}
    std::vector<double> y_true;
};

/// RK4 integration of the 2-branch network from the zero state; substeps
/// are no longer than min(dt/4, tau_A/20, tau_I/20, 1/(20 rate_max)).
NetworkTrajectory simulate_network(const NetworkParams& p, std::span<const double> times);

/// y_obs = y_true + eta, eta_i ~ N(0, sigma^2) from CounterRng(seed) draw i.
std::vector<double> add_noise(std::span<const double> y_true, double sigma, std::uint64_t seed);

/// Default benchmark grid: t in [0, t_end] with n points.
std::vector<double> benchmark_times(double t_end = 75.0, std::size_t n = 241);

/// Noisy samples of a model: sigma = rel_noise * max|y_true|, reported as
/// the SEM of every point, noise from CounterRng(seed).
Trace synthetic_trace(const ResponseFamily& family, std::span<const double> theta, std::span<const double> times,
                      double rel_noise, std::uint64_t seed, std::string label = {}, double dose = 1.0);

} // namespace emlrom

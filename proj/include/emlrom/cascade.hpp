#pragma once

#include "emlrom/expr.hpp"
#include "emlrom/fitting.hpp"

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <vector>

namespace emlrom {

/// Gate and timescale of one reservoir layer.
struct LayerParams {
    GateParams gate;
    double tau = 1.0;
};

/// Fixed reservoir schedule for layer k >= 1:
///   a_k = 0.45 + 0.035 (k-1)
///   b_1 = 1, b_k = 0.42 - 0.015 min(k-1, 10)
///   c_1 = 1e-6, c_k = 0.08
///   tau_k = tau0 (1 + 0.55 (k-1))
LayerParams gate_schedule(int k, double tau0);

struct CascadeSpec {
    int depth = 1;       ///< K
    double k_fit = 0.45; ///< input rate of z_0 = 1 - exp(-k_fit t)
    double tau0 = 1.0;

    LayerParams layer(int k) const { return gate_schedule(k, tau0); }
};

/// Hidden states on the time grid: row i is t_i, column k-1 is z_k.
using StateMatrix = Eigen::MatrixXd;

/// Integrates tau_k z_k' = -z_k + G_k(z_{k-1}), z_0 = R(t; k_fit), z_k(0) = 0.
/// All layers advance together with one RK4 step no longer than
/// min(tau0/20, dt/4); since the system is triangular, layer k never sees
/// layers above it and the first K columns do not depend on depth.
/// Throws DomainError if c_k + z_{k-1} <= 0 is reached.
StateMatrix cascade_simulate(const CascadeSpec& spec, std::span<const double> times);

/// Non-throwing variant; false on a domain violation.
bool cascade_simulate(const CascadeSpec& spec, std::span<const double> times, StateMatrix& out) noexcept;

struct Readout {
    std::vector<double> beta; ///< beta_0 .. beta_K
    bool rank_deficient = false;
};

struct ReadoutFit {
    Readout readout;
    FitResult fit;
};

/// Weighted least-squares readout y = beta_0 + sum_{j<=K} beta_j z_j on the
/// training indices (normal equations with 1e-10 diagonal jitter). The first
/// `depth` columns of `states` are used.
ReadoutFit fit_readout(const StateMatrix& states, int depth, const Trace& trace);

/// Readout prediction on every grid point.
std::vector<double> readout_predict(const StateMatrix& states, const Readout& readout);

struct ReservoirGrid {
    std::vector<double> k_fit;
    std::vector<double> tau0;

    /// 18 values in [0.15, 0.80] by 20 values in [0.5, 5.5], endpoints included.
    static ReservoirGrid standard();
};

std::vector<double> linspace(double lo, double hi, std::size_t n);

struct DepthResult {
    int depth = 0;
    double k_fit = 0.0;
    double tau0 = 0.0;
    Readout readout;
    FitResult fit;
};

/// For each K in 1..k_max, the grid point minimizing hold wMSE (ties: lowest
/// k_fit, then lowest tau0). Grid points run in parallel under OpenMP.
std::vector<DepthResult> reservoir_grid_search(const Trace& trace, int k_max, const ReservoirGrid& grid);

/// Single-threaded reference for reservoir_grid_search; same result bits.
std::vector<DepthResult> reservoir_grid_search_serial(const Trace& trace, int k_max, const ReservoirGrid& grid);

/// Linearization of the cascade around the constant-input steady state.
struct LinearResponse {
    std::vector<double> working_point; ///< z*_0 .. z*_{K-1}
    std::vector<double> gains;         ///< g_1 .. g_K
    std::vector<double> taus;          ///< tau_1 .. tau_K
};

/// dG/dx = a (c + x)^{a-1} - b.
double gate_derivative(const GateParams& p, double x);

/// Working point z*_0 = input_level, z*_k = G_k(z*_{k-1}); gains from the
/// gate derivative at z*_{k-1}.
LinearResponse linearize(const CascadeSpec& spec, double input_level);

/// H_K(s) = prod g_k / (1 + s tau_k). Throws DomainError at a pole.
std::complex<double> transfer_function(const LinearResponse& lr, std::complex<double> s);

} // namespace emlrom

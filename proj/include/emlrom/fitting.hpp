#pragma once

#include "emlrom/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emlrom {

/// Deterministic train/hold partition: hold = {i : i mod 4 == offset}.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> hold;
    int offset = 3;
};

Split split_train_hold(std::size_t n_points, int offset = 3);

struct FlooredSems {
    std::vector<double> sigma; ///< max(sem_i, floor)
    double floor = 0.0;
    bool fallback = false;     ///< no positive SEM; floor = 0.05 median |y|
};

/// floor = 0.25 median{sem_i > 0}. Missing SEMs are NaN. When no SEM is
/// positive the floor falls back to 0.05 median(|y|), which needs `y`.
FlooredSems floor_sems(std::span<const double> sem, std::span<const double> y = {});

/// One observed time series with floored weights and an attached split.
struct Trace {
    std::string label;
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> sem;   ///< as reported (NaN when missing)
    std::vector<double> sigma; ///< floored
    double sigma_floor = 0.0;
    bool sem_fallback = false;
    double dose = 1.0;         ///< input amplitude for dose-driven families
    Split split;

    /// Builds a trace, validates it, floors SEMs and attaches the split.
    static Trace make(std::string label, std::vector<double> t, std::vector<double> y, std::vector<double> sem,
                      int hold_offset = 3, double dose = 1.0);

    std::size_t size() const noexcept { return t.size(); }
};

/// Mean squared weighted residual over `index`.
double wmse(std::span<const double> residuals, std::span<const double> sigma, std::span<const std::size_t> index);

struct FitOptions {
    int n_starts = 32;
    std::uint64_t seed = 1;
    int max_evals_per_start = 0; ///< Nelder-Mead budget; 0 means 300 * dim
    int lm_iterations = 60;
    int screen_factor = 8;  ///< starts are the best n_starts of n_starts * screen_factor Sobol points
};

struct FitResult {
    std::string model;
    std::vector<std::string> names;
    std::vector<double> theta;
    double chi2_train = 0.0;
    double wmse_train = 0.0;
    double wmse_hold = 0.0;
    std::size_t n_train = 0;
    std::size_t n_hold = 0;
    std::size_t n_params = 0;
    int starts_tried = 0;
    int best_start = -1;
    bool converged = false;
    bool feasible = false;
    std::vector<bool> at_bound;

    /// Names of parameters flagged at a bound, comma separated.
    std::string bound_flags() const;
};

/// Weighted residuals (y - yhat)/sigma of `theta` on every point of every
/// trace, concatenated in trace order. Empty if the point is infeasible.
std::vector<double> weighted_residuals(const ResponseFamily& family, std::span<const Trace> traces,
                                       std::span<const double> theta);

/// Scores a fixed parameter vector (no optimization).
FitResult evaluate_fit(const ResponseFamily& family, std::span<const Trace> traces, const Bounds& bounds,
                       std::vector<double> theta);

/// Multistart bounded fit: for each deterministic start point, Nelder-Mead in
/// normalized coordinates followed by a finite-difference Levenberg-Marquardt
/// polish. Training chi2 is summed over traces with shared parameters. When
/// every start fails the result is marked infeasible with infinite scores.
FitResult fit_model(const ResponseFamily& family, std::span<const Trace> traces, const FitOptions& options);
FitResult fit_model(const ResponseFamily& family, std::span<const Trace> traces, const Bounds& bounds,
                    const FitOptions& options);

/// Start point `index` of the shifted Sobol sequence used by fit_model, in
/// normalized [0,1)^dim coordinates.
std::vector<std::vector<double>> start_points(std::size_t dim, int count, std::uint64_t seed);

/// Seed for one candidate: mixes the global seed with a stable string hash
/// so results do not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key) noexcept;

/// Maps normalized coordinates to parameter values and back.
double to_param(const ParamBound& b, double u) noexcept;
double to_unit(const ParamBound& b, double value) noexcept;

} // namespace emlrom

#pragma once

#include <span>
#include <string>
#include <vector>

namespace emlrom {

/// How the optimizer moves along a parameter axis.
enum class Scale { Linear, Log };

struct ParamBound {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    Scale scale = Scale::Linear;
};

using Bounds = std::vector<ParamBound>;

/// A parametric response model that can be fitted to traces. Implementations
/// are immutable and safe to share between fitting workers.
class ResponseFamily {
public:
    virtual ~ResponseFamily() = default;

    virtual std::string name() const = 0;

    /// Default search box; its size defines the parameter count.
    virtual Bounds default_bounds() const = 0;

    /// Writes the model prediction at `times` into `out`. `dose` is the trace's
    /// input amplitude (used by dose-driven families, ignored otherwise).
    /// Returns false when the parameter point leaves the model's domain.
    virtual bool predict(std::span<const double> theta, std::span<const double> times, double dose,
                         std::span<double> out) const = 0;

    /// Indices of parameters that enter the prediction linearly: with the
    /// others fixed, yhat = f0 + sum_j theta_j g_j. The fitter solves these
    /// by weighted least squares during the global search.
    virtual std::vector<std::size_t> linear_parameters() const { return {}; }

    /// Column 0 of `out` gets f0 and column c gets g_c for linear parameter
    /// c (columns of length times.size(), stored back to back). The linear
    /// entries of `theta` are scratch. The default evaluates predict once per
    /// column.
    virtual bool predict_basis(std::span<double> theta, std::span<const double> times, double dose,
                               std::span<double> out) const
    {
        const auto lin = linear_parameters();
        const std::size_t n = times.size();
        for (std::size_t c = 0; c <= lin.size(); ++c) {
            for (const std::size_t j : lin)
                theta[j] = 0.0;
            if (c > 0)
                theta[lin[c - 1]] = 1.0;
            const auto col = out.subspan(c * n, n);
            if (!predict(theta, times, dose, col))
                return false;
            if (c > 0)
                for (std::size_t i = 0; i < n; ++i)
                    col[i] -= out[i];
        }
        return true;
    }

    std::size_t parameter_count() const { return default_bounds().size(); }
};

} // namespace emlrom

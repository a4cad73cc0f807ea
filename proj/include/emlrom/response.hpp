#pragma once

#include "emlrom/expr.hpp"
#include "emlrom/model.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace emlrom {

/// R(t) = amplitude * (1 - exp(-k t)).
double recruitment_input(double t, double k, double amplitude = 1.0);

enum class Embedding {
    Static,     ///< y = y0 + B E(R(t;k))
    Relaxation, ///< tau y' = -y + y0 + B E(R(t;k)), y(0) = y0
    DoseOde,    ///< tau y' = -y + 1 + B E(D(1 - exp(-k t))), y(0) = 1
};

const char* to_string(Embedding e) noexcept;

using Drive = std::function<double(double)>;

/// Minimum ratio tau / t_max below which the fixed-step solve is refused.
inline constexpr double kMinRelativeTau = 1e-8;

/// Solves tau y' = -y + F(t) from y(0) = y_init by fixed-step RK4. Each grid
/// interval is split into equal substeps no longer than min(tau/20, dt/4).
/// Returns false (and leaves `out` unspecified) if the drive leaves its
/// domain, the solution is non-finite, or tau is below kMinRelativeTau of
/// the horizon.
template <class F>
bool integrate_relaxation(F&& drive, double tau, double y_init, std::span<const double> times, std::span<double> out)
{
    if (times.empty())
        return true;
    const double horizon = times.back();
    if (!(tau > 0.0) || tau < kMinRelativeTau * horizon)
        return false;
    double t = 0.0;
    double y = y_init;
    double f_now = drive(t);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double span = times[i] - t;
        if (span > 0.0) {
            const int n = static_cast<int>(std::max(4.0, std::ceil(span * 20.0 / tau - 1e-9)));
            const double h = span / n;
            const double rate = 1.0 / tau;
            for (int s = 0; s < n; ++s) {
                const double t0 = t + s * h;
                const double f_mid = drive(t0 + 0.5 * h);
                const double f_end = drive(t0 + h);
                const double k1 = rate * (f_now - y);
                const double k2 = rate * (f_mid - (y + 0.5 * h * k1));
                const double k3 = rate * (f_mid - (y + 0.5 * h * k2));
                const double k4 = rate * (f_end - (y + h * k3));
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                f_now = f_end;
            }
            t = times[i];
        }
        if (!std::isfinite(y))
            return false;
        out[i] = y;
    }
    return true;
}

/// Throwing wrapper around integrate_relaxation. Times must be >= 0 and
/// strictly increasing.
std::vector<double> relax_solve(const Drive& drive, double tau, double y_init, std::span<const double> times);

/// Independent route: y(t) = y_init e^{-t/tau} + (1/tau) int_0^t e^{-(t-s)/tau} F(s) ds
/// with composite Simpson panels no wider than tau/20.
std::vector<double> convolution_solve(const Drive& drive, double tau, double y_init, std::span<const double> times);

/// Fully-occupied linker fraction Phi_N(S) = S / (S^N + sum_{n=1..N} n S^{N-n}).
double linker_phi(int n_sites, double s);

/// Maximizer of R^alpha - beta R for 0 < alpha < 1, beta > 0.
double m1_optimum(double alpha, double beta);

/// Static response y0 + B E(R(t;k)) (EML) or y0 + E(R(t;k)) (Hill) with the
/// parameter layout of ExpressionFamily(Static).
double static_response(const Expression& e, BlockKind kind, std::span<const double> theta, double t);

/// Grammar expression embedded in a response model. Parameter layout is the
/// global parameters followed by 3 per block in slot order:
///   Static     EML: y0 B k        Hill: y0 k
///   Relaxation EML: y0 B k tau    Hill: y0 k tau
///   DoseOde    EML: B k tau       Hill: k tau
class ExpressionFamily final : public ResponseFamily {
public:
    ExpressionFamily(Expression expr, BlockKind kind, Embedding embedding);

    std::string name() const override;
    Bounds default_bounds() const override;
    bool predict(std::span<const double> theta, std::span<const double> times, double dose,
                 std::span<double> out) const override;
    std::vector<std::size_t> linear_parameters() const override;
    bool predict_basis(std::span<double> theta, std::span<const double> times, double dose,
                       std::span<double> out) const override;

    const Expression& expression() const noexcept { return expr_; }
    BlockKind kind() const noexcept { return kind_; }
    Embedding embedding() const noexcept { return embedding_; }
    std::size_t global_count() const noexcept;

private:
    Expression expr_;
    BlockKind kind_;
    Embedding embedding_;
};

struct LinkerModel {
    int n_sites = 4;
    double amplitude = 1.0; ///< A
    double s0 = 1.0;        ///< baseline linker variable
    double q = 1.0;         ///< dose-to-linker conversion
    double k = 1.0;         ///< recruitment rate
    double tau = 1.0;       ///< relaxation time
};

/// tau y' = -y + 1 + A[Phi_N(S_D(t)) - Phi_N(S0)], S_D = S0 + q D (1 - e^{-kt}), y(0) = 1.
std::vector<double> linker_ode(const LinkerModel& model, double dose, std::span<const double> times);

/// Linker model as a fittable family; parameters A, S0, q, k, tau.
class LinkerFamily final : public ResponseFamily {
public:
    explicit LinkerFamily(int n_sites);

    std::string name() const override;
    Bounds default_bounds() const override;
    bool predict(std::span<const double> theta, std::span<const double> times, double dose,
                 std::span<double> out) const override;
    std::vector<std::size_t> linear_parameters() const override { return {0}; }

private:
    int n_sites_;
};

} // namespace emlrom

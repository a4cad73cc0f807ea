#include "emlrom/response.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace emlrom {

namespace {

void check_grid(std::span<const double> times)
{
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0 || (i > 0 && !(times[i] > times[i - 1])))
            throw std::invalid_argument("time grid must be non-negative and strictly increasing");
    }
}

void check_tau(double tau, std::span<const double> times)
{
    if (!(tau > 0.0))
        throw DomainError("relaxation time must be positive");
    if (!times.empty() && tau < kMinRelativeTau * times.back())
        throw DomainError("relaxation time below step-size underflow limit");
}

// Shared bounds ledger.
ParamBound y0_bound() { return {"y0", -1e2, 1e2, Scale::Linear}; }
ParamBound amp_bound() { return {"B", -1e3, 1e3, Scale::Linear}; }
ParamBound rate_bound() { return {"k", 1e-3, 10.0, Scale::Log}; }
ParamBound tau_bound() { return {"tau", 1e-2, 1e3, Scale::Log}; }

} // namespace

double recruitment_input(double t, double k, double amplitude)
{
    return amplitude * -std::expm1(-k * t);
}

const char* to_string(Embedding e) noexcept
{
    switch (e) {
    case Embedding::Static: return "static";
    case Embedding::Relaxation: return "relax";
    case Embedding::DoseOde: return "dose-ode";
    }
    return "?";
}

std::vector<double> relax_solve(const Drive& drive, double tau, double y_init, std::span<const double> times)
{
    check_grid(times);
    check_tau(tau, times);
    std::vector<double> out(times.size());
    if (!integrate_relaxation(drive, tau, y_init, times, out))
        throw DomainError("relaxation solve failed: drive left its domain or the solution diverged");
    return out;
}

std::vector<double> convolution_solve(const Drive& drive, double tau, double y_init, std::span<const double> times)
{
    check_grid(times);
    check_tau(tau, times);
    std::vector<double> out(times.size());
    // I(t) = (1/tau) int_0^t e^{-(t-s)/tau} F(s) ds, advanced interval by interval.
    double t_prev = 0.0;
    double integral = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double width = t - t_prev;
        if (width > 0.0) {
            const double panel = std::min(tau / 20.0, width / 8.0);
            int m = static_cast<int>(std::ceil(width / panel - 1e-9));
            m += m % 2; // Simpson needs an even count
            const double h = width / m;
            double acc = 0.0;
            for (int j = 0; j <= m; ++j) {
                const double s = t_prev + j * h;
                const double w = (j == 0 || j == m) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
                acc += w * std::exp(-(t - s) / tau) * drive(s);
            }
            integral = std::exp(-width / tau) * integral + acc * h / 3.0 / tau;
        }
        out[i] = y_init * std::exp(-t / tau) + integral;
        if (!std::isfinite(out[i]))
            throw DomainError("convolution solve produced a non-finite value");
        t_prev = t;
    }
    return out;
}

double linker_phi(int n_sites, double s)
{
    if (n_sites < 1)
        throw std::invalid_argument("linker needs at least one binding site");
    if (s < 0.0)
        throw DomainError("linker variable must be non-negative");
    if (s == 0.0)
        return 0.0;
    // Horner: S^N + 1 S^{N-1} + 2 S^{N-2} + ... + N
    double denom = 1.0;
    for (int n = 1; n <= n_sites; ++n)
        denom = denom * s + n;
    return s / denom;
}

double m1_optimum(double alpha, double beta)
{
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0))
        throw DomainError("activation-suppression optimum requires 0 < alpha < 1 and beta > 0");
    return std::pow(alpha / beta, 1.0 / (1.0 - alpha));
}

double static_response(const Expression& e, BlockKind kind, std::span<const double> theta, double t)
{
    const ExpressionFamily fam(e, kind, Embedding::Static);
    if (theta.size() != fam.parameter_count())
        throw std::invalid_argument("static_response: wrong parameter count");
    const std::size_t g = fam.global_count();
    const double y0 = theta[0];
    const double amp = kind == BlockKind::Eml ? theta[1] : 1.0;
    const double k = theta[g - 1];
    return y0 + amp * eval_expr(e, kind, theta.subspan(g), recruitment_input(t, k));
}

ExpressionFamily::ExpressionFamily(Expression expr, BlockKind kind, Embedding embedding)
    : expr_(std::move(expr)), kind_(kind), embedding_(embedding)
{
}

std::string ExpressionFamily::name() const
{
    return expr_.to_string(kind_);
}

std::size_t ExpressionFamily::global_count() const noexcept
{
    const std::size_t amp = kind_ == BlockKind::Eml ? 1 : 0;
    switch (embedding_) {
    case Embedding::Static: return 2 + amp;
    case Embedding::Relaxation: return 3 + amp;
    case Embedding::DoseOde: return 2 + amp;
    }
    return 0;
}

Bounds ExpressionFamily::default_bounds() const
{
    Bounds b;
    if (embedding_ != Embedding::DoseOde)
        b.push_back(y0_bound());
    if (kind_ == BlockKind::Eml)
        b.push_back(amp_bound());
    b.push_back(rate_bound());
    if (embedding_ != Embedding::Static)
        b.push_back(tau_bound());
    const int blocks = expr_.block_count();
    for (int j = 1; j <= blocks; ++j) {
        const std::string s = std::to_string(j);
        if (kind_ == BlockKind::Eml) {
            b.push_back({"a" + s, 1e-3, 1e2, Scale::Log});
            b.push_back({"b" + s, 0.0, 10.0, Scale::Linear});
            b.push_back({"c" + s, kGateGuard, 1e2, Scale::Log});
        } else {
            b.push_back({"A" + s, -1e3, 1e3, Scale::Linear});
            b.push_back({"Kd" + s, 1e-4, 10.0, Scale::Log});
            b.push_back({"h" + s, 0.5, 30.0, Scale::Log});
        }
    }
    return b;
}

std::vector<std::size_t> ExpressionFamily::linear_parameters() const
{
    std::vector<std::size_t> out;
    if (embedding_ != Embedding::DoseOde)
        out.push_back(0); // y0
    if (kind_ == BlockKind::Eml) {
        out.push_back(out.size()); // B
        return out;
    }
    // amplitudes of blocks reached from the root through sums only
    const auto& tok = expr_.tokens();
    const std::size_t g = global_count();
    std::size_t slot = 0;
    int inside = 0;
    std::vector<int> open; // pending children per enclosing block
    for (const auto t : tok) {
        if (t == Expression::Token::Block) {
            if (inside == 0)
                out.push_back(g + 3 * slot);
            ++slot;
            ++inside;
            open.push_back(1);
            continue;
        }
        if (t == Expression::Token::Sum) {
            if (!open.empty())
                open.back() += 1;
            continue;
        }
        // a terminal closes subtrees whose pending count drops to zero
        while (!open.empty()) {
            if (--open.back() > 0)
                break;
            open.pop_back();
            --inside;
        }
    }
    return out;
}

bool ExpressionFamily::predict_basis(std::span<double> theta, std::span<const double> times, double dose,
                                     std::span<double> out) const
{
    if (kind_ == BlockKind::Hill)
        return ResponseFamily::predict_basis(theta, times, dose, out);
    // EML: y = y0 + B u with u the (relaxed) expression response
    const std::size_t n = times.size();
    std::size_t col = 0;
    const bool has_y0 = embedding_ != Embedding::DoseOde;
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), has_y0 ? 0.0 : 1.0);
    if (has_y0) {
        ++col;
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(n), out.begin() + static_cast<std::ptrdiff_t>(2 * n), 1.0);
    }
    const auto u = out.subspan((col + 1) * n, n);
    std::size_t i = has_y0 ? 2 : 1;
    const double k = theta[i++];
    const double tau = embedding_ == Embedding::Static ? 0.0 : theta[i++];
    const double input_amp = has_y0 ? 1.0 : dose;
    const auto blocks = std::span<const double>(theta).subspan(global_count());
    const BoundExpression expr(expr_, kind_, blocks);
    auto drive = [&](double t) { return expr(recruitment_input(t, k, input_amp)); };
    if (embedding_ == Embedding::Static) {
        for (std::size_t j = 0; j < n; ++j) {
            u[j] = drive(times[j]);
            if (!std::isfinite(u[j]))
                return false;
        }
        return true;
    }
    return integrate_relaxation(drive, tau, 0.0, times, u);
}

bool ExpressionFamily::predict(std::span<const double> theta, std::span<const double> times, double dose,
                               std::span<double> out) const
{
    const std::size_t g = global_count();
    const bool eml = kind_ == BlockKind::Eml;
    const auto blocks = theta.subspan(g);
    std::size_t i = 0;
    double y0 = 1.0;
    double amp = 1.0;
    double input_amp = 1.0;
    if (embedding_ != Embedding::DoseOde)
        y0 = theta[i++];
    else
        input_amp = dose;
    if (eml)
        amp = theta[i++];
    const double k = theta[i++];
    const double tau = embedding_ == Embedding::Static ? 0.0 : theta[i++];

    const BoundExpression expr(expr_, kind_, blocks);
    auto drive = [&](double t) { return y0 + amp * expr(recruitment_input(t, k, input_amp)); };
    if (embedding_ == Embedding::Static) {
        for (std::size_t j = 0; j < times.size(); ++j) {
            out[j] = drive(times[j]);
            if (!std::isfinite(out[j]))
                return false;
        }
        return true;
    }
    return integrate_relaxation(drive, tau, y0, times, out);
}

std::vector<double> linker_ode(const LinkerModel& m, double dose, std::span<const double> times)
{
    if (m.n_sites < 1 || !(m.k > 0.0) || m.s0 <= 0.0)
        throw std::invalid_argument("invalid linker model");
    const double base = linker_phi(m.n_sites, m.s0);
    auto drive = [&](double t) {
        const double s = m.s0 + m.q * recruitment_input(t, m.k, dose);
        return 1.0 + m.amplitude * (linker_phi(m.n_sites, s) - base);
    };
    return relax_solve(drive, m.tau, 1.0, times);
}

LinkerFamily::LinkerFamily(int n_sites) : n_sites_(n_sites)
{
    if (n_sites < 1)
        throw std::invalid_argument("linker needs at least one binding site");
}

std::string LinkerFamily::name() const
{
    return "Linker N=" + std::to_string(n_sites_);
}

Bounds LinkerFamily::default_bounds() const
{
    return {
        {"A", 1e-2, 1e8, Scale::Log},
        {"S0", 1e-3, 1e3, Scale::Log},
        {"q", 1e-8, 1e2, Scale::Log},
        rate_bound(),
        tau_bound(),
    };
}

bool LinkerFamily::predict(std::span<const double> theta, std::span<const double> times, double dose,
                           std::span<double> out) const
{
    const double amp = theta[0];
    const double s0 = theta[1];
    const double q = theta[2];
    const double k = theta[3];
    const double tau = theta[4];
    if (!(s0 > 0.0))
        return false;
    const double base = linker_phi(n_sites_, s0);
    auto drive = [&](double t) {
        const double s = s0 + q * recruitment_input(t, k, dose);
        if (!(s > 0.0))
            return std::numeric_limits<double>::quiet_NaN();
        return 1.0 + amp * (linker_phi(n_sites_, s) - base);
    };
    return integrate_relaxation(drive, tau, 1.0, times, out);
}

} // namespace emlrom

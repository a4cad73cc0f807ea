#include "emlrom/fitting.hpp"

#include "emlrom/rng.hpp"

#include <Eigen/Dense>
#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace emlrom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v)
{
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Training objective over normalized coordinates; owns scratch buffers so
/// one instance serves one fitting thread.
class Objective {
public:
    Objective(const ResponseFamily& family, std::span<const Trace> traces, const Bounds& bounds)
        : family_(family), traces_(traces), bounds_(bounds), theta_(bounds.size())
    {
        std::size_t longest = 0;
        for (const auto& tr : traces) {
            longest = std::max(longest, tr.size());
            n_train_ += tr.split.train.size();
        }
        pred_.resize(longest);
        linear_ = family.linear_parameters();
        std::vector<bool> is_linear(bounds.size(), false);
        for (const std::size_t j : linear_)
            if (j < bounds.size())
                is_linear[j] = true;
        for (std::size_t j = 0; j < bounds.size(); ++j)
            if (!is_linear[j])
                nonlinear_.push_back(j);
        if (nonlinear_.size() + linear_.size() != bounds.size()) {
            linear_.clear();
            nonlinear_.clear();
        }
    }

    std::size_t dim() const noexcept { return bounds_.size(); }
    std::size_t n_train() const noexcept { return n_train_; }
    std::size_t reduced_dim() const noexcept { return nonlinear_.size(); }
    bool separable() const noexcept { return !linear_.empty() && !nonlinear_.empty(); }

    const std::vector<double>& theta_of(std::span<const double> u)
    {
        for (std::size_t j = 0; j < bounds_.size(); ++j)
            theta_[j] = to_param(bounds_[j], u[j]);
        return theta_;
    }

    /// Training residuals into `r` (size n_train). False if infeasible.
    bool residuals(std::span<const double> u, std::span<double> r)
    {
        const auto& theta = theta_of(u);
        std::size_t k = 0;
        for (const auto& tr : traces_) {
            std::span<double> pred(pred_.data(), tr.size());
            if (!family_.predict(theta, tr.t, tr.dose, pred))
                return false;
            for (const std::size_t i : tr.split.train) {
                r[k] = (tr.y[i] - pred[i]) / tr.sigma[i];
                if (!std::isfinite(r[k]))
                    return false;
                ++k;
            }
        }
        return true;
    }

    double chi2(std::span<const double> u)
    {
        scratch_.resize(n_train_);
        if (!residuals(u, scratch_))
            return kInf;
        double s = 0.0;
        for (const double v : scratch_)
            s += v * v;
        return std::isfinite(s) ? s : kInf;
    }

    /// Chi2 over the nonlinear coordinates `v` with the linear parameters
    /// set by bounded weighted least squares. Writes the full normalized
    /// point into `u_full` when given.
    double reduced_chi2(std::span<const double> v, std::vector<double>* u_full = nullptr)
    {
        const std::size_t nl = linear_.size();
        for (std::size_t j = 0; j < nonlinear_.size(); ++j)
            theta_[nonlinear_[j]] = to_param(bounds_[nonlinear_[j]], v[j]);
        const auto m = static_cast<Eigen::Index>(n_train_);
        basis_.resize(m, static_cast<Eigen::Index>(nl + 1));
        Eigen::Index k = 0;
        for (const auto& tr : traces_) {
            const std::size_t n = tr.size();
            cols_.resize(n * (nl + 1));
            if (!family_.predict_basis(theta_, tr.t, tr.dose, cols_))
                return kInf;
            for (const std::size_t i : tr.split.train) {
                for (std::size_t c = 0; c <= nl; ++c) {
                    const double v = cols_[c * n + i];
                    if (!std::isfinite(v))
                        return kInf;
                    basis_(k, static_cast<Eigen::Index>(c)) = v / tr.sigma[i];
                }
                ++k;
            }
        }
        target_.resize(m);
        k = 0;
        for (const auto& tr : traces_)
            for (const std::size_t i : tr.split.train)
                target_(k++) = tr.y[i] / tr.sigma[i];
        const Eigen::VectorXd rhs = target_ - basis_.col(0);
        const auto x = basis_.rightCols(static_cast<Eigen::Index>(nl));
        Eigen::VectorXd beta = x.colPivHouseholderQr().solve(rhs);
        for (std::size_t c = 0; c < nl; ++c) {
            const auto& b = bounds_[linear_[c]];
            double& v_c = beta(static_cast<Eigen::Index>(c));
            if (!std::isfinite(v_c))
                v_c = std::clamp(0.0, b.lo, b.hi);
            v_c = std::clamp(v_c, b.lo, b.hi);
        }
        reduced_r_ = rhs - x * beta;
        const double f = reduced_r_.squaredNorm();
        if (!std::isfinite(f))
            return kInf;
        if (u_full != nullptr) {
            u_full->assign(bounds_.size(), 0.0);
            for (std::size_t j = 0; j < nonlinear_.size(); ++j)
                (*u_full)[nonlinear_[j]] = v[j];
            for (std::size_t c = 0; c < nl; ++c)
                (*u_full)[linear_[c]] = to_unit(bounds_[linear_[c]], beta(static_cast<Eigen::Index>(c)));
        }
        return f;
    }

    /// Residual vector of reduced_chi2.
    bool reduced_residuals(std::span<const double> v, std::span<double> r)
    {
        if (!std::isfinite(reduced_chi2(v)))
            return false;
        std::copy(reduced_r_.begin(), reduced_r_.end(), r.begin());
        return true;
    }

private:
    const ResponseFamily& family_;
    std::span<const Trace> traces_;
    const Bounds& bounds_;
    std::vector<double> theta_;
    std::vector<double> pred_;
    std::vector<double> scratch_;
    std::vector<double> cols_;
    std::vector<std::size_t> linear_;
    std::vector<std::size_t> nonlinear_;
    Eigen::MatrixXd basis_;
    Eigen::VectorXd target_;
    Eigen::VectorXd reduced_r_;
    std::size_t n_train_ = 0;
};

void clamp_unit(std::span<double> u)
{
    for (double& v : u)
        v = std::clamp(v, 0.0, 1.0);
}

struct LocalResult {
    std::vector<double> u;
    double f = kInf;
    bool converged = false;
};

/// Bounded Nelder-Mead on the unit box (vertices are projected into the box).
template <class F>
LocalResult nelder_mead(F&& objective, std::vector<double> x0, int max_evals)
{
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> f(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        double& c = simplex[i + 1][i];
        c += (c + 0.1 <= 1.0) ? 0.1 : -0.1;
    }
    int evals = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        f[i] = objective(simplex[i]);
        ++evals;
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    bool converged = false;
    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];

        double size = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                size = std::max(size, std::abs(simplex[i][j] - simplex[best][j]));
        const double spread = f[worst] - f[best];
        if (std::isfinite(f[best]) && size < 1e-9 && spread <= 1e-12 * (1.0 + std::abs(f[best]))) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst)
                continue;
            for (std::size_t j = 0; j < n; ++j)
                centroid[j] += simplex[i][j] / static_cast<double>(n);
        }
        for (std::size_t j = 0; j < n; ++j)
            xr[j] = centroid[j] + (centroid[j] - simplex[worst][j]);
        clamp_unit(xr);
        const double fr = objective(xr);
        ++evals;

        if (fr < f[best]) {
            for (std::size_t j = 0; j < n; ++j)
                xe[j] = centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]);
            clamp_unit(xe);
            const double fe = objective(xe);
            ++evals;
            if (fe < fr) {
                simplex[worst] = xe;
                f[worst] = fe;
            } else {
                simplex[worst] = xr;
                f[worst] = fr;
            }
            continue;
        }
        if (fr < f[second]) {
            simplex[worst] = xr;
            f[worst] = fr;
            continue;
        }
        // contraction (outside if the reflection improved on the worst point)
        const bool outside = fr < f[worst];
        for (std::size_t j = 0; j < n; ++j) {
            const double toward = outside ? xr[j] : simplex[worst][j];
            xc[j] = centroid[j] + 0.5 * (toward - centroid[j]);
        }
        const double fc = objective(xc);
        ++evals;
        if (fc < (outside ? fr : f[worst])) {
            simplex[worst] = xc;
            f[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best)
                continue;
            for (std::size_t j = 0; j < n; ++j)
                simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            f[i] = objective(simplex[i]);
            ++evals;
        }
    }
    const auto it = std::min_element(f.begin(), f.end());
    return {simplex[static_cast<std::size_t>(it - f.begin())], *it, converged};
}

/// Finite-difference Levenberg-Marquardt on the unit box. `residuals(u, r)`
/// fills m residuals and returns false when infeasible.
template <class F>
LocalResult levenberg_marquardt(F&& residuals, std::size_t m, LocalResult start, int iterations)
{
    const std::size_t n = start.u.size();
    if (!std::isfinite(start.f) || m == 0)
        return start;

    Eigen::VectorXd r(static_cast<Eigen::Index>(m));
    Eigen::VectorXd r_step(static_cast<Eigen::Index>(m));
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> u = start.u;
    std::vector<double> trial(n);
    if (!residuals(u, std::span<double>(r.data(), m)))
        return start;
    double f = r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;

    for (int it = 0; it < iterations; ++it) {
        for (std::size_t j = 0; j < n; ++j) {
            trial = u;
            const double step = u[j] + 1e-7 <= 1.0 ? 1e-7 : -1e-7;
            trial[j] += step;
            if (!residuals(trial, std::span<double>(r_step.data(), m)))
                return {u, f, converged};
            jac.col(static_cast<Eigen::Index>(j)) = (r_step - r) / step;
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;
        bool improved = false;
        while (lambda < 1e12) {
            Eigen::MatrixXd lhs = jtj;
            for (Eigen::Index j = 0; j < lhs.rows(); ++j)
                lhs(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            const Eigen::VectorXd delta = lhs.ldlt().solve(-grad);
            for (std::size_t j = 0; j < n; ++j)
                trial[j] = std::clamp(u[j] + delta(static_cast<Eigen::Index>(j)), 0.0, 1.0);
            if (residuals(trial, std::span<double>(r_step.data(), m))) {
                const double ft = r_step.squaredNorm();
                if (std::isfinite(ft) && ft < f) {
                    const double rel = (f - ft) / std::max(f, 1e-300);
                    u = trial;
                    r = r_step;
                    f = ft;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    improved = true;
                    if (rel < 1e-12)
                        converged = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if (!improved) {
            converged = true;
            break;
        }
        if (converged)
            break;
    }
    return {u, f, converged || start.converged};
}

LocalResult lm_polish(Objective& obj, LocalResult start, int iterations)
{
    return levenberg_marquardt([&](std::span<const double> u, std::span<double> r) { return obj.residuals(u, r); },
                               obj.n_train(), std::move(start), iterations);
}

} // namespace

Split split_train_hold(std::size_t n_points, int offset)
{
    if (n_points < 4)
        throw std::invalid_argument("split needs at least 4 points");
    if (offset < 0 || offset > 3)
        throw std::invalid_argument("hold offset must be in 0..3");
    Split s;
    s.offset = offset;
    for (std::size_t i = 0; i < n_points; ++i)
        (i % 4 == static_cast<std::size_t>(offset) ? s.hold : s.train).push_back(i);
    return s;
}

FlooredSems floor_sems(std::span<const double> sem, std::span<const double> y)
{
    std::vector<double> positive;
    for (const double s : sem)
        if (s > 0.0)
            positive.push_back(s);
    FlooredSems out;
    if (!positive.empty()) {
        out.floor = 0.25 * median(std::move(positive));
    } else {
        std::vector<double> mag;
        for (const double v : y)
            mag.push_back(std::abs(v));
        out.fallback = true;
        out.floor = mag.empty() ? 0.0 : 0.05 * median(std::move(mag));
        if (!(out.floor > 0.0))
            throw std::invalid_argument("no positive SEM and no usable y magnitude for the fallback floor");
    }
    out.sigma.reserve(sem.size());
    for (const double s : sem)
        out.sigma.push_back(s > out.floor ? s : out.floor); // NaN compares false -> floor
    return out;
}

Trace Trace::make(std::string label, std::vector<double> t, std::vector<double> y, std::vector<double> sem,
                  int hold_offset, double dose)
{
    if (t.size() != y.size() || t.size() != sem.size())
        throw std::invalid_argument("trace " + label + ": column lengths differ");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw std::invalid_argument("trace " + label + ": times must be strictly increasing");
    Trace tr;
    auto floored = floor_sems(sem, y);
    tr.label = std::move(label);
    tr.t = std::move(t);
    tr.y = std::move(y);
    tr.sem = std::move(sem);
    tr.sigma = std::move(floored.sigma);
    tr.sigma_floor = floored.floor;
    tr.sem_fallback = floored.fallback;
    tr.dose = dose;
    tr.split = split_train_hold(tr.t.size(), hold_offset);
    return tr;
}

double wmse(std::span<const double> residuals, std::span<const double> sigma, std::span<const std::size_t> index)
{
    if (index.empty())
        throw std::invalid_argument("wmse over an empty index set");
    double s = 0.0;
    for (const std::size_t i : index) {
        const double w = residuals[i] / sigma[i];
        s += w * w;
    }
    return s / static_cast<double>(index.size());
}

std::string FitResult::bound_flags() const
{
    std::string out;
    for (std::size_t j = 0; j < at_bound.size() && j < names.size(); ++j) {
        if (!at_bound[j])
            continue;
        if (!out.empty())
            out += ';';
        out += names[j];
    }
    return out;
}

double to_param(const ParamBound& b, double u) noexcept
{
    if (b.scale == Scale::Log)
        return std::exp(std::log(b.lo) + u * (std::log(b.hi) - std::log(b.lo)));
    return b.lo + u * (b.hi - b.lo);
}

double to_unit(const ParamBound& b, double value) noexcept
{
    double u = 0.0;
    if (b.scale == Scale::Log)
        u = (std::log(value) - std::log(b.lo)) / (std::log(b.hi) - std::log(b.lo));
    else
        u = (value - b.lo) / (b.hi - b.lo);
    return std::clamp(u, 0.0, 1.0);
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key) noexcept
{
    return mix64(global_seed ^ mix64(fnv1a64(key)));
}

std::vector<std::vector<double>> start_points(std::size_t dim, int count, std::uint64_t seed)
{
    std::vector<std::vector<double>> pts;
    if (dim == 0 || count <= 0)
        return pts;
    boost::random::sobol gen(dim);
    const CounterRng rng(seed);
    std::vector<double> shift(dim);
    for (std::size_t j = 0; j < dim; ++j)
        shift[j] = rng.uniform(j);
    for (int i = 0; i < count; ++i) {
        std::vector<double> p(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double x = static_cast<double>(gen()) * 0x1.0p-64;
            double v = x + shift[j];
            v -= std::floor(v);
            p[j] = v;
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

std::vector<double> weighted_residuals(const ResponseFamily& family, std::span<const Trace> traces,
                                       std::span<const double> theta)
{
    std::vector<double> out;
    for (const auto& tr : traces) {
        std::vector<double> pred(tr.size());
        if (!family.predict(theta, tr.t, tr.dose, pred))
            return {};
        for (std::size_t i = 0; i < tr.size(); ++i)
            out.push_back((tr.y[i] - pred[i]) / tr.sigma[i]);
    }
    return out;
}

FitResult evaluate_fit(const ResponseFamily& family, std::span<const Trace> traces, const Bounds& bounds,
                       std::vector<double> theta)
{
    FitResult res;
    res.model = family.name();
    res.n_params = bounds.size();
    for (const auto& b : bounds)
        res.names.push_back(b.name);
    for (const auto& tr : traces) {
        res.n_train += tr.split.train.size();
        res.n_hold += tr.split.hold.size();
    }
    res.at_bound.assign(bounds.size(), false);
    const auto r = weighted_residuals(family, traces, theta);
    res.theta = std::move(theta);
    if (r.empty()) {
        res.feasible = false;
        res.chi2_train = res.wmse_train = res.wmse_hold = kInf;
        return res;
    }
    double chi_t = 0.0;
    double chi_h = 0.0;
    std::size_t base = 0;
    for (const auto& tr : traces) {
        for (const std::size_t i : tr.split.train)
            chi_t += r[base + i] * r[base + i];
        for (const std::size_t i : tr.split.hold)
            chi_h += r[base + i] * r[base + i];
        base += tr.size();
    }
    res.feasible = std::isfinite(chi_t) && std::isfinite(chi_h);
    res.chi2_train = chi_t;
    res.wmse_train = res.n_train ? chi_t / static_cast<double>(res.n_train) : 0.0;
    res.wmse_hold = res.n_hold ? chi_h / static_cast<double>(res.n_hold) : 0.0;
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        const double tol = 1e-6 * (bounds[j].hi - bounds[j].lo);
        res.at_bound[j] = res.theta[j] - bounds[j].lo <= tol || bounds[j].hi - res.theta[j] <= tol;
    }
    return res;
}

FitResult fit_model(const ResponseFamily& family, std::span<const Trace> traces, const FitOptions& options)
{
    return fit_model(family, traces, family.default_bounds(), options);
}

FitResult fit_model(const ResponseFamily& family, std::span<const Trace> traces, const Bounds& bounds,
                    const FitOptions& options)
{
    if (bounds.size() != family.parameter_count())
        throw std::invalid_argument("bounds do not match the parameter count of " + family.name());
    for (const auto& b : bounds)
        if (!(b.lo < b.hi) || (b.scale == Scale::Log && !(b.lo > 0.0)))
            throw std::invalid_argument("invalid bounds for parameter " + b.name);
    if (traces.empty())
        throw std::invalid_argument("fit_model needs at least one trace");

    Objective obj(family, traces, bounds);
    const std::size_t dim = bounds.size();
    const bool separable = obj.separable();
    const std::size_t search_dim = separable ? obj.reduced_dim() : dim;
    const int budget =
        options.max_evals_per_start > 0 ? options.max_evals_per_start : static_cast<int>(300 * search_dim);
    auto starts = start_points(search_dim, options.n_starts * std::max(1, options.screen_factor), options.seed);
    if (options.screen_factor > 1) {
        std::vector<double> score(starts.size());
        for (std::size_t i = 0; i < starts.size(); ++i)
            score[i] = separable ? obj.reduced_chi2(starts[i]) : obj.chi2(starts[i]);
        std::vector<std::size_t> order(starts.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
        std::vector<std::vector<double>> kept;
        for (std::size_t i = 0; i < static_cast<std::size_t>(options.n_starts); ++i)
            kept.push_back(std::move(starts[order[i]]));
        starts = std::move(kept);
    }

    LocalResult best;
    int best_index = -1;
    for (int s = 0; s < static_cast<int>(starts.size()); ++s) {
        LocalResult local;
        if (separable) {
            local = nelder_mead([&](std::span<const double> v) { return obj.reduced_chi2(v); },
                                starts[static_cast<std::size_t>(s)], budget);
            local = levenberg_marquardt(
                [&](std::span<const double> v, std::span<double> r) { return obj.reduced_residuals(v, r); },
                obj.n_train(), std::move(local), options.lm_iterations);
            if (std::isfinite(local.f)) {
                std::vector<double> full;
                local.f = obj.reduced_chi2(local.u, &full);
                local.u = std::move(full);
                local.f = obj.chi2(local.u);
            }
        } else {
            local = nelder_mead([&](std::span<const double> u) { return obj.chi2(u); },
                                starts[static_cast<std::size_t>(s)], budget);
        }
        local = lm_polish(obj, std::move(local), options.lm_iterations);
        if (local.f < best.f) {
            best = std::move(local);
            best_index = s;
        }
    }

    FitResult res;
    if (best_index < 0) {
        res = evaluate_fit(family, traces, bounds, std::vector<double>(dim, std::numeric_limits<double>::quiet_NaN()));
        res.feasible = false;
        res.chi2_train = res.wmse_train = res.wmse_hold = kInf;
    } else {
        res = evaluate_fit(family, traces, bounds, obj.theta_of(best.u));
        res.converged = best.converged;
    }
    res.starts_tried = static_cast<int>(starts.size());
    res.best_start = best_index;
    return res;
}

} // namespace emlrom

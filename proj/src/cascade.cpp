#include "emlrom/cascade.hpp"

#include "emlrom/response.hpp"
#include "emlrom/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace emlrom {

namespace {

struct Layer {
    double a, b, c, c_pow_a, inv_tau;
};

std::vector<Layer> build_layers(const CascadeSpec& spec)
{
    std::vector<Layer> layers;
    for (int k = 1; k <= spec.depth; ++k) {
        const LayerParams lp = spec.layer(k);
        layers.push_back({lp.gate.a, lp.gate.b, lp.gate.c, std::pow(lp.gate.c, lp.gate.a), 1.0 / lp.tau});
    }
    return layers;
}

// dz/dt for all layers; false on a gate domain violation.
bool rhs(const std::vector<Layer>& layers, double k_fit, double t, const double* z, double* dz)
{
    double prev = recruitment_input(t, k_fit);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const Layer& L = layers[k];
        const double x = L.c + prev;
        if (!(x >= kGateGuard))
            return false;
        const double drive = std::pow(x, L.a) - L.b * prev - L.c_pow_a;
        dz[k] = (drive - z[k]) * L.inv_tau;
        prev = z[k];
    }
    return true;
}

struct GridCell {
    std::vector<ReadoutFit> by_depth; // index K-1
    bool ok = false;
};

GridCell evaluate_cell(const Trace& trace, int k_max, double k_fit, double tau0)
{
    GridCell cell;
    StateMatrix states;
    const CascadeSpec spec{k_max, k_fit, tau0};
    if (!cascade_simulate(spec, trace.t, states))
        return cell;
    cell.ok = true;
    for (int K = 1; K <= k_max; ++K)
        cell.by_depth.push_back(fit_readout(states, K, trace));
    return cell;
}

std::vector<DepthResult> reduce_cells(const std::vector<GridCell>& cells, int k_max, const ReservoirGrid& grid)
{
    std::vector<DepthResult> out;
    const std::size_t n_tau = grid.tau0.size();
    for (int K = 1; K <= k_max; ++K) {
        DepthResult best;
        best.depth = K;
        best.fit.wmse_hold = std::numeric_limits<double>::infinity();
        best.fit.feasible = false;
        // cells are ordered k_fit-major, so strict < keeps the lowest (k_fit, tau0) on ties
        for (std::size_t g = 0; g < cells.size(); ++g) {
            if (!cells[g].ok)
                continue;
            const ReadoutFit& rf = cells[g].by_depth[static_cast<std::size_t>(K - 1)];
            if (rf.fit.wmse_hold < best.fit.wmse_hold) {
                best.k_fit = grid.k_fit[g / n_tau];
                best.tau0 = grid.tau0[g % n_tau];
                best.readout = rf.readout;
                best.fit = rf.fit;
            }
        }
        out.push_back(std::move(best));
    }
    return out;
}

void check_search_args(const Trace& trace, int k_max, const ReservoirGrid& grid)
{
    if (k_max < 1)
        throw std::invalid_argument("reservoir search needs k_max >= 1");
    if (grid.k_fit.empty() || grid.tau0.empty())
        throw std::invalid_argument("reservoir grid is empty");
    if (trace.size() < 4)
        throw std::invalid_argument("reservoir search needs a trace with a split");
}

} // namespace

LayerParams gate_schedule(int k, double tau0)
{
    if (k < 1)
        throw std::invalid_argument("layer index starts at 1");
    const double km1 = static_cast<double>(k - 1);
    LayerParams p;
    p.gate.a = 0.45 + 0.035 * km1;
    p.gate.b = k == 1 ? 1.0 : 0.42 - 0.015 * std::min(km1, 10.0);
    p.gate.c = k == 1 ? 1e-6 : 0.08;
    p.tau = tau0 * (1.0 + 0.55 * km1);
    return p;
}

bool cascade_simulate(const CascadeSpec& spec, std::span<const double> times, StateMatrix& out) noexcept
{
    const auto K = static_cast<std::size_t>(std::max(spec.depth, 0));
    out.setZero(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(K));
    if (K == 0 || times.empty())
        return true;
    if (!(spec.tau0 > 0.0))
        return false;
    const auto layers = build_layers(spec);
    std::vector<double> z(K, 0.0), k1(K), k2(K), k3(K), k4(K), tmp(K);
    auto step = [&](double t0, double h) {
        if (!rhs(layers, spec.k_fit, t0, z.data(), k1.data()))
            return false;
        for (std::size_t k = 0; k < K; ++k)
            tmp[k] = z[k] + 0.5 * h * k1[k];
        if (!rhs(layers, spec.k_fit, t0 + 0.5 * h, tmp.data(), k2.data()))
            return false;
        for (std::size_t k = 0; k < K; ++k)
            tmp[k] = z[k] + 0.5 * h * k2[k];
        if (!rhs(layers, spec.k_fit, t0 + 0.5 * h, tmp.data(), k3.data()))
            return false;
        for (std::size_t k = 0; k < K; ++k)
            tmp[k] = z[k] + h * k3[k];
        if (!rhs(layers, spec.k_fit, t0 + h, tmp.data(), k4.data()))
            return false;
        for (std::size_t k = 0; k < K; ++k)
            z[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        return true;
    };
    // G_1(R) behaves like t^a near t = 0; the first step is refined on a
    // dyadic mesh and the next few are split so the singular derivative
    // does not cost accuracy.
    auto graded_first_step = [&](double h) {
        constexpr int levels = 24;
        constexpr int sub = 4;
        double lo = 0.0;
        for (int j = levels; j >= 0; --j) {
            const double hi = j == 0 ? h : std::ldexp(h, -j);
            const double w = (hi - lo) / sub;
            for (int s = 0; s < sub; ++s)
                if (!step(lo + s * w, w))
                    return false;
            lo = hi;
        }
        return true;
    };
    double t = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double span = times[i] - t;
        if (span > 0.0) {
            const int n = static_cast<int>(std::max(4.0, std::ceil(span * 20.0 / spec.tau0 - 1e-9)));
            const double h = span / n;
            for (int s = 0; s < n; ++s) {
                const double t0 = t + s * h;
                bool ok = true;
                if (t0 == 0.0)
                    ok = graded_first_step(h);
                else if (t0 < 8.0 * h)
                    for (int q = 0; q < 4 && ok; ++q)
                        ok = step(t0 + q * 0.25 * h, 0.25 * h);
                else
                    ok = step(t0, h);
                if (!ok)
                    return false;
            }
            t = times[i];
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (!std::isfinite(z[k]))
                return false;
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = z[k];
        }
    }
    return true;
}

StateMatrix cascade_simulate(const CascadeSpec& spec, std::span<const double> times)
{
    if (spec.depth < 0)
        throw std::invalid_argument("cascade depth must be >= 0");
    if (!(spec.tau0 > 0.0) || !(spec.k_fit > 0.0))
        throw std::invalid_argument("cascade needs tau0 > 0 and k_fit > 0");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] < 0.0 || (i > 0 && !(times[i] > times[i - 1])))
            throw std::invalid_argument("time grid must be non-negative and strictly increasing");
    StateMatrix out;
    if (!cascade_simulate(spec, times, out))
        throw DomainError("cascade left the gate domain (c_k + z_{k-1} <= 0) for K=" + std::to_string(spec.depth) +
                          ", k_fit=" + std::to_string(spec.k_fit) + ", tau0=" + std::to_string(spec.tau0));
    return out;
}

ReadoutFit fit_readout(const StateMatrix& states, int depth, const Trace& trace)
{
    if (depth < 0 || depth > states.cols())
        throw std::invalid_argument("readout depth exceeds the available states");
    if (static_cast<std::size_t>(states.rows()) != trace.size())
        throw std::invalid_argument("states and trace have different lengths");
    const auto cols = static_cast<Eigen::Index>(depth + 1);
    const auto& train = trace.split.train;

    Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), cols);
    Eigen::VectorXd rhs_vec(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
        const std::size_t i = train[r];
        const double w = 1.0 / trace.sigma[i];
        const auto row = static_cast<Eigen::Index>(r);
        x(row, 0) = w;
        for (Eigen::Index j = 1; j < cols; ++j)
            x(row, j) = w * states(static_cast<Eigen::Index>(i), j - 1);
        rhs_vec(row) = w * trace.y[i];
    }
    Eigen::MatrixXd normal = x.transpose() * x;
    const Eigen::VectorXd xty = x.transpose() * rhs_vec;

    ReadoutFit out;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    Eigen::VectorXd beta;
    if (!(lmin > 1e-10 * std::max(lmax, 1e-300))) {
        out.readout.rank_deficient = true;
        beta = x.completeOrthogonalDecomposition().solve(rhs_vec);
    } else {
        normal.diagonal().array() += 1e-10;
        beta = normal.ldlt().solve(xty);
    }
    out.readout.beta.assign(beta.data(), beta.data() + beta.size());

    std::vector<double> theta = out.readout.beta;
    FitResult& fit = out.fit;
    fit.model = "cascade K=" + std::to_string(depth);
    for (int j = 0; j <= depth; ++j)
        fit.names.push_back("beta" + std::to_string(j));
    fit.n_params = cascade_param_count(depth);
    const auto pred = readout_predict(states.leftCols(depth), out.readout);
    double chi_t = 0.0;
    double chi_h = 0.0;
    for (const std::size_t i : trace.split.train) {
        const double r = (trace.y[i] - pred[i]) / trace.sigma[i];
        chi_t += r * r;
    }
    for (const std::size_t i : trace.split.hold) {
        const double r = (trace.y[i] - pred[i]) / trace.sigma[i];
        chi_h += r * r;
    }
    fit.theta = std::move(theta);
    fit.n_train = trace.split.train.size();
    fit.n_hold = trace.split.hold.size();
    fit.chi2_train = chi_t;
    fit.wmse_train = chi_t / static_cast<double>(fit.n_train);
    fit.wmse_hold = fit.n_hold ? chi_h / static_cast<double>(fit.n_hold) : 0.0;
    fit.feasible = std::isfinite(chi_t) && std::isfinite(chi_h);
    fit.converged = true;
    fit.starts_tried = 1;
    fit.best_start = 0;
    fit.at_bound.assign(fit.names.size(), false);
    return out;
}

std::vector<double> readout_predict(const StateMatrix& states, const Readout& readout)
{
    const auto depth = static_cast<Eigen::Index>(readout.beta.size()) - 1;
    if (depth > states.cols())
        throw std::invalid_argument("readout has more coefficients than states");
    std::vector<double> y(static_cast<std::size_t>(states.rows()), readout.beta.front());
    for (Eigen::Index i = 0; i < states.rows(); ++i)
        for (Eigen::Index j = 0; j < depth; ++j)
            y[static_cast<std::size_t>(i)] += readout.beta[static_cast<std::size_t>(j + 1)] * states(i, j);
    return y;
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    if (n > 1)
        v.back() = hi;
    return v;
}

ReservoirGrid ReservoirGrid::standard()
{
    return {linspace(0.15, 0.80, 18), linspace(0.5, 5.5, 20)};
}

std::vector<DepthResult> reservoir_grid_search(const Trace& trace, int k_max, const ReservoirGrid& grid)
{
    check_search_args(trace, k_max, grid);
    const std::size_t n_tau = grid.tau0.size();
    const auto n_cells = static_cast<std::ptrdiff_t>(grid.k_fit.size() * n_tau);
    std::vector<GridCell> cells(static_cast<std::size_t>(n_cells));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t g = 0; g < n_cells; ++g) {
        const auto u = static_cast<std::size_t>(g);
        cells[u] = evaluate_cell(trace, k_max, grid.k_fit[u / n_tau], grid.tau0[u % n_tau]);
    }
    return reduce_cells(cells, k_max, grid);
}

std::vector<DepthResult> reservoir_grid_search_serial(const Trace& trace, int k_max, const ReservoirGrid& grid)
{
    check_search_args(trace, k_max, grid);
    const std::size_t n_tau = grid.tau0.size();
    std::vector<GridCell> cells;
    cells.reserve(grid.k_fit.size() * n_tau);
    for (const double kf : grid.k_fit)
        for (const double t0 : grid.tau0)
            cells.push_back(evaluate_cell(trace, k_max, kf, t0));
    return reduce_cells(cells, k_max, grid);
}

double gate_derivative(const GateParams& p, double x)
{
    if (!(p.c + x >= kGateGuard))
        throw DomainError("gate derivative evaluated with c + x <= 0");
    return p.a * std::pow(p.c + x, p.a - 1.0) - p.b;
}

LinearResponse linearize(const CascadeSpec& spec, double input_level)
{
    LinearResponse lr;
    double z = input_level;
    for (int k = 1; k <= spec.depth; ++k) {
        const LayerParams lp = spec.layer(k);
        lr.working_point.push_back(z);
        lr.gains.push_back(gate_derivative(lp.gate, z));
        lr.taus.push_back(lp.tau);
        z = gate_eval(lp.gate, z);
    }
    return lr;
}

std::complex<double> transfer_function(const LinearResponse& lr, std::complex<double> s)
{
    std::complex<double> h(1.0, 0.0);
    for (std::size_t k = 0; k < lr.gains.size(); ++k) {
        const std::complex<double> denom = 1.0 + s * lr.taus[k];
        if (std::abs(denom) < 1e-14)
            throw DomainError("transfer function evaluated at the pole s = -1/tau_" + std::to_string(k + 1));
        h *= lr.gains[k] / denom;
    }
    return h;
}

} // namespace emlrom

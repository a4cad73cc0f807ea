#include "emlrom/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace emlrom {

double validation_score(const FitResult& fit, const Expression& e, const ScoreConfig& cfg)
{
    if (!fit.feasible || !std::isfinite(fit.wmse_hold))
        return std::numeric_limits<double>::infinity();
    const Shape s = measure(e);
    return fit.wmse_hold + cfg.lambda_depth * s.depth + cfg.lambda_nodes * s.nodes;
}

InformationCriteria aic_bic(double chi2_train, std::size_t n_train, std::size_t p)
{
    if (n_train == 0)
        throw std::invalid_argument("aic_bic needs N_T >= 1");
    if (chi2_train < 0.0 || std::isnan(chi2_train))
        throw std::invalid_argument("aic_bic needs chi2 >= 0");
    const double n = static_cast<double>(n_train);
    const double pp = static_cast<double>(p);
    if (chi2_train == 0.0) {
        const double ninf = -std::numeric_limits<double>::infinity();
        return {ninf, ninf, true};
    }
    const double fit_term = n * std::log(chi2_train / n);
    return {fit_term + 2.0 * pp, fit_term + pp * std::log(n), false};
}

std::size_t count_params(const Expression& e, BlockKind kind, Embedding embedding)
{
    return ExpressionFamily(e, kind, embedding).parameter_count();
}

ModelReportRow make_row(const Expression& e, BlockKind kind, const FitResult& fit, const ScoreConfig& cfg)
{
    ModelReportRow row;
    const Shape s = measure(e);
    row.expression = e.to_string(kind);
    row.depth = s.depth;
    row.nodes = s.nodes;
    row.p = fit.n_params;
    row.chi2_train = fit.chi2_train;
    row.wmse_train = fit.wmse_train;
    row.wmse_hold = fit.wmse_hold;
    row.score = validation_score(fit, e, cfg);
    if (fit.feasible && fit.n_train > 0) {
        const auto ic = aic_bic(fit.chi2_train, fit.n_train, fit.n_params);
        row.aic = ic.aic;
        row.bic = ic.bic;
    } else {
        row.aic = row.bic = std::numeric_limits<double>::infinity();
    }
    row.bound_flags = fit.bound_flags();
    row.fit = fit;
    return row;
}

void fill_deltas(std::vector<ModelReportRow>& rows)
{
    double best_aic = std::numeric_limits<double>::infinity();
    double bic_at_best = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (r.aic < best_aic) {
            best_aic = r.aic;
            bic_at_best = r.bic;
        }
    }
    for (auto& r : rows) {
        r.daic = r.aic - best_aic;
        r.dbic = r.bic - bic_at_best;
    }
}

std::vector<ModelReportRow> rank_models(std::vector<ModelReportRow> rows)
{
    if (rows.empty())
        throw std::invalid_argument("rank_models needs at least one row");
    std::sort(rows.begin(), rows.end(), [](const ModelReportRow& x, const ModelReportRow& y) {
        if (x.score != y.score)
            return x.score < y.score;
        if (x.p != y.p)
            return x.p < y.p;
        if (x.nodes != y.nodes)
            return x.nodes < y.nodes;
        return x.expression < y.expression;
    });
    fill_deltas(rows);
    return rows;
}

} // namespace emlrom

#pragma once

#include "emlrom/expr.hpp"
#include "emlrom/fitting.hpp"
#include "emlrom/response.hpp"

#include <string>
#include <vector>

namespace emlrom {

struct ScoreConfig {
    double lambda_depth = 0.0;
    double lambda_nodes = 0.0;
};

/// wMSE_hold + lambda_d d(E) + lambda_n n(E); +inf for infeasible fits.
double validation_score(const FitResult& fit, const Expression& e, const ScoreConfig& cfg);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
    bool degenerate = false; ///< chi2 == 0, both criteria are -inf
};

/// AIC = N ln(chi2/N) + 2p, BIC = N ln(chi2/N) + p ln N.
InformationCriteria aic_bic(double chi2_train, std::size_t n_train, std::size_t p);

/// Fitted-parameter count of a grammar expression under an embedding.
std::size_t count_params(const Expression& e, BlockKind kind, Embedding embedding);

/// p = K + 3 for a depth-K reservoir readout (K+1 coefficients, k_fit, tau0).
constexpr std::size_t cascade_param_count(int depth) noexcept
{
    return static_cast<std::size_t>(depth) + 3;
}

struct ModelReportRow {
    std::string expression;
    int depth = 0;
    int nodes = 0;
    std::size_t p = 0;
    double chi2_train = 0.0;
    double wmse_train = 0.0;
    double wmse_hold = 0.0;
    double score = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double daic = 0.0;
    double dbic = 0.0;
    std::string bound_flags;
    FitResult fit;
};

/// Builds a report row from a finished fit (AIC/BIC filled, deltas zero).
ModelReportRow make_row(const Expression& e, BlockKind kind, const FitResult& fit, const ScoreConfig& cfg);

/// Sorts ascending by score with ties broken by (p, nodes, expression), then
/// fills dAIC/dBIC relative to the minimum-AIC row.
std::vector<ModelReportRow> rank_models(std::vector<ModelReportRow> rows);

/// Fills dAIC/dBIC relative to the minimum-AIC row without reordering.
void fill_deltas(std::vector<ModelReportRow>& rows);

} // namespace emlrom

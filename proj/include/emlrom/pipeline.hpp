#pragma once

#include "emlrom/cascade.hpp"
#include "emlrom/expr.hpp"
#include "emlrom/fitting.hpp"
#include "emlrom/io.hpp"
#include "emlrom/response.hpp"
#include "emlrom/selection.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace emlrom {

struct SearchSettings {
    GrammarConfig grammar{BlockKind::Eml, 2, 5};
    Embedding embedding = Embedding::Static;
    ScoreConfig score;
    int n_starts = 32;
    int max_evals = 0;
    std::uint64_t seed = 1;
    std::map<std::string, std::pair<double, double>> bound_overrides;

    static SearchSettings from(const RunConfig& cfg);
};

/// Fits any family under the search settings; the seed is derived from `key`.
FitResult fit_family(const ResponseFamily& family, const SearchSettings& s, std::span<const Trace> traces,
                     std::string_view key);

/// Fits one expression with its own derived seed.
FitResult fit_expression(const Expression& e, BlockKind kind, const SearchSettings& s, std::span<const Trace> traces);

/// Fits every candidate; candidates run in parallel under OpenMP. Result i
/// belongs to candidate i and does not depend on the thread count.
std::vector<FitResult> fit_candidates(const std::vector<Expression>& candidates, const SearchSettings& s,
                                      std::span<const Trace> traces);

/// Single-threaded reference for fit_candidates.
std::vector<FitResult> fit_candidates_serial(const std::vector<Expression>& candidates, const SearchSettings& s,
                                             std::span<const Trace> traces);

/// Enumerate, fit, score and rank. Throws InfeasibleError when no candidate
/// has a feasible fit.
std::vector<ModelReportRow> search_traces(const SearchSettings& s, std::span<const Trace> traces);

/// A group of traces fitted with shared parameters.
struct Panel {
    std::string name;
    std::vector<Trace> traces;
};

/// One panel per label for static/relax, one per file for dose-ODE.
std::vector<Panel> make_panels(const RunConfig& cfg);

struct CascadeRow {
    int depth = 0;
    std::size_t p = 0;
    double k_fit = 0.0; ///< NaN for the K = 0 comparator
    double tau0 = 0.0;
    double chi2_train = 0.0;
    double wmse_train = 0.0;
    double wmse_hold = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double daic = 0.0;
    double dbic = 0.0;
};

struct CascadeBench {
    Trace trace;
    std::vector<DepthResult> depths;
    FitResult hill;
    std::vector<CascadeRow> rows; ///< K = 0 (Hill comparator), 1..k_max
    int aic_best = 0;
};

/// Reservoir sweep plus the static H(R) comparator on one trace.
CascadeBench cascade_benchmark(const Trace& trace, const RunConfig& cfg);

/// Toy network trace on the configured grid with sem = sigma_noise.
Trace network_trace(const RunConfig& cfg);

/// Subcommands. Each writes its outputs and a manifest.ini under cfg.out_dir.
void run_search(const RunConfig& cfg);
void run_cascade_bench(const RunConfig& cfg);
void run_toybench(const RunConfig& cfg);

} // namespace emlrom

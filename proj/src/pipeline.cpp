#include "emlrom/pipeline.hpp"

#include "emlrom/toybench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>

namespace emlrom {

namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FitOptions fit_options(const SearchSettings& s, std::string_view key)
{
    FitOptions o;
    o.n_starts = s.n_starts;
    o.max_evals_per_start = s.max_evals;
    o.seed = derive_seed(s.seed, key);
    return o;
}

std::vector<double> predict_or_nan(const ResponseFamily& family, const FitResult& fit, const Trace& trace)
{
    std::vector<double> out(trace.size(), kNaN);
    if (!fit.feasible || !family.predict(fit.theta, trace.t, trace.dose, out))
        std::fill(out.begin(), out.end(), kNaN);
    return out;
}

std::string panel_dir_name(std::string name)
{
    for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
            c = '_';
    return name.empty() ? "panel" : name;
}

std::string params_text(const std::string& title, const FitResult& fit)
{
    std::string s = "model = " + title + "\n";
    s += "feasible = " + std::string(fit.feasible ? "true" : "false") + "\n";
    s += "n_params = " + std::to_string(fit.n_params) + "\n";
    s += "n_train = " + std::to_string(fit.n_train) + "\n";
    s += "n_hold = " + std::to_string(fit.n_hold) + "\n";
    s += "chi2_train = " + fmt_num(fit.chi2_train) + "\n";
    s += "wmse_train = " + fmt_num(fit.wmse_train) + "\n";
    s += "wmse_hold = " + fmt_num(fit.wmse_hold) + "\n";
    s += "best_start = " + std::to_string(fit.best_start) + "\n";
    s += "converged = " + std::string(fit.converged ? "true" : "false") + "\n";
    s += "at_bound = " + fit.bound_flags() + "\n";
    for (std::size_t i = 0; i < fit.theta.size(); ++i)
        s += fit.names[i] + " = " + fmt_num(fit.theta[i]) + "\n";
    return s;
}

class OutputSet {
public:
    explicit OutputSet(fs::path root) : root_(std::move(root)) {}

    void write(const std::string& rel, const std::string& content)
    {
        const fs::path p = root_ / rel;
        try {
            write_file(p, content);
        } catch (const std::runtime_error& e) {
            throw DataError(e.what());
        }
        files_.emplace_back(rel, git_blob_hash(content));
    }

    void manifest(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& inputs)
    {
        std::string m = dump_config(cfg);
        m += "\n[manifest]\n";
        m += "seed = " + std::to_string(cfg.seed) + "\n";
        for (std::size_t i = 0; i < inputs.size(); ++i)
            m += fmt::format("input{} = {} {}\n", i + 1, inputs[i].second, inputs[i].first);
        for (const auto& [rel, hash] : files_)
            m += "output." + rel + " = " + hash + "\n";
        write_file(root_ / "manifest.ini", m);
    }

private:
    fs::path root_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::vector<std::pair<std::string, std::string>> input_hashes(const RunConfig& cfg)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : cfg.traces) {
        std::string text;
        try {
            text = read_file(p);
        } catch (const std::runtime_error& e) {
            throw DataError(e.what());
        }
        out.emplace_back(p, git_blob_hash(text));
    }
    return out;
}

std::string ranked_csv(const std::vector<ModelReportRow>& rows)
{
    std::string s = "rank,expression,p,chi2_train,wmse_train,wmse_hold,score,AIC,BIC,dAIC,dBIC,bound_flags\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},\"{}\"\n", i + 1, r.expression, r.p, fmt_num(r.chi2_train),
                         fmt_num(r.wmse_train), fmt_num(r.wmse_hold), fmt_num(r.score), fmt_num(r.aic),
                         fmt_num(r.bic), fmt_num(r.daic), fmt_num(r.dbic), r.bound_flags);
    }
    return s;
}

} // namespace

SearchSettings SearchSettings::from(const RunConfig& cfg)
{
    SearchSettings s;
    s.grammar = cfg.grammar;
    s.embedding = cfg.embedding;
    s.score = cfg.score;
    s.n_starts = cfg.n_starts;
    s.max_evals = cfg.max_evals;
    s.seed = cfg.seed;
    s.bound_overrides = cfg.bound_overrides;
    return s;
}

FitResult fit_family(const ResponseFamily& family, const SearchSettings& s, std::span<const Trace> traces,
                     std::string_view key)
{
    const Bounds bounds = apply_bound_overrides(family.default_bounds(), s.bound_overrides);
    return fit_model(family, traces, bounds, fit_options(s, key));
}

FitResult fit_expression(const Expression& e, BlockKind kind, const SearchSettings& s, std::span<const Trace> traces)
{
    const ExpressionFamily family(e, kind, s.embedding);
    return fit_family(family, s, traces, family.name());
}

std::vector<FitResult> fit_candidates(const std::vector<Expression>& candidates, const SearchSettings& s,
                                      std::span<const Trace> traces)
{
    std::vector<FitResult> out(candidates.size());
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out[u] = fit_expression(candidates[u], s.grammar.kind, s, traces);
    }
    return out;
}

std::vector<FitResult> fit_candidates_serial(const std::vector<Expression>& candidates, const SearchSettings& s,
                                             std::span<const Trace> traces)
{
    std::vector<FitResult> out;
    out.reserve(candidates.size());
    for (const auto& e : candidates)
        out.push_back(fit_expression(e, s.grammar.kind, s, traces));
    return out;
}

std::vector<ModelReportRow> search_traces(const SearchSettings& s, std::span<const Trace> traces)
{
    const auto candidates = enumerate(s.grammar);
    const auto fits = fit_candidates(candidates, s, traces);
    std::vector<ModelReportRow> rows;
    bool any = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        any = any || fits[i].feasible;
        rows.push_back(make_row(candidates[i], s.grammar.kind, fits[i], s.score));
    }
    if (!any)
        throw InfeasibleError("every candidate expression was infeasible");
    return rank_models(std::move(rows));
}

std::vector<Panel> make_panels(const RunConfig& cfg)
{
    std::vector<Panel> panels;
    for (const auto& path : cfg.traces) {
        auto traces = ingest_trace(path, cfg.hold_offset);
        const std::string stem = fs::path(path).stem().string();
        if (cfg.embedding == Embedding::DoseOde) {
            panels.push_back({stem, std::move(traces)});
            continue;
        }
        const bool single = traces.size() == 1;
        for (auto& t : traces) {
            std::string name = single ? stem : stem + "_" + t.label;
            panels.push_back({std::move(name), {std::move(t)}});
        }
    }
    return panels;
}

void run_search(const RunConfig& cfg)
{
    cfg.validate();
    const auto panels = make_panels(cfg);
    const auto inputs = input_hashes(cfg);
    const SearchSettings settings = SearchSettings::from(cfg);
    OutputSet out(cfg.out_dir);

    const Expression g_r = Expression::block(Expression::terminal());
    const Expression h_r = g_r;
    std::string summary = "panel,winner,p,wmse_hold,score,AIC,hill_wmse_hold,gr_wmse_hold\n";
    std::vector<std::string> used;

    for (const auto& panel : panels) {
        std::string dir = panel_dir_name(panel.name);
        while (std::find(used.begin(), used.end(), dir) != used.end())
            dir += "_";
        used.push_back(dir);

        const auto rows = search_traces(settings, panel.traces);
        const ModelReportRow& best = rows.front();
        const ExpressionFamily best_family(Expression::parse(best.expression), settings.grammar.kind,
                                           settings.embedding);

        auto find_row = [&](BlockKind kind, const Expression& e) -> const FitResult* {
            if (kind != settings.grammar.kind)
                return nullptr;
            const std::string key = e.to_string(kind);
            for (const auto& r : rows)
                if (r.expression == key)
                    return &r.fit;
            return nullptr;
        };
        const ExpressionFamily hill_family(h_r, BlockKind::Hill, settings.embedding);
        const ExpressionFamily gr_family(g_r, BlockKind::Eml, settings.embedding);
        const FitResult* hp = find_row(BlockKind::Hill, h_r);
        const FitResult hill = hp ? *hp : fit_family(hill_family, settings, panel.traces, hill_family.name());
        const FitResult* gp = find_row(BlockKind::Eml, g_r);
        const FitResult gr = gp ? *gp : fit_family(gr_family, settings, panel.traces, gr_family.name());

        std::vector<std::pair<std::string, FitResult>> comparators = {{hill_family.name(), hill},
                                                                      {gr_family.name(), gr}};
        std::vector<std::unique_ptr<LinkerFamily>> linkers;
        if (settings.embedding == Embedding::DoseOde) {
            for (const int n : {4, 2}) {
                linkers.push_back(std::make_unique<LinkerFamily>(n));
                comparators.emplace_back(linkers.back()->name(),
                                         fit_family(*linkers.back(), settings, panel.traces, linkers.back()->name()));
            }
        }

        out.write(dir + "/ranked.csv", ranked_csv(rows));
        out.write(dir + "/best_params.txt",
                  params_text(best.expression + " [" + to_string(settings.embedding) + "]", best.fit));

        std::string cmp = "model,p,chi2_train,wmse_train,wmse_hold,AIC,BIC,bound_flags\n";
        for (const auto& [name, fit] : comparators) {
            const auto ic = aic_bic(fit.chi2_train, fit.n_train, fit.n_params);
            cmp += fmt::format("{},{},{},{},{},{},{},\"{}\"\n", name, fit.n_params, fmt_num(fit.chi2_train),
                               fmt_num(fit.wmse_train), fmt_num(fit.wmse_hold), fmt_num(ic.aic), fmt_num(ic.bic),
                               fit.bound_flags());
        }
        out.write(dir + "/comparators.csv", cmp);

        std::string params;
        for (const auto& [name, fit] : comparators)
            params += params_text(name, fit) + "\n";
        out.write(dir + "/comparator_params.txt", params);

        std::string plot = "label,t,y,sem,split,hill,G(R),best";
        for (const auto& l : linkers)
            plot += "," + l->name();
        plot += "\n";
        for (const auto& trace : panel.traces) {
            const auto yh = predict_or_nan(hill_family, hill, trace);
            const auto yg = predict_or_nan(gr_family, gr, trace);
            const auto yb = predict_or_nan(best_family, best.fit, trace);
            std::vector<std::vector<double>> yl;
            for (std::size_t j = 0; j < linkers.size(); ++j)
                yl.push_back(predict_or_nan(*linkers[j], comparators[2 + j].second, trace));
            for (std::size_t i = 0; i < trace.size(); ++i) {
                const bool hold = static_cast<int>(i % 4) == trace.split.offset;
                plot += fmt::format("{},{},{},{},{},{},{},{}", trace.label, fmt_num(trace.t[i]), fmt_num(trace.y[i]),
                                    fmt_num(trace.sem[i]), hold ? "hold" : "train", fmt_num(yh[i]), fmt_num(yg[i]),
                                    fmt_num(yb[i]));
                for (const auto& col : yl)
                    plot += "," + fmt_num(col[i]);
                plot += "\n";
            }
        }
        out.write(dir + "/plot.csv", plot);

        summary += fmt::format("{},{},{},{},{},{},{},{}\n", dir, best.expression, best.p, fmt_num(best.wmse_hold),
                               fmt_num(best.score), fmt_num(best.aic), fmt_num(hill.wmse_hold),
                               fmt_num(gr.wmse_hold));
    }
    out.write("summary.csv", summary);
    out.manifest(cfg, inputs);
}

Trace network_trace(const RunConfig& cfg)
{
    const auto t = benchmark_times(cfg.t_end, cfg.n_points);
    const auto traj = simulate_network(cfg.network, t);
    auto y = add_noise(traj.y_true, cfg.network.sigma_noise, cfg.network.seed);
    std::vector<double> sem(t.size(), cfg.network.sigma_noise);
    return Trace::make("network", t, std::move(y), std::move(sem), cfg.hold_offset);
}

CascadeBench cascade_benchmark(const Trace& trace, const RunConfig& cfg)
{
    CascadeBench b;
    b.trace = trace;
    ReservoirGrid grid;
    grid.k_fit = linspace(cfg.k_fit.lo, cfg.k_fit.hi, cfg.k_fit.count);
    grid.tau0 = linspace(cfg.tau0.lo, cfg.tau0.hi, cfg.tau0.count);
    b.depths = reservoir_grid_search(trace, cfg.k_max, grid);

    SearchSettings s = SearchSettings::from(cfg);
    s.embedding = Embedding::Static;
    const ExpressionFamily hill(Expression::block(Expression::terminal()), BlockKind::Hill, Embedding::Static);
    const std::vector<Trace> one{trace};
    b.hill = fit_family(hill, s, one, hill.name());

    auto row_of = [](int depth, double kf, double t0, const FitResult& f) {
        CascadeRow r;
        r.depth = depth;
        r.p = f.n_params;
        r.k_fit = kf;
        r.tau0 = t0;
        r.chi2_train = f.chi2_train;
        r.wmse_train = f.wmse_train;
        r.wmse_hold = f.wmse_hold;
        const auto ic = aic_bic(f.chi2_train, f.n_train, f.n_params);
        r.aic = ic.aic;
        r.bic = ic.bic;
        return r;
    };
    b.rows.push_back(row_of(0, kNaN, kNaN, b.hill));
    for (const auto& d : b.depths)
        b.rows.push_back(row_of(d.depth, d.k_fit, d.tau0, d.fit));

    std::size_t imin = 0;
    for (std::size_t i = 1; i < b.rows.size(); ++i)
        if (b.rows[i].aic < b.rows[imin].aic)
            imin = i;
    for (auto& r : b.rows) {
        r.daic = r.aic - b.rows[imin].aic;
        r.dbic = r.bic - b.rows[imin].bic;
    }
    std::size_t kbest = 1;
    for (std::size_t i = 2; i < b.rows.size(); ++i)
        if (b.rows[i].aic < b.rows[kbest].aic)
            kbest = i;
    b.aic_best = b.rows.size() > 1 ? b.rows[kbest].depth : 0;
    return b;
}

void run_cascade_bench(const RunConfig& cfg)
{
    cfg.validate();
    const auto inputs = input_hashes(cfg);
    OutputSet out(cfg.out_dir);

    Trace trace;
    if (!cfg.traces.empty()) {
        auto traces = ingest_trace(cfg.traces.front(), cfg.hold_offset);
        trace = std::move(traces.front());
    } else {
        const auto t = benchmark_times(cfg.t_end, cfg.n_points);
        const auto traj = simulate_network(cfg.network, t);
        trace = network_trace(cfg);
        std::string bench = "t,R,A_terminal,I_terminal,y_true,y_obs\n";
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            bench += fmt::format("{},{},{},{},{},{}\n", fmt_num(t[i]), fmt_num(traj.input[i]),
                                 fmt_num(traj.act(r, traj.act.cols() - 1)), fmt_num(traj.inh(r, traj.inh.cols() - 1)),
                                 fmt_num(traj.y_true[i]), fmt_num(trace.y[i]));
        }
        out.write("benchmark.csv", bench);
    }

    const CascadeBench b = cascade_benchmark(trace, cfg);

    std::string report = "K,p,best_k_fit,best_tau0,chi2_train,wmse_train,wmse_hold,AIC,BIC,dAIC,dBIC\n";
    for (const auto& r : b.rows)
        report += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.depth, r.p, r.depth ? fmt_num(r.k_fit) : "",
                              r.depth ? fmt_num(r.tau0) : "", fmt_num(r.chi2_train), fmt_num(r.wmse_train),
                              fmt_num(r.wmse_hold), fmt_num(r.aic), fmt_num(r.bic), fmt_num(r.daic),
                              fmt_num(r.dbic));
    out.write("cascade_report.csv", report);

    std::string readouts = "K,k_fit,tau0,rank_deficient";
    for (int j = 0; j <= cfg.k_max; ++j)
        readouts += fmt::format(",beta{}", j);
    readouts += "\n";
    for (const auto& d : b.depths) {
        readouts += fmt::format("{},{},{},{}", d.depth, fmt_num(d.k_fit), fmt_num(d.tau0),
                                d.readout.rank_deficient ? "true" : "false");
        for (int j = 0; j <= cfg.k_max; ++j)
            readouts += "," + (static_cast<std::size_t>(j) < d.readout.beta.size() ? fmt_num(d.readout.beta[j]) : "");
        readouts += "\n";
    }
    out.write("readouts.csv", readouts);

    // hidden states and fitted curves at the AIC-preferred depth
    const DepthResult& sel = b.depths[static_cast<std::size_t>(b.aic_best - 1)];
    const StateMatrix states = cascade_simulate(CascadeSpec{sel.depth, sel.k_fit, sel.tau0}, trace.t);
    std::string st = "t";
    for (int k = 1; k <= sel.depth; ++k)
        st += fmt::format(",z{}", k);
    st += "\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        st += fmt_num(trace.t[i]);
        for (Eigen::Index k = 0; k < states.cols(); ++k)
            st += "," + fmt_num(states(static_cast<Eigen::Index>(i), k));
        st += "\n";
    }
    out.write("states.csv", st);

    const ExpressionFamily hill(Expression::block(Expression::terminal()), BlockKind::Hill, Embedding::Static);
    const auto yh = predict_or_nan(hill, b.hill, trace);
    std::vector<std::vector<double>> curves;
    for (const auto& d : b.depths) {
        const StateMatrix sd = cascade_simulate(CascadeSpec{d.depth, d.k_fit, d.tau0}, trace.t);
        curves.push_back(readout_predict(sd, d.readout));
    }
    std::string fits = "t,y,sem,split,hill";
    for (const auto& d : b.depths)
        fits += fmt::format(",K{}", d.depth);
    fits += "\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const bool hold = static_cast<int>(i % 4) == trace.split.offset;
        fits += fmt::format("{},{},{},{},{}", fmt_num(trace.t[i]), fmt_num(trace.y[i]), fmt_num(trace.sem[i]),
                            hold ? "hold" : "train", fmt_num(yh[i]));
        for (const auto& c : curves)
            fits += "," + fmt_num(c[i]);
        fits += "\n";
    }
    out.write("fits.csv", fits);
    out.manifest(cfg, inputs);
}

void run_toybench(const RunConfig& cfg)
{
    cfg.validate();
    OutputSet out(cfg.out_dir);
    const auto t = benchmark_times(cfg.t_end, cfg.n_points);
    const auto traj = simulate_network(cfg.network, t);
    const auto y = add_noise(traj.y_true, cfg.network.sigma_noise, cfg.network.seed);

    std::string bench = "t,R,A_terminal,I_terminal,y_true,y_obs\n";
    std::string trace = "t,y,sem\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        bench += fmt::format("{},{},{},{},{},{}\n", fmt_num(t[i]), fmt_num(traj.input[i]),
                             fmt_num(traj.act(r, traj.act.cols() - 1)), fmt_num(traj.inh(r, traj.inh.cols() - 1)),
                             fmt_num(traj.y_true[i]), fmt_num(y[i]));
        trace += fmt::format("{},{},{}\n", fmt_num(t[i]), fmt_num(y[i]), fmt_num(cfg.network.sigma_noise));
    }
    out.write("benchmark.csv", bench);
    out.write("trace.csv", trace);
    out.manifest(cfg, {});
}

} // namespace emlrom

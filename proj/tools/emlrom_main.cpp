// emlrom: grammar search, cascade benchmark and toy-network generation.
#include "emlrom/io.hpp"
#include "emlrom/pipeline.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <optional>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> grammar;
    std::optional<int> max_depth;
    std::optional<int> max_nodes;
    std::optional<std::string> embedding;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> traces;
    std::optional<int> threads;
};

void add_common(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config, "INI config file");
    sub->add_option("--grammar", o.grammar, "Block kind")->check(CLI::IsMember({"eml", "hill"}));
    sub->add_option("--max-depth", o.max_depth, "Maximum expression depth");
    sub->add_option("--max-nodes", o.max_nodes, "Maximum node count");
    sub->add_option("--embedding", o.embedding, "Response embedding")
        ->check(CLI::IsMember({"static", "relax", "dose-ode"}));
    sub->add_option("--seed", o.seed, "Global seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--trace", o.traces, "Trace CSV (repeatable; replaces data.traces)");
    sub->add_option("--threads", o.threads, "OpenMP threads (0: default)");
}

emlrom::RunConfig resolve(emlrom::Command cmd, const Overrides& o)
{
    using namespace emlrom;
    RunConfig cfg;
    cfg.command = cmd;
    if (!o.config.empty())
        cfg = load_config(o.config, cfg);
    cfg.command = cmd;
    if (o.grammar)
        cfg.grammar.kind = *o.grammar == "hill" ? BlockKind::Hill : BlockKind::Eml;
    if (o.max_depth)
        cfg.grammar.max_depth = *o.max_depth;
    if (o.max_nodes)
        cfg.grammar.max_nodes = *o.max_nodes;
    if (o.embedding)
        cfg.embedding = *o.embedding == "static" ? Embedding::Static
                        : *o.embedding == "relax" ? Embedding::Relaxation
                                                  : Embedding::DoseOde;
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.out)
        cfg.out_dir = *o.out;
    if (!o.traces.empty())
        cfg.traces = o.traces;
    if (o.threads)
        cfg.threads = *o.threads;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"EML reduced-order model discovery"};
    app.require_subcommand(1);
    Overrides o;
    auto* search = app.add_subcommand("search", "Enumerate, fit and rank grammar expressions");
    auto* cascade = app.add_subcommand("cascade-bench", "Reservoir cascade depth sweep on the toy network");
    auto* toy = app.add_subcommand("toybench", "Simulate the 50-state benchmark network");
    for (auto* s : {search, cascade, toy})
        add_common(s, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const emlrom::Command cmd = search->parsed()    ? emlrom::Command::Search
                                : cascade->parsed() ? emlrom::Command::CascadeBench
                                                    : emlrom::Command::Toybench;
    try {
        const auto cfg = resolve(cmd, o);
        if (cfg.threads > 0)
            omp_set_num_threads(cfg.threads);
        switch (cmd) {
        case emlrom::Command::Search: emlrom::run_search(cfg); break;
        case emlrom::Command::CascadeBench: emlrom::run_cascade_bench(cfg); break;
        case emlrom::Command::Toybench: emlrom::run_toybench(cfg); break;
        }
        std::fprintf(stderr, "wrote %s\n", cfg.out_dir.c_str());
        return 0;
    } catch (const emlrom::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const emlrom::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const emlrom::InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

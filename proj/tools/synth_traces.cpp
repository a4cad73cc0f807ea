// Writes the synthetic stand-in traces shipped under data/.
#include "emlrom/io.hpp"
#include "emlrom/response.hpp"
#include "emlrom/toybench.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>

namespace {

std::string to_csv(const std::vector<emlrom::Trace>& traces, bool with_label)
{
    std::string s = with_label ? "t,y,sem,label\n" : "t,y,sem\n";
    for (const auto& tr : traces)
        for (std::size_t i = 0; i < tr.size(); ++i) {
            s += fmt::format("{},{},{}", emlrom::fmt_num(tr.t[i]), emlrom::fmt_num(tr.y[i]),
                             emlrom::fmt_num(tr.sem[i]));
            s += with_label ? "," + tr.label + "\n" : "\n";
        }
    return s;
}

} // namespace

int main(int argc, char** argv)
{
    using namespace emlrom;
    CLI::App app{"Synthetic stand-in traces"};
    std::string out = "data";
    std::uint64_t seed = 1;
    double noise = 0.02;
    app.add_option("--out", out, "Output directory");
    app.add_option("--seed", seed, "Noise seed");
    app.add_option("--noise", noise, "Noise level relative to peak |y|");
    CLI11_PARSE(app, argc, argv);

    const auto grid = [](double t_end, std::size_t n) { return benchmark_times(t_end, n); };

    // rise-then-fall composite response
    const ExpressionFamily comp(Expression::parse("G(G(R)+R)"), BlockKind::Eml, Embedding::Static);
    const std::vector<double> comp_theta = {3.82, 165.0, 0.205, 0.110, 0.0378, 0.0207, 71.2, 4.5e-6, 0.042};
    const auto t60 = grid(60.0, 121);
    write_file(std::filesystem::path(out) / "composite.csv",
               to_csv({synthetic_trace(comp, comp_theta, t60, noise, seed)}, false));

    // single-gate overshoot
    const ExpressionFamily gate(Expression::parse("G(R)"), BlockKind::Eml, Embedding::Static);
    const std::vector<double> gate_theta = {1.0, 2.0, 0.3, 0.5, 0.8, 1e-6};
    write_file(std::filesystem::path(out) / "overshoot.csv",
               to_csv({synthetic_trace(gate, gate_theta, t60, noise, seed + 1)}, false));

    // two doses through the relaxation ODE
    const ExpressionFamily ode(Expression::parse("G(R)"), BlockKind::Eml, Embedding::DoseOde);
    const std::vector<double> ode_theta = {1.5, 0.25, 4.0, 0.5, 0.08, 1e-6};
    const auto t30 = grid(30.0, 121);
    write_file(std::filesystem::path(out) / "doses.csv",
               to_csv({synthetic_trace(ode, ode_theta, t30, noise, seed + 2, "2", 2.0),
                       synthetic_trace(ode, ode_theta, t30, noise, seed + 3, "20", 20.0)},
                      true));
    return 0;
}

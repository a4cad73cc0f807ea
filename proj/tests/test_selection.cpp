#include "emlrom/selection.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace emlrom;

namespace {

FitResult fake_fit(double chi2, double hold, std::size_t p, bool feasible = true)
{
    FitResult f;
    f.feasible = feasible;
    f.chi2_train = chi2;
    f.n_train = 91;
    f.n_hold = 30;
    f.n_params = p;
    f.wmse_train = chi2 / 91.0;
    f.wmse_hold = hold;
    return f;
}

} // namespace

TEST_CASE("information criteria reproduce the published tables")
{
    for (const auto& r : oracle::published_ic_rows()) {
        const auto ic = aic_bic(r.chi2, r.n, r.p);
        INFO("chi2 " << r.chi2 << " N " << r.n << " p " << r.p);
        CHECK(std::abs(std::round(ic.aic) - r.aic) <= 1.0);
        CHECK(std::abs(std::round(ic.bic) - r.bic) <= 1.0);
    }
}

TEST_CASE("information criteria edge cases")
{
    const auto zero = aic_bic(0.0, 50, 3);
    CHECK(zero.degenerate);
    CHECK(std::isinf(zero.aic));
    CHECK(zero.aic < 0.0);
    CHECK_THROWS(aic_bic(1.0, 0, 3));
    CHECK_THROWS(aic_bic(-1.0, 10, 3));
    const auto a = aic_bic(100.0, 91, 5);
    const auto b = aic_bic(100.0, 91, 6);
    CHECK(b.aic - a.aic == doctest::Approx(2.0));
    CHECK(b.bic - a.bic == doctest::Approx(std::log(91.0)));
}

TEST_CASE("parameter counts")
{
    CHECK(count_params(Expression::parse("G(R)"), BlockKind::Eml, Embedding::Static) == 6);
    CHECK(count_params(Expression::parse("G(G(R)+R)"), BlockKind::Eml, Embedding::Static) == 9);
    CHECK(count_params(Expression::parse("H(R)"), BlockKind::Hill, Embedding::Static) == 5);
    CHECK(count_params(Expression::parse("H(R)+H(R)"), BlockKind::Hill, Embedding::Static) == 8);
    for (int k = 1; k <= 10; ++k)
        CHECK(cascade_param_count(k) == static_cast<std::size_t>(k) + 3);
}

TEST_CASE("score adds structural penalties")
{
    const auto e = Expression::parse("G(G(R)+R)");
    const FitResult f = fake_fit(10.0, 0.5, 9);
    CHECK(validation_score(f, e, {}) == 0.5);
    CHECK(validation_score(f, e, {0.1, 0.01}) == doctest::Approx(0.5 + 0.2 + 0.05));
    CHECK(std::isinf(validation_score(fake_fit(10.0, 0.5, 9, false), e, {})));
}

TEST_CASE("ranking order, ties and deltas")
{
    std::vector<ModelReportRow> rows;
    rows.push_back(make_row(Expression::parse("G(R)"), BlockKind::Eml, fake_fit(26.7, 0.236, 6), {}));
    rows.push_back(make_row(Expression::parse("G(G(R)+R)"), BlockKind::Eml, fake_fit(6.9, 0.128, 9), {}));
    rows.push_back(make_row(Expression::parse("G(R)+R"), BlockKind::Eml, fake_fit(26.0, 0.236, 6), {}));
    rows.push_back(make_row(Expression::parse("G(R+R)"), BlockKind::Eml, fake_fit(1.0, 1.0, 6, false), {}));
    rows.push_back(make_row(Expression::parse("R"), BlockKind::Eml, fake_fit(20.0, 0.236, 3), {}));

    const auto ranked = rank_models(rows);
    CHECK(ranked[0].expression == "G(G(R)+R)");
    CHECK(ranked[1].expression == "R");       // same score, fewer parameters
    CHECK(ranked[2].expression == "G(R)");    // same score and p, fewer nodes
    CHECK(ranked[3].expression == "G(R)+R");
    CHECK(ranked[4].expression == "G(R+R)");  // infeasible last
    CHECK(ranked[0].daic == 0.0);
    CHECK(ranked[0].dbic == 0.0);
    CHECK(std::round(ranked[0].aic) == -217);
    for (const auto& r : ranked)
        if (std::isfinite(r.aic))
            CHECK(r.daic >= 0.0);

    std::mt19937_64 rng(1);
    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = rank_models(shuffled);
    for (std::size_t i = 0; i < again.size(); ++i)
        CHECK(again[i].expression == ranked[i].expression);
    CHECK_THROWS(rank_models({}));
}

TEST_CASE("deltas use the minimum-AIC row for both criteria")
{
    std::vector<ModelReportRow> rows(2);
    rows[0].aic = -224;
    rows[0].bic = -204;
    rows[1].aic = -219;
    rows[1].bic = -197;
    fill_deltas(rows);
    CHECK(rows[1].daic == 5.0);
    CHECK(rows[1].dbic == 7.0);
}

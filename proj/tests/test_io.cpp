#include "emlrom/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

using namespace emlrom;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "emlrom_test_io";
    fs::create_directories(dir);
    return dir / name;
}

std::string error_of(const std::string& csv)
{
    try {
        parse_trace_csv(csv, "x.csv");
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("csv with labels is grouped and sorted")
{
    const std::string csv = "t,y,sem,label\n"
                            "1,1.1,0.1,20\n0,1.0,0.1,20\n2,1.2,0.1,20\n3,1.3,0.1,20\n"
                            "0,2.0,0.2,2\n1,2.1,0.2,2\n2,2.2,0.2,2\n3,2.3,0.2,2\n4,2.4,0.2,2\n";
    const auto traces = parse_trace_csv(csv, "x.csv");
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].label == "20");
    CHECK(traces[0].dose == 20.0);
    CHECK(traces[0].t == std::vector<double>{0, 1, 2, 3});
    CHECK(traces[0].y == std::vector<double>{1.0, 1.1, 1.2, 1.3});
    CHECK(traces[1].label == "2");
    CHECK(traces[1].size() == 5);
}

TEST_CASE("csv without labels, with missing sems")
{
    const std::string csv = "\xEF\xBB\xBFy,t,sem\n1,0,\n2,1,NA\n3,2,0.5\n4,3,nan\n";
    const auto traces = parse_trace_csv(csv, "x.csv");
    REQUIRE(traces.size() == 1);
    CHECK(traces[0].label.empty());
    CHECK(traces[0].dose == 1.0);
    CHECK(std::isnan(traces[0].sem[0]));
    CHECK(traces[0].sigma[0] == doctest::Approx(0.125));
    CHECK(traces[0].sigma[2] == 0.5);

    const auto none = parse_trace_csv("t,y,sem\n0,1,\n1,2,\n2,3,\n3,4,\n", "x.csv");
    CHECK(none[0].sem_fallback);
}

TEST_CASE("csv errors name the line")
{
    CHECK(error_of("t,y,sem\n0,1,0.1\n1,abc,0.1\n2,1,0.1\n3,1,0.1\n").find("x.csv:3") != std::string::npos);
    CHECK(error_of("t,y,sem\n0,1,0.1\n1,1\n").find("x.csv:3") != std::string::npos);
    CHECK(error_of("t,y,sem\n0,1,0.1\n1,1,0.1\n1,2,0.1\n3,1,0.1\n").find("repeated") != std::string::npos);
    CHECK(error_of("t,y,err\n0,1,0.1\n").find("unknown column") != std::string::npos);
    CHECK_FALSE(error_of("t,y\n0,1\n").empty());
    CHECK_FALSE(error_of("t,y,sem\n0,1,0.1\n1,1,0.1\n").empty());
    CHECK_FALSE(error_of("t,y,sem\n0,1,-0.1\n1,1,0.1\n2,1,0.1\n3,1,0.1\n").empty());
    CHECK_FALSE(error_of("t,y,sem\n-1,1,0.1\n1,1,0.1\n2,1,0.1\n3,1,0.1\n").empty());
    CHECK_FALSE(error_of("").empty());
    CHECK_THROWS_AS(ingest_trace(scratch("does_not_exist.csv")), DataError);
}

TEST_CASE("config loading and round trip")
{
    const fs::path p = scratch("a.ini");
    write_file(p, "[run]\nseed = 7\n[grammar]\nkind = hill\nmax_depth = 3\n[bounds]\ntau = 0.05 50\n");
    const RunConfig c = load_config(p);
    CHECK(c.seed == 7);
    CHECK(c.grammar.kind == BlockKind::Hill);
    CHECK(c.grammar.max_depth == 3);
    REQUIRE(c.bound_overrides.contains("tau"));
    CHECK(c.bound_overrides.at("tau").first == 0.05);

    const std::string dumped = dump_config(c);
    const fs::path q = scratch("b.ini");
    write_file(q, dumped);
    CHECK(dump_config(load_config(q)) == dumped);

    write_file(p, "[run]\nseeds = 7\n");
    CHECK_THROWS_AS(load_config(p), ConfigError);
    write_file(p, "[wat]\nx = 1\n");
    CHECK_THROWS_AS(load_config(p), ConfigError);
    write_file(p, "[grammar]\nmax_depth = two\n");
    CHECK_THROWS_AS(load_config(p), ConfigError);
    CHECK_THROWS_AS(load_config(scratch("missing.ini")), ConfigError);
}

TEST_CASE("config validation")
{
    RunConfig c;
    c.command = Command::Search;
    CHECK_THROWS_AS(c.validate(), ConfigError); // no traces
    c.traces = {"x.csv"};
    CHECK_NOTHROW(c.validate());
    c.n_starts = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    RunConfig d;
    d.command = Command::Toybench;
    d.network.tau_a = -1.0;
    CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("bound overrides match by parameter stem")
{
    const Bounds b = {{"a1", 0.01, 3.0, Scale::Log}, {"a2", 0.01, 3.0, Scale::Log}, {"b1", 0.0, 1.0, Scale::Linear}};
    const auto o = apply_bound_overrides(b, {{"a", {0.0, 2.0}}});
    CHECK(o[0].lo == 0.0);
    CHECK(o[0].scale == Scale::Linear);
    CHECK(o[1].hi == 2.0);
    CHECK(o[2].hi == 1.0);
}

TEST_CASE("git blob hash and number format")
{
    CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(fmt_num(0.1) == "0.1");
    CHECK(fmt_num(std::nan("")) == "nan");
    CHECK(fmt_num(-INFINITY) == "-inf");
    CHECK(fmt_num(1.0 / 3.0) == "0.3333333333");
}

#pragma once

#include "emlrom/expr.hpp"
#include "emlrom/fitting.hpp"
#include "emlrom/response.hpp"
#include "emlrom/selection.hpp"
#include "emlrom/toybench.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace emlrom {

/// Invalid configuration or command line (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data (exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every candidate of a search was infeasible (exit code 4).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Command { Search, CascadeBench, Toybench };

const char* to_string(Command c) noexcept;

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 1;
};

struct RunConfig {
    Command command = Command::Search;
    std::vector<std::string> traces;
    std::string out_dir = "out";
    std::uint64_t seed = 1;

    GrammarConfig grammar{BlockKind::Eml, 2, 5};
    Embedding embedding = Embedding::Static;
    int hold_offset = 3;
    ScoreConfig score;
    int n_starts = 32;
    int max_evals = 0;
    int threads = 0; ///< 0: OpenMP default
    std::map<std::string, std::pair<double, double>> bound_overrides;

    int k_max = 10;
    double t_end = 75.0;
    std::size_t n_points = 241;
    GridAxis k_fit{0.15, 0.80, 18};
    GridAxis tau0{0.5, 5.5, 20};
    NetworkParams network;

    /// Checks ranges and cross-field consistency; throws ConfigError.
    void validate() const;
};

/// Reads an INI-style config (sections [run] [data] [grammar] [model]
/// [score] [fit] [bounds] [cascade] [network]; [manifest] is ignored).
/// Unknown sections or keys are rejected.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Serializes every resolved setting in the format load_config reads.
std::string dump_config(const RunConfig& cfg);

/// Applies [bounds] overrides: a key matches parameters whose name without
/// trailing digits equals it ("a" matches a1, a2).
Bounds apply_bound_overrides(Bounds bounds, const std::map<std::string, std::pair<double, double>>& overrides);

/// Parses a `t,y,sem[,label]` CSV into one trace per label (first-appearance
/// order), rows sorted by t within a label. Empty sem fields are missing.
/// Throws DataError with the line number for malformed rows.
std::vector<Trace> ingest_trace(const std::filesystem::path& path, int hold_offset = 3);

/// Same, from CSV text (`source` names the input in messages).
std::vector<Trace> parse_trace_csv(const std::string& text, const std::string& source, int hold_offset = 3);

/// Git blob hash (SHA-1 of "blob <len>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Writes `content`; throws std::runtime_error naming the path on failure.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Fixed-format number used in every report ("%.10g", inf/nan spelled out).
std::string fmt_num(double v);

} // namespace emlrom

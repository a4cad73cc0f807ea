#include "emlrom/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace emlrom {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> words(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w)
        out.push_back(w);
    return out;
}

bool parse_double(const std::string& s, double& out)
{
    if (s.empty())
        return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

double to_double(const std::string& key, const std::string& s)
{
    double v = 0.0;
    if (!parse_double(trim(s), v))
        throw ConfigError("config key " + key + ": expected a number, got \"" + s + "\"");
    return v;
}

long long to_int(const std::string& key, const std::string& s)
{
    const std::string t = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError("config key " + key + ": expected an integer, got \"" + s + "\"");
    return v;
}

BlockKind parse_kind(const std::string& s)
{
    if (s == "eml")
        return BlockKind::Eml;
    if (s == "hill")
        return BlockKind::Hill;
    throw ConfigError("grammar kind must be eml or hill, got \"" + s + "\"");
}

Embedding parse_embedding(const std::string& s)
{
    if (s == "static")
        return Embedding::Static;
    if (s == "relax")
        return Embedding::Relaxation;
    if (s == "dose-ode")
        return Embedding::DoseOde;
    throw ConfigError("embedding must be static, relax or dose-ode, got \"" + s + "\"");
}

Command parse_command(const std::string& s)
{
    if (s == "search")
        return Command::Search;
    if (s == "cascade-bench")
        return Command::CascadeBench;
    if (s == "toybench")
        return Command::Toybench;
    throw ConfigError("unknown command \"" + s + "\"");
}

GridAxis parse_axis(const std::string& key, const std::string& s)
{
    const auto w = words(s);
    if (w.size() != 3)
        throw ConfigError("config key " + key + ": expected \"lo hi count\"");
    GridAxis a;
    a.lo = to_double(key, w[0]);
    a.hi = to_double(key, w[1]);
    const long long n = to_int(key, w[2]);
    if (n < 1)
        throw ConfigError("config key " + key + ": count must be >= 1");
    a.count = static_cast<std::size_t>(n);
    return a;
}

using Setter = void (*)(RunConfig&, const std::string& key, const std::string& value);

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"run.command", [](RunConfig& c, const std::string&, const std::string& v) { c.command = parse_command(v); }},
        {"run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        {"run.seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const long long s = to_int(k, v);
             if (s < 0)
                 throw ConfigError("seed must be non-negative");
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"run.threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = static_cast<int>(to_int(k, v)); }},
        {"data.traces",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.traces.clear();
             for (auto& p : split(v, ','))
                 if (!p.empty())
                     c.traces.push_back(p);
         }},
        {"data.hold_offset",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.hold_offset = static_cast<int>(to_int(k, v)); }},
        {"grammar.kind", [](RunConfig& c, const std::string&, const std::string& v) { c.grammar.kind = parse_kind(v); }},
        {"grammar.max_depth",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.grammar.max_depth = static_cast<int>(to_int(k, v)); }},
        {"grammar.max_nodes",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.grammar.max_nodes = static_cast<int>(to_int(k, v)); }},
        {"model.embedding", [](RunConfig& c, const std::string&, const std::string& v) { c.embedding = parse_embedding(v); }},
        {"score.lambda_depth",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.score.lambda_depth = to_double(k, v); }},
        {"score.lambda_nodes",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.score.lambda_nodes = to_double(k, v); }},
        {"fit.n_starts", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_starts = static_cast<int>(to_int(k, v)); }},
        {"fit.max_evals",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.max_evals = static_cast<int>(to_int(k, v)); }},
        {"cascade.k_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.k_max = static_cast<int>(to_int(k, v)); }},
        {"cascade.t_end", [](RunConfig& c, const std::string& k, const std::string& v) { c.t_end = to_double(k, v); }},
        {"cascade.n_points",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const long long n = to_int(k, v);
             if (n < 4)
                 throw ConfigError("cascade.n_points must be >= 4");
             c.n_points = static_cast<std::size_t>(n);
         }},
        {"cascade.k_fit", [](RunConfig& c, const std::string& k, const std::string& v) { c.k_fit = parse_axis(k, v); }},
        {"cascade.tau0", [](RunConfig& c, const std::string& k, const std::string& v) { c.tau0 = parse_axis(k, v); }},
        {"network.n_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.n_a = static_cast<int>(to_int(k, v)); }},
        {"network.n_i", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.n_i = static_cast<int>(to_int(k, v)); }},
        {"network.k_r", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.k_r = to_double(k, v); }},
        {"network.kon_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.kon_a = to_double(k, v); }},
        {"network.koff_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.koff_a = to_double(k, v); }},
        {"network.tau_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.tau_a = to_double(k, v); }},
        {"network.kon_i", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.kon_i = to_double(k, v); }},
        {"network.koff_i", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.koff_i = to_double(k, v); }},
        {"network.tau_i", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.tau_i = to_double(k, v); }},
        {"network.amp_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.amp_a = to_double(k, v); }},
        {"network.amp_i", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.amp_i = to_double(k, v); }},
        {"network.k_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.k_a = to_double(k, v); }},
        {"network.k_i", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.k_i = to_double(k, v); }},
        {"network.y0", [](RunConfig& c, const std::string& k, const std::string& v) { c.network.y0 = to_double(k, v); }},
        {"network.sigma_noise",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.network.sigma_noise = to_double(k, v); }},
        {"network.seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const long long s = to_int(k, v);
             if (s < 0)
                 throw ConfigError("network.seed must be non-negative");
             c.network.seed = static_cast<std::uint64_t>(s);
         }},
    };
    return table;
}

const std::set<std::string>& bound_keys()
{
    static const std::set<std::string> keys = {"y0", "B", "k", "tau", "a", "b", "c", "A", "Kd", "h", "S0", "q"};
    return keys;
}

std::string base_name(const std::string& name)
{
    std::size_t end = name.size();
    while (end > 0 && std::isdigit(static_cast<unsigned char>(name[end - 1])))
        --end;
    return name.substr(0, end);
}

} // namespace

const char* to_string(Command c) noexcept
{
    switch (c) {
    case Command::Search: return "search";
    case Command::CascadeBench: return "cascade-bench";
    case Command::Toybench: return "toybench";
    }
    return "?";
}

void RunConfig::validate() const
{
    if (grammar.max_depth < 0 || grammar.max_nodes < 1)
        throw ConfigError("grammar limits require max_depth >= 0 and max_nodes >= 1");
    if (hold_offset < 0 || hold_offset > 3)
        throw ConfigError("data.hold_offset must be in 0..3");
    if (score.lambda_depth < 0.0 || score.lambda_nodes < 0.0)
        throw ConfigError("score penalties must be non-negative");
    if (n_starts < 1)
        throw ConfigError("fit.n_starts must be >= 1");
    if (max_evals < 0)
        throw ConfigError("fit.max_evals must be >= 0");
    if (k_max < 1)
        throw ConfigError("cascade.k_max must be >= 1");
    if (!(t_end > 0.0))
        throw ConfigError("cascade.t_end must be positive");
    if (!(k_fit.lo > 0.0) || k_fit.hi < k_fit.lo || !(tau0.lo > 0.0) || tau0.hi < tau0.lo)
        throw ConfigError("cascade grid axes need 0 < lo <= hi");
    for (const auto& [key, range] : bound_overrides) {
        if (!bound_keys().contains(key))
            throw ConfigError("unknown bound key \"" + key + "\"");
        if (!(range.first < range.second))
            throw ConfigError("bound " + key + " needs lo < hi");
    }
    if (command == Command::Search && traces.empty())
        throw ConfigError("search needs at least one trace file (data.traces)");
    try {
        network.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig load_config(const std::filesystem::path& path, RunConfig cfg)
{
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("cannot read config: " + std::string(e.what()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config key \"" + section + "\" must live inside a section");
        if (section == "manifest")
            continue;
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            const std::string value = trim(node.data());
            if (section == "bounds") {
                const auto w = words(value);
                if (w.size() != 2)
                    throw ConfigError("bounds." + key + ": expected \"lo hi\"");
                cfg.bound_overrides[key] = {to_double(full, w[0]), to_double(full, w[1])};
                continue;
            }
            const auto it = setters().find(full);
            if (it == setters().end())
                throw ConfigError("unknown config key \"" + full + "\"");
            it->second(cfg, full, value);
        }
    }
    return cfg;
}

std::string dump_config(const RunConfig& c)
{
    std::string out;
    auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    auto axis = [](const GridAxis& a) { return fmt_num(a.lo) + " " + fmt_num(a.hi) + " " + std::to_string(a.count); };
    out += "[run]\n";
    line("command", to_string(c.command));
    line("out", c.out_dir);
    line("seed", std::to_string(c.seed));
    line("threads", std::to_string(c.threads));
    out += "\n[data]\n";
    std::string joined;
    for (std::size_t i = 0; i < c.traces.size(); ++i)
        joined += (i ? ", " : "") + c.traces[i];
    line("traces", joined);
    line("hold_offset", std::to_string(c.hold_offset));
    out += "\n[grammar]\n";
    line("kind", c.grammar.kind == BlockKind::Eml ? "eml" : "hill");
    line("max_depth", std::to_string(c.grammar.max_depth));
    line("max_nodes", std::to_string(c.grammar.max_nodes));
    out += "\n[model]\n";
    line("embedding", to_string(c.embedding));
    out += "\n[score]\n";
    line("lambda_depth", fmt_num(c.score.lambda_depth));
    line("lambda_nodes", fmt_num(c.score.lambda_nodes));
    out += "\n[fit]\n";
    line("n_starts", std::to_string(c.n_starts));
    line("max_evals", std::to_string(c.max_evals));
    if (!c.bound_overrides.empty()) {
        out += "\n[bounds]\n";
        for (const auto& [k, r] : c.bound_overrides)
            line(k, fmt_num(r.first) + " " + fmt_num(r.second));
    }
    out += "\n[cascade]\n";
    line("k_max", std::to_string(c.k_max));
    line("t_end", fmt_num(c.t_end));
    line("n_points", std::to_string(c.n_points));
    line("k_fit", axis(c.k_fit));
    line("tau0", axis(c.tau0));
    out += "\n[network]\n";
    const NetworkParams& n = c.network;
    line("n_a", std::to_string(n.n_a));
    line("n_i", std::to_string(n.n_i));
    line("k_r", fmt_num(n.k_r));
    line("kon_a", fmt_num(n.kon_a));
    line("koff_a", fmt_num(n.koff_a));
    line("tau_a", fmt_num(n.tau_a));
    line("kon_i", fmt_num(n.kon_i));
    line("koff_i", fmt_num(n.koff_i));
    line("tau_i", fmt_num(n.tau_i));
    line("amp_a", fmt_num(n.amp_a));
    line("amp_i", fmt_num(n.amp_i));
    line("k_a", fmt_num(n.k_a));
    line("k_i", fmt_num(n.k_i));
    line("y0", fmt_num(n.y0));
    line("sigma_noise", fmt_num(n.sigma_noise));
    line("seed", std::to_string(n.seed));
    return out;
}

Bounds apply_bound_overrides(Bounds bounds, const std::map<std::string, std::pair<double, double>>& overrides)
{
    for (auto& b : bounds) {
        const auto it = overrides.find(base_name(b.name));
        if (it == overrides.end())
            continue;
        b.lo = it->second.first;
        b.hi = it->second.second;
        if (b.scale == Scale::Log && !(b.lo > 0.0))
            b.scale = Scale::Linear;
    }
    return bounds;
}

std::vector<Trace> parse_trace_csv(const std::string& text, const std::string& source, int hold_offset)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    int col_t = -1, col_y = -1, col_sem = -1, col_label = -1;
    std::size_t n_cols = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty())
            break;
    }
    if (line_no == 0 || trim(line).empty())
        throw DataError(source + ": empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
        line = line.substr(3); // UTF-8 BOM
    const auto header = split(trim(line), ',');
    n_cols = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        const int c = static_cast<int>(i);
        if (header[i] == "t")
            col_t = c;
        else if (header[i] == "y")
            col_y = c;
        else if (header[i] == "sem")
            col_sem = c;
        else if (header[i] == "label")
            col_label = c;
        else
            throw DataError(source + ":" + std::to_string(line_no) + ": unknown column \"" + header[i] + "\"");
    }
    if (col_t < 0 || col_y < 0 || col_sem < 0)
        throw DataError(source + ": header must contain t,y,sem[,label]");

    struct Row {
        double t, y, sem;
        std::size_t line;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> groups;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto cells = split(trim(line), ',');
        const std::string where = source + ":" + std::to_string(line_no);
        if (cells.size() != n_cols)
            throw DataError(where + ": expected " + std::to_string(n_cols) + " fields, got " +
                            std::to_string(cells.size()));
        Row r{};
        r.line = line_no;
        if (!parse_double(cells[static_cast<std::size_t>(col_t)], r.t) || !std::isfinite(r.t))
            throw DataError(where + ": bad t value \"" + cells[static_cast<std::size_t>(col_t)] + "\"");
        if (!parse_double(cells[static_cast<std::size_t>(col_y)], r.y) || !std::isfinite(r.y))
            throw DataError(where + ": bad y value \"" + cells[static_cast<std::size_t>(col_y)] + "\"");
        const std::string& sem = cells[static_cast<std::size_t>(col_sem)];
        if (sem.empty() || sem == "NA" || sem == "nan") {
            r.sem = std::numeric_limits<double>::quiet_NaN();
        } else if (!parse_double(sem, r.sem) || r.sem < 0.0) {
            throw DataError(where + ": bad sem value \"" + sem + "\"");
        }
        const std::string label = col_label >= 0 ? cells[static_cast<std::size_t>(col_label)] : std::string();
        if (!groups.contains(label))
            order.push_back(label);
        groups[label].push_back(r);
    }

    std::vector<Trace> out;
    for (const auto& label : order) {
        auto rows = groups[label];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
        std::vector<double> t, y, sem;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].t < 0.0)
                throw DataError(source + ":" + std::to_string(rows[i].line) + ": negative time");
            if (i > 0 && !(rows[i].t > rows[i - 1].t))
                throw DataError(source + ":" + std::to_string(rows[i].line) + ": repeated time " +
                                fmt_num(rows[i].t) + " in trace \"" + label + "\"");
            t.push_back(rows[i].t);
            y.push_back(rows[i].y);
            sem.push_back(rows[i].sem);
        }
        if (t.size() < 4)
            throw DataError(source + ": trace \"" + label + "\" has fewer than 4 points");
        double dose = 1.0;
        if (!label.empty()) {
            double d = 0.0;
            if (parse_double(label, d) && d > 0.0)
                dose = d;
        }
        try {
            out.push_back(Trace::make(label, std::move(t), std::move(y), std::move(sem), hold_offset, dose));
        } catch (const std::invalid_argument& e) {
            throw DataError(source + ": " + e.what());
        }
    }
    if (out.empty())
        throw DataError(source + ": no data rows");
    return out;
}

std::vector<Trace> ingest_trace(const std::filesystem::path& path, int hold_offset)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error& e) {
        throw DataError(e.what());
    }
    return parse_trace_csv(text, path.string(), hold_offset);
}

std::string git_blob_hash(const std::string& content)
{
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr)
        throw std::runtime_error("OpenSSL: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok)
        throw std::runtime_error("OpenSSL: SHA-1 failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec)
            throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

std::string fmt_num(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.10g}", v);
}

} // namespace emlrom

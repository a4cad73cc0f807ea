#pragma once
// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace oracle {

// Raw trees as strings: "R", "B(x)", "S(x,y)". No canonicalization at all.
inline std::vector<std::string> raw_trees(int nodes, int depth)
{
    std::vector<std::string> out;
    if (nodes == 1) {
        out.push_back("R");
        return out;
    }
    if (depth >= 1)
        for (const auto& c : raw_trees(nodes - 1, depth - 1))
            out.push_back("B(" + c + ")");
    for (int l = 1; l <= nodes - 2; ++l)
        for (const auto& a : raw_trees(l, depth))
            for (const auto& b : raw_trees(nodes - 1 - l, depth))
                out.push_back("S(" + a + "," + b + ")");
    return out;
}

struct Reader {
    const std::string& s;
    std::size_t i = 0;
    char peek() const { return i < s.size() ? s[i] : '\0'; }
    void expect(char c)
    {
        if (peek() != c)
            throw std::runtime_error("oracle parse error in " + s);
        ++i;
    }
};

// Canonical key: sums flattened into a sorted multiset "{a|b|...}".
inline std::string raw_key(Reader& r);

inline void raw_operands(Reader& r, std::vector<std::string>& ops)
{
    if (r.peek() == 'S') {
        r.expect('S');
        r.expect('(');
        raw_operands(r, ops);
        r.expect(',');
        raw_operands(r, ops);
        r.expect(')');
        return;
    }
    ops.push_back(raw_key(r));
}

inline std::string raw_key(Reader& r)
{
    const char c = r.peek();
    if (c == 'R') {
        r.expect('R');
        return "R";
    }
    if (c == 'B') {
        r.expect('B');
        r.expect('(');
        std::string inner = raw_key(r);
        r.expect(')');
        return "B[" + inner + "]";
    }
    std::vector<std::string> ops;
    raw_operands(r, ops);
    std::sort(ops.begin(), ops.end());
    std::string k = "{";
    for (std::size_t j = 0; j < ops.size(); ++j)
        k += (j ? "|" : "") + ops[j];
    return k + "}";
}

inline std::string key_of_raw(const std::string& raw)
{
    Reader r{raw};
    return raw_key(r);
}

// Same key from printed infix ("G(G(R)+R)", "(R+R)+R", "H(R)+H(R)").
inline std::string infix_key(Reader& r);

inline std::string infix_term(Reader& r)
{
    const char c = r.peek();
    if (c == 'R') {
        r.expect('R');
        return "R";
    }
    if (c == 'G' || c == 'H') {
        ++r.i;
        r.expect('(');
        std::string inner = infix_key(r);
        r.expect(')');
        return "B[" + inner + "]";
    }
    r.expect('(');
    std::string inner = infix_key(r);
    r.expect(')');
    return inner;
}

inline void flatten_key(const std::string& k, std::vector<std::string>& ops)
{
    if (k.empty() || k.front() != '{') {
        ops.push_back(k);
        return;
    }
    int depth = 0;
    std::size_t start = 1;
    for (std::size_t i = 1; i + 1 < k.size(); ++i) {
        if (k[i] == '{' || k[i] == '[')
            ++depth;
        else if (k[i] == '}' || k[i] == ']')
            --depth;
        else if (k[i] == '|' && depth == 0) {
            ops.push_back(k.substr(start, i - start));
            start = i + 1;
        }
    }
    ops.push_back(k.substr(start, k.size() - 1 - start));
}

inline std::string infix_key(Reader& r)
{
    std::vector<std::string> ops;
    flatten_key(infix_term(r), ops);
    while (r.peek() == '+') {
        ++r.i;
        flatten_key(infix_term(r), ops);
    }
    if (ops.size() == 1)
        return ops.front();
    std::sort(ops.begin(), ops.end());
    std::string k = "{";
    for (std::size_t j = 0; j < ops.size(); ++j)
        k += (j ? "|" : "") + ops[j];
    return k + "}";
}

inline std::string key_of_infix(const std::string& text)
{
    Reader r{text};
    std::string k = infix_key(r);
    if (r.i != text.size())
        throw std::runtime_error("trailing input in " + text);
    return k;
}

// Distinct keys of all raw trees within the limits.
inline std::unordered_set<std::string> brute_force_keys(int max_depth, int max_nodes)
{
    std::unordered_set<std::string> keys;
    for (int n = 1; n <= max_nodes; ++n)
        for (const auto& t : raw_trees(n, max_depth))
            keys.insert(key_of_raw(t));
    return keys;
}

// Golden-section maximization of a unimodal function on [lo, hi].
inline double golden_argmax(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13)
{
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Same search driven by a comparison better(u, v) meaning f(u) > f(v), for
// objectives whose values are too flat to compare directly.
inline double golden_argmax_by(const std::function<bool(double, double)>& better, double lo, double hi,
                               double tol = 1e-14)
{
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (better(c, d)) {
            b = d;
            d = c;
            c = b - g * (b - a);
        } else {
            a = c;
            c = d;
            d = a + g * (b - a);
        }
    }
    return 0.5 * (a + b);
}

// Published (chi2_T, N_T, p) -> (AIC, BIC) rows.
struct IcRow {
    double chi2;
    std::size_t n;
    std::size_t p;
    double aic;
    double bic;
};

inline const std::vector<IcRow>& published_ic_rows()
{
    static const std::vector<IcRow> rows = {
        {6.9, 91, 9, -216, -194},    {9.5, 91, 8, -189, -169},    {26.7, 91, 6, -100, -85},
        {571, 91, 5, 177, 190},      {6.5, 91, 8, -224, -204},    {6.7, 91, 9, -219, -197},
        {104, 91, 6, 24, 39},        {2580, 91, 5, 314, 327},     {8.3, 91, 9, -200, -177},
        {9.0, 91, 8, -195, -175},    {34.7, 91, 6, -76, -61},     {2127, 91, 5, 297, 309},
        {19.2, 91, 9, -124, -101},   {21.9, 91, 8, -114, -93},    {52, 91, 6, -38, -23},
        {1356, 91, 5, 256, 268},     {51367, 181, 5, 1032, 1048}, {38124, 181, 4, 976, 989},
        {2765, 181, 5, 503, 519},    {2277, 181, 6, 470, 490},    {1955, 181, 7, 445, 467},
        {1839, 181, 8, 436, 461},    {1244, 181, 9, 367, 396},    {1239, 181, 10, 368, 400},
        {1288, 181, 11, 377, 412},   {1282, 181, 12, 378, 417},   {1281, 181, 13, 380, 422},
    };
    return rows;
}

} // namespace oracle

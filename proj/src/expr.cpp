#include "emlrom/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

namespace emlrom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Token = Expression::Token;

// Index one past the subtree that starts at `pos`.
std::size_t subtree_end(const std::vector<Token>& tokens, std::size_t pos)
{
    int open = 1;
    while (open > 0) {
        switch (tokens[pos++]) {
        case Token::Terminal: --open; break;
        case Token::Block: break;
        case Token::Sum: ++open; break;
        }
    }
    return pos;
}

Shape shape_at(const std::vector<Token>& tokens, std::size_t& pos) noexcept
{
    switch (tokens[pos++]) {
    case Token::Terminal: return {0, 1};
    case Token::Block: {
        Shape s = shape_at(tokens, pos);
        return {s.depth + 1, s.nodes + 1};
    }
    case Token::Sum: {
        Shape l = shape_at(tokens, pos);
        Shape r = shape_at(tokens, pos);
        return {std::max(l.depth, r.depth), l.nodes + r.nodes + 1};
    }
    }
    return {};
}

double eval_at(const std::vector<Token>& tokens, std::size_t& pos, int& slot, BlockKind kind,
               std::span<const double> params, double x) noexcept
{
    switch (tokens[pos++]) {
    case Token::Terminal: return x;
    case Token::Block: {
        const std::size_t off = 3 * static_cast<std::size_t>(slot++);
        const double inner = eval_at(tokens, pos, slot, kind, params, x);
        return block_value(kind, std::span<const double, 3>(params.data() + off, 3), inner);
    }
    case Token::Sum: {
        const double l = eval_at(tokens, pos, slot, kind, params, x);
        const double r = eval_at(tokens, pos, slot, kind, params, x);
        return l + r;
    }
    }
    return kNaN;
}

// Mutable tree used while canonicalizing; `slot` carries the original block
// slot so the permutation can be reported.
struct Node {
    Token token = Token::Terminal;
    int slot = -1;
    std::vector<std::unique_ptr<Node>> kids;
    std::vector<Token> key; // prefix tokens, filled after canonicalization
};

std::unique_ptr<Node> build(const std::vector<Token>& tokens, std::size_t& pos, int& slot)
{
    auto n = std::make_unique<Node>();
    n->token = tokens[pos++];
    if (n->token == Token::Block) {
        n->slot = slot++;
        n->kids.push_back(build(tokens, pos, slot));
    } else if (n->token == Token::Sum) {
        n->kids.push_back(build(tokens, pos, slot));
        n->kids.push_back(build(tokens, pos, slot));
    }
    return n;
}

void collect_operands(std::unique_ptr<Node> n, std::vector<std::unique_ptr<Node>>& out)
{
    if (n->token == Token::Sum) {
        for (auto& k : n->kids)
            collect_operands(std::move(k), out);
    } else {
        out.push_back(std::move(n));
    }
}

void refresh_key(Node& n)
{
    n.key.clear();
    n.key.push_back(n.token);
    for (const auto& k : n.kids)
        n.key.insert(n.key.end(), k->key.begin(), k->key.end());
}

std::unique_ptr<Node> canon(std::unique_ptr<Node> n)
{
    if (n->token == Token::Terminal) {
        refresh_key(*n);
        return n;
    }
    if (n->token == Token::Block) {
        n->kids[0] = canon(std::move(n->kids[0]));
        refresh_key(*n);
        return n;
    }
    std::vector<std::unique_ptr<Node>> ops;
    collect_operands(std::move(n), ops);
    for (auto& op : ops)
        op = canon(std::move(op));
    std::stable_sort(ops.begin(), ops.end(), [](const auto& x, const auto& y) { return x->key < y->key; });
    // right-nested: a + (b + (c + ...))
    std::unique_ptr<Node> acc = std::move(ops.back());
    for (std::size_t i = ops.size() - 1; i-- > 0;) {
        auto s = std::make_unique<Node>();
        s->token = Token::Sum;
        s->kids.push_back(std::move(ops[i]));
        s->kids.push_back(std::move(acc));
        refresh_key(*s);
        acc = std::move(s);
    }
    return acc;
}

void flatten(const Node& n, std::vector<Token>& tokens, std::vector<int>& slots)
{
    tokens.push_back(n.token);
    if (n.token == Token::Block)
        slots.push_back(n.slot);
    for (const auto& k : n.kids)
        flatten(*k, tokens, slots);
}

std::pair<std::vector<Token>, std::vector<int>> canonical_with_slots(const std::vector<Token>& tokens)
{
    std::size_t pos = 0;
    int slot = 0;
    auto root = canon(build(tokens, pos, slot));
    std::vector<Token> out;
    std::vector<int> slots;
    flatten(*root, out, slots);
    return {std::move(out), std::move(slots)};
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    std::vector<Token> run()
    {
        auto t = parse_sum();
        skip_ws();
        if (pos_ != text_.size())
            fail("trailing characters");
        return t;
    }

private:
    std::vector<Token> parse_sum()
    {
        std::vector<std::vector<Token>> terms;
        terms.push_back(parse_term());
        while (peek() == '+') {
            ++pos_;
            terms.push_back(parse_term());
        }
        // a+b+c reads as a+(b+c), the form the printer leaves unbracketed
        std::vector<Token> acc = std::move(terms.back());
        for (std::size_t i = terms.size() - 1; i-- > 0;) {
            std::vector<Token> s{Token::Sum};
            s.insert(s.end(), terms[i].begin(), terms[i].end());
            s.insert(s.end(), acc.begin(), acc.end());
            acc = std::move(s);
        }
        return acc;
    }

    std::vector<Token> parse_term()
    {
        const char c = peek();
        if (c == 'R') {
            ++pos_;
            return {Token::Terminal};
        }
        if (c == 'G' || c == 'H') {
            ++pos_;
            expect('(');
            std::vector<Token> t{Token::Block};
            auto inner = parse_sum();
            t.insert(t.end(), inner.begin(), inner.end());
            expect(')');
            return t;
        }
        if (c == '(') {
            ++pos_;
            auto inner = parse_sum();
            expect(')');
            return inner;
        }
        fail("expected R, G(, H( or (");
        return {};
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t'))
            ++pos_;
    }

    char peek()
    {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void expect(char c)
    {
        if (peek() != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw std::invalid_argument("cannot parse expression \"" + std::string(text_) + "\" at offset " +
                                    std::to_string(pos_) + ": " + what);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void print_at(const std::vector<Token>& tokens, std::size_t& pos, char sym, std::string& out)
{
    switch (tokens[pos++]) {
    case Token::Terminal: out += 'R'; break;
    case Token::Block:
        out += sym;
        out += '(';
        print_at(tokens, pos, sym, out);
        out += ')';
        break;
    case Token::Sum: {
        // A sum nested on the left needs brackets; right nesting reads as a flat chain.
        const bool left_sum = tokens[pos] == Token::Sum;
        if (left_sum)
            out += '(';
        print_at(tokens, pos, sym, out);
        if (left_sum)
            out += ')';
        out += '+';
        print_at(tokens, pos, sym, out);
        break;
    }
    }
}

} // namespace

double gate_eval(const GateParams& p, double x)
{
    if (!(p.c + x >= kGateGuard))
        throw DomainError("gate evaluated with c + x <= 0");
    return std::pow(p.c + x, p.a) - p.b * x - std::pow(p.c, p.a);
}

double hill_eval(const HillParams& p, double x)
{
    if (x < 0.0)
        throw DomainError("Hill block evaluated at negative input");
    if (x == 0.0)
        return 0.0;
    // x^h / (K^h + x^h) = 1 / (1 + (K/x)^h)
    return p.amplitude / (1.0 + std::pow(p.half_sat / x, p.coeff));
}

double block_value(BlockKind kind, std::span<const double, 3> p, double x) noexcept
{
    if (kind == BlockKind::Eml) {
        if (!(p[2] + x >= kGateGuard))
            return kNaN;
        return std::pow(p[2] + x, p[0]) - p[1] * x - std::pow(p[2], p[0]);
    }
    if (!(x >= 0.0))
        return kNaN;
    if (x == 0.0)
        return 0.0;
    return p[0] / (1.0 + std::pow(p[1] / x, p[2]));
}

char block_symbol(BlockKind kind) noexcept
{
    return kind == BlockKind::Eml ? 'G' : 'H';
}

Expression::Expression() : tokens_{Token::Terminal} {}

Expression Expression::terminal()
{
    return Expression();
}

Expression Expression::block(const Expression& child)
{
    std::vector<Token> t{Token::Block};
    t.insert(t.end(), child.tokens_.begin(), child.tokens_.end());
    return Expression(std::move(t));
}

Expression Expression::sum(const Expression& left, const Expression& right)
{
    std::vector<Token> t{Token::Sum};
    t.insert(t.end(), left.tokens_.begin(), left.tokens_.end());
    t.insert(t.end(), right.tokens_.begin(), right.tokens_.end());
    return Expression(std::move(t));
}

Expression Expression::parse(std::string_view text)
{
    return Expression(Parser(text).run());
}

int Expression::block_count() const noexcept
{
    return static_cast<int>(std::count(tokens_.begin(), tokens_.end(), Token::Block));
}

Shape Expression::shape() const noexcept
{
    std::size_t pos = 0;
    return shape_at(tokens_, pos);
}

Expression Expression::child() const
{
    if (root() != Token::Block)
        throw std::logic_error("child() on a non-block expression");
    return Expression(std::vector<Token>(tokens_.begin() + 1, tokens_.end()));
}

std::pair<Expression, Expression> Expression::children() const
{
    if (root() != Token::Sum)
        throw std::logic_error("children() on a non-sum expression");
    const std::size_t mid = subtree_end(tokens_, 1);
    return {Expression(std::vector<Token>(tokens_.begin() + 1, tokens_.begin() + static_cast<std::ptrdiff_t>(mid))),
            Expression(std::vector<Token>(tokens_.begin() + static_cast<std::ptrdiff_t>(mid), tokens_.end()))};
}

std::string Expression::to_string(BlockKind kind) const
{
    std::string out;
    std::size_t pos = 0;
    print_at(tokens_, pos, block_symbol(kind), out);
    return out;
}

Shape measure(const Expression& e) noexcept
{
    return e.shape();
}

Expression canonicalize(const Expression& e)
{
    const auto tokens = canonical_with_slots(e.tokens()).first;
    std::size_t pos = 0;
    auto rebuild = [&](auto&& self) -> Expression {
        switch (tokens[pos++]) {
        case Token::Terminal: return Expression::terminal();
        case Token::Block: return Expression::block(self(self));
        case Token::Sum: {
            Expression l = self(self);
            Expression r = self(self);
            return Expression::sum(l, r);
        }
        }
        return Expression::terminal();
    };
    return rebuild(rebuild);
}

std::vector<int> canonical_slot_map(const Expression& e)
{
    return canonical_with_slots(e.tokens()).second;
}

std::vector<Expression> enumerate(const GrammarConfig& cfg)
{
    if (cfg.max_depth < 0 || cfg.max_nodes < 1)
        throw std::invalid_argument("grammar limits require max_depth >= 0 and max_nodes >= 1");

    // by_size[n] holds canonical expressions with exactly n nodes.
    std::vector<std::set<Expression>> by_size(static_cast<std::size_t>(cfg.max_nodes) + 1);
    by_size[1].insert(Expression::terminal());
    for (int n = 2; n <= cfg.max_nodes; ++n) {
        auto& bucket = by_size[static_cast<std::size_t>(n)];
        for (const auto& inner : by_size[static_cast<std::size_t>(n - 1)]) {
            if (inner.shape().depth + 1 <= cfg.max_depth)
                bucket.insert(Expression::block(inner));
        }
        for (int left = 1; left <= n - 2; ++left) {
            const int right = n - 1 - left;
            for (const auto& l : by_size[static_cast<std::size_t>(left)])
                for (const auto& r : by_size[static_cast<std::size_t>(right)])
                    bucket.insert(canonicalize(Expression::sum(l, r)));
        }
    }

    std::vector<Expression> out;
    for (const auto& bucket : by_size)
        out.insert(out.end(), bucket.begin(), bucket.end());
    std::stable_sort(out.begin(), out.end(), [](const Expression& x, const Expression& y) {
        const Shape sx = x.shape();
        const Shape sy = y.shape();
        if (sx.nodes != sy.nodes)
            return sx.nodes < sy.nodes;
        if (sx.depth != sy.depth)
            return sx.depth < sy.depth;
        return x < y;
    });
    return out;
}

double eval_expr_nothrow(const Expression& e, BlockKind kind, std::span<const double> params, double x) noexcept
{
    if (params.size() != 3 * static_cast<std::size_t>(e.block_count()))
        return kNaN;
    std::size_t pos = 0;
    int slot = 0;
    return eval_at(e.tokens(), pos, slot, kind, params, x);
}

BoundExpression::BoundExpression(const Expression& e, BlockKind kind, std::span<const double> params)
    : tokens_(&e.tokens()), kind_(kind), p_(params.begin(), params.end())
{
    const auto blocks = static_cast<std::size_t>(e.block_count());
    if (params.size() != 3 * blocks) {
        valid_ = false;
        return;
    }
    shift_.resize(blocks, 0.0);
    if (kind == BlockKind::Eml)
        for (std::size_t j = 0; j < blocks; ++j)
            shift_[j] = std::pow(p_[3 * j + 2], p_[3 * j]);
}

double BoundExpression::operator()(double x) const noexcept
{
    if (!valid_)
        return kNaN;
    std::size_t pos = 0;
    int slot = 0;
    return eval(pos, slot, x);
}

double BoundExpression::eval(std::size_t& pos, int& slot, double x) const noexcept
{
    switch ((*tokens_)[pos++]) {
    case Token::Terminal: return x;
    case Token::Block: {
        const auto j = static_cast<std::size_t>(slot++);
        const double v = eval(pos, slot, x);
        const double* p = p_.data() + 3 * j;
        if (kind_ == BlockKind::Eml) {
            if (!(p[2] + v >= kGateGuard))
                return kNaN;
            return std::pow(p[2] + v, p[0]) - p[1] * v - shift_[j];
        }
        return block_value(kind_, std::span<const double, 3>(p, 3), v);
    }
    case Token::Sum: {
        const double l = eval(pos, slot, x);
        const double r = eval(pos, slot, x);
        return l + r;
    }
    }
    return kNaN;
}

double eval_expr(const Expression& e, BlockKind kind, std::span<const double> params, double x)
{
    if (params.size() != 3 * static_cast<std::size_t>(e.block_count()))
        throw std::invalid_argument("parameter vector length must be 3 x block count");
    const double v = eval_expr_nothrow(e, kind, params, x);
    if (std::isnan(v))
        throw DomainError("expression " + e.to_string(kind) + " left its domain at x = " + std::to_string(x));
    return v;
}

} // namespace emlrom

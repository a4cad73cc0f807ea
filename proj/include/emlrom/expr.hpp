#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace emlrom {

/// Raised when a block is evaluated outside its domain (c + x <= 0 for the
/// gate, x < 0 for the Hill block, S < 0 for the linker). Optimizers treat the
/// parameter point as infeasible.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class BlockKind { Eml, Hill };

/// Smallest admissible value of c + x inside a gate.
inline constexpr double kGateGuard = 1e-12;

/// Centered EML gate parameters: G(x) = (c+x)^a - b*x - c^a.
struct GateParams {
    double a = 1.0; ///< exponent, > 0
    double b = 0.0; ///< linear suppression slope, >= 0
    double c = 1.0; ///< centering offset, >= 0
};

/// Hill block parameters: H(x) = A x^h / (K_d^h + x^h).
struct HillParams {
    double amplitude = 1.0;
    double half_sat = 1.0;
    double coeff = 1.0;
};

double gate_eval(const GateParams& p, double x);
double hill_eval(const HillParams& p, double x);

/// Non-throwing block evaluation; returns NaN outside the domain. `p` holds
/// the three block parameters in slot order (a,b,c) or (A,K_d,h).
double block_value(BlockKind kind, std::span<const double, 3> p, double x) noexcept;

/// Symbol used when printing a block node.
char block_symbol(BlockKind kind) noexcept;

struct Shape {
    int depth = 0;
    int nodes = 0;
};

/// Expression tree over the grammar E ::= R | B(E) | E+E, stored as a prefix
/// token sequence. The token order Sum < Block < Terminal is the total order
/// used for canonical sums.
class Expression {
public:
    enum class Token : std::uint8_t { Sum = 0, Block = 1, Terminal = 2 };

    Expression(); // the terminal R

    static Expression terminal();
    static Expression block(const Expression& child);
    static Expression sum(const Expression& left, const Expression& right);

    /// Parses "G(G(R)+R)", "H(R)+H(R)", "(R+R)+R". Either block letter is
    /// accepted; the result is not canonicalized.
    static Expression parse(std::string_view text);

    const std::vector<Token>& tokens() const noexcept { return tokens_; }
    int block_count() const noexcept;
    Shape shape() const noexcept;

    /// Left/right children of a Sum root, child of a Block root.
    Token root() const noexcept { return tokens_.front(); }
    Expression child() const;
    std::pair<Expression, Expression> children() const;

    std::string to_string(BlockKind kind = BlockKind::Eml) const;

    friend bool operator==(const Expression&, const Expression&) = default;
    friend auto operator<=>(const Expression& x, const Expression& y) { return x.tokens_ <=> y.tokens_; }

private:
    explicit Expression(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}
    std::vector<Token> tokens_;
};

struct GrammarConfig {
    BlockKind kind = BlockKind::Eml;
    int max_depth = 2;
    int max_nodes = 5;
};

Shape measure(const Expression& e) noexcept;
Expression canonicalize(const Expression& e);

/// Every canonical expression within the limits, sorted by (nodes, depth, tokens).
std::vector<Expression> enumerate(const GrammarConfig& cfg);

/// Evaluates the tree at x. `params` holds 3 values per block in depth-first
/// left-to-right order. Throws DomainError on a block domain violation.
double eval_expr(const Expression& e, BlockKind kind, std::span<const double> params, double x);

/// Same as eval_expr but returns NaN instead of throwing.
double eval_expr_nothrow(const Expression& e, BlockKind kind, std::span<const double> params, double x) noexcept;

/// An expression bound to one parameter vector, with per-block constants
/// (c^a for gates) computed once. Evaluation returns NaN outside the domain.
class BoundExpression {
public:
    BoundExpression(const Expression& e, BlockKind kind, std::span<const double> params);

    double operator()(double x) const noexcept;
    bool valid() const noexcept { return valid_; }

private:
    double eval(std::size_t& pos, int& slot, double x) const noexcept;

    const std::vector<Expression::Token>* tokens_;
    BlockKind kind_;
    std::vector<double> p_;     ///< 3 per block
    std::vector<double> shift_; ///< c^a per gate
    bool valid_ = true;
};

/// For canonicalize(e): entry j of the result is the slot index in `e` of
/// the block that lands in slot j of the canonical tree.
std::vector<int> canonical_slot_map(const Expression& e);

} // namespace emlrom

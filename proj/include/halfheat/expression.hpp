#pragma once

// Signal mini-language for reproducible test data.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | 'e' | variable | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables: t, x1..xd (x is an alias of x1). Coordinates are centered: each axis
// spans [-l/2, l/2).
//
// Functions:
//   sin cos tan exp log sqrt abs tanh sign step  (one argument; step(v) = [v >= 0])
//   min(a,b) max(a,b)
//   gauss(c, w)        exp(-(t-c)^2 / (2 w^2))
//   gauss(v, c, w)     exp(-(v-c)^2 / (2 w^2))
//   bump(v, c, w)      exp(1 - 1/(1-s^2)) for s = (v-c)/w, |s| < 1, else 0 (C-infinity, compact)
//   noise(seed, band)  unit-RMS band-limited random field; keeps modes with
//                      |k_a| <= band * n_a / 2 on every axis. Mode coefficients are a pure
//                      function of (seed, k), so the same modes give the same continuum
//                      function on any grid that resolves them.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "random.hpp"

namespace halfheat {


/// Band-limited unit-RMS random field; see the header comment for the mode rule.
inline Field band_limited_noise(const Grid& g, std::uint64_t seed, double band) {
    if (!(band > 0.0 && band <= 1.0)) throw ConfigError("noise band must lie in (0, 1]");
    const int axes = g.dim() + 1;
    std::vector<long> kmax(static_cast<std::size_t>(axes));
    for (int a = 0; a < axes; ++a) {
        const long n = static_cast<long>(g.extent(a));
        kmax[static_cast<std::size_t>(a)] = std::min(static_cast<long>(std::floor(band * n / 2.0)), n / 2 - 1);
    }

    auto draw = [&](const std::vector<long>& k) {
        std::uint64_t h = splitmix64(seed ^ 0x5eedULL);
        for (long v : k) h = splitmix64(h ^ static_cast<std::uint64_t>(v + (1L << 20)));
        const double u1 = to_unit(h);
        const double u2 = to_unit(splitmix64(h));
        const double r = std::sqrt(-2.0 * std::log(u1));
        return cplx{r * std::cos(2.0 * std::numbers::pi * u2), r * std::sin(2.0 * std::numbers::pi * u2)};
    };

    fft::ComplexBuffer spec(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) spec[i] = {0.0, 0.0};
    std::vector<long> k(static_cast<std::size_t>(axes), 0);
    std::vector<long> neg(static_cast<std::size_t>(axes), 0);
    for (int a = 0; a < axes; ++a) k[static_cast<std::size_t>(a)] = -kmax[static_cast<std::size_t>(a)];
    double energy = 0.0;
    while (true) {
        int sign = 0;
        for (long v : k) {
            if (v != 0) { sign = v > 0 ? 1 : -1; break; }
        }
        cplx c;
        if (sign == 0) {
            c = {draw(k).real(), 0.0};
        } else if (sign > 0) {
            c = draw(k);
        } else {
            for (std::size_t a = 0; a < k.size(); ++a) neg[a] = -k[a];
            c = std::conj(draw(neg));
        }
        energy += std::norm(c);
        std::size_t lin = 0;
        for (int a = 0; a < axes; ++a) {
            const long n = static_cast<long>(g.extent(a));
            const long idx = (k[static_cast<std::size_t>(a)] % n + n) % n;
            lin = lin * static_cast<std::size_t>(n) + static_cast<std::size_t>(idx);
        }
        spec[lin] = c;
        int a = axes - 1;
        for (; a >= 0; --a) {
            auto& v = k[static_cast<std::size_t>(a)];
            if (++v <= kmax[static_cast<std::size_t>(a)]) break;
            v = -kmax[static_cast<std::size_t>(a)];
        }
        if (a < 0) break;
    }
    const double scale = static_cast<double>(g.size()) / std::sqrt(energy);
    for (std::size_t i = 0; i < g.size(); ++i) spec[i] *= scale;
    return fft::complex_backward_real(spec, g);
}

/// Parsed signal expression; evaluate on any grid with `sample`.
class SignalExpression {
public:
    static SignalExpression parse(std::string_view text) {
        Parser p{text, 0};
        SignalExpression e;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) throw ParseError("unexpected trailing input", p.pos);
        e.text_ = std::string(text);
        return e;
    }

    const std::string& text() const noexcept { return text_; }

    /// Samples the expression at every grid point.
    Field sample(const Grid& g) const {
        prepare(*root_, g);
        const int d = g.dim();
        const std::size_t S = g.spatial_size();
        std::vector<double> vars(static_cast<std::size_t>(d + 1));
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        Field out(g);
        for (std::size_t m = 0; m < g.nt(); ++m) {
            vars[0] = g.coordinate(0, m);
            std::fill(idx.begin(), idx.end(), 0);
            for (std::size_t s = 0; s < S; ++s) {
                for (int i = 0; i < d; ++i)
                    vars[static_cast<std::size_t>(i + 1)] = g.coordinate(i + 1, idx[static_cast<std::size_t>(i)]);
                const std::size_t lin = m * S + s;
                out[lin] = eval(*root_, vars, lin);
                for (int i = d - 1; i >= 0; --i) {
                    if (++idx[static_cast<std::size_t>(i)] < g.nx(i)) break;
                    idx[static_cast<std::size_t>(i)] = 0;
                }
            }
        }
        if (!out.all_finite()) throw ConfigError("expression '" + text_ + "' produced non-finite samples");
        return out;
    }

private:
    enum class Op { number, variable, add, sub, mul, div, pow, neg, call };

    struct Node {
        Op op = Op::number;
        double value = 0.0;
        int variable = 0;
        std::string name;
        std::vector<std::unique_ptr<Node>> args;
        // Cached samples for noise(); filled per grid.
        mutable Grid cached_grid;
        mutable std::vector<double> cached;
    };
    using NodePtr = std::unique_ptr<Node>;

    struct Parser {
        std::string_view s;
        std::size_t pos;

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) { ++pos; return true; }
            return false;
        }
        void expect(char c) {
            if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos);
        }
        static NodePtr binary(Op op, NodePtr a, NodePtr b) {
            auto n = std::make_unique<Node>();
            n->op = op;
            n->args.push_back(std::move(a));
            n->args.push_back(std::move(b));
            return n;
        }
        NodePtr expr() {
            auto lhs = term();
            while (true) {
                if (accept('+')) lhs = binary(Op::add, std::move(lhs), term());
                else if (accept('-')) lhs = binary(Op::sub, std::move(lhs), term());
                else return lhs;
            }
        }
        NodePtr term() {
            auto lhs = unary();
            while (true) {
                if (accept('*')) lhs = binary(Op::mul, std::move(lhs), unary());
                else if (accept('/')) lhs = binary(Op::div, std::move(lhs), unary());
                else return lhs;
            }
        }
        NodePtr unary() {
            if (accept('-')) {
                auto n = std::make_unique<Node>();
                n->op = Op::neg;
                n->args.push_back(unary());
                return n;
            }
            if (accept('+')) return unary();
            return power();
        }
        NodePtr power() {
            auto base = primary();
            if (accept('^')) return binary(Op::pow, std::move(base), unary());
            return base;
        }
        NodePtr primary() {
            skip();
            if (pos >= s.size()) throw ParseError("unexpected end of expression", pos);
            const char c = s[pos];
            if (c == '(') {
                ++pos;
                auto e = expr();
                expect(')');
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const std::string rest(s.substr(pos));
                char* end = nullptr;
                const double v = std::strtod(rest.c_str(), &end);
                if (end == rest.c_str()) throw ParseError("malformed number", pos);
                pos += static_cast<std::size_t>(end - rest.c_str());
                auto n = std::make_unique<Node>();
                n->value = v;
                return n;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                const std::size_t start = pos;
                while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
                const std::string name(s.substr(start, pos - start));
                if (accept('(')) {
                    auto n = std::make_unique<Node>();
                    n->op = Op::call;
                    n->name = name;
                    if (!accept(')')) {
                        do n->args.push_back(expr()); while (accept(','));
                        expect(')');
                    }
                    check_call(*n, start);
                    return n;
                }
                auto n = std::make_unique<Node>();
                if (name == "pi") { n->value = std::numbers::pi; return n; }
                if (name == "e") { n->value = std::numbers::e; return n; }
                n->op = Op::variable;
                if (name == "t") n->variable = 0;
                else if (name == "x") n->variable = 1;
                else if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '3') n->variable = name[1] - '0';
                else throw ParseError("unknown identifier '" + name + "'", start);
                return n;
            }
            throw ParseError(std::string("unexpected character '") + c + "'", pos);
        }
        static void check_call(const Node& n, std::size_t at) {
            static const std::vector<std::string> unary_fns{"sin", "cos", "tan", "exp", "log", "sqrt",
                                                            "abs", "tanh", "sign", "step"};
            const auto argc = n.args.size();
            for (const auto& f : unary_fns)
                if (n.name == f) {
                    if (argc != 1) throw ParseError(f + " takes one argument", at);
                    return;
                }
            if (n.name == "min" || n.name == "max") {
                if (argc != 2) throw ParseError(n.name + " takes two arguments", at);
                return;
            }
            if (n.name == "gauss") {
                if (argc != 2 && argc != 3) throw ParseError("gauss takes (center, width) or (v, center, width)", at);
                return;
            }
            if (n.name == "bump") {
                if (argc != 3) throw ParseError("bump takes (v, center, width)", at);
                return;
            }
            if (n.name == "noise") {
                if (argc != 2 || n.args[0]->op != Op::number || n.args[1]->op != Op::number)
                    throw ParseError("noise takes two numeric literals (seed, band)", at);
                return;
            }
            throw ParseError("unknown function '" + n.name + "'", at);
        }
    };

    void prepare(const Node& n, const Grid& g) const {
        for (const auto& a : n.args) prepare(*a, g);
        if (n.op == Op::variable && n.variable > g.dim())
            throw ConfigError("variable x" + std::to_string(n.variable) + " exceeds grid dimension");
        if (n.op == Op::call && n.name == "noise" && (n.cached.empty() || n.cached_grid != g)) {
            const double seed = n.args[0]->value;
            if (seed < 0 || seed != std::floor(seed)) throw ConfigError("noise seed must be a non-negative integer");
            n.cached = band_limited_noise(g, static_cast<std::uint64_t>(seed), n.args[1]->value).raw();
            n.cached_grid = g;
        }
    }

    static double gauss(double v, double c, double w) {
        const double z = (v - c) / w;
        return std::exp(-0.5 * z * z);
    }

    static double eval(const Node& n, const std::vector<double>& vars, std::size_t lin) {
        auto arg = [&](std::size_t i) { return eval(*n.args[i], vars, lin); };
        switch (n.op) {
        case Op::number: return n.value;
        case Op::variable: return vars[static_cast<std::size_t>(n.variable)];
        case Op::add: return arg(0) + arg(1);
        case Op::sub: return arg(0) - arg(1);
        case Op::mul: return arg(0) * arg(1);
        case Op::div: return arg(0) / arg(1);
        case Op::pow: return std::pow(arg(0), arg(1));
        case Op::neg: return -arg(0);
        case Op::call: break;
        }
        const std::string& f = n.name;
        if (f == "noise") return n.cached[lin];
        if (f == "sin") return std::sin(arg(0));
        if (f == "cos") return std::cos(arg(0));
        if (f == "tan") return std::tan(arg(0));
        if (f == "exp") return std::exp(arg(0));
        if (f == "log") return std::log(arg(0));
        if (f == "sqrt") return std::sqrt(arg(0));
        if (f == "abs") return std::abs(arg(0));
        if (f == "tanh") return std::tanh(arg(0));
        if (f == "sign") { const double v = arg(0); return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }
        if (f == "step") return arg(0) >= 0.0 ? 1.0 : 0.0;
        if (f == "min") return std::min(arg(0), arg(1));
        if (f == "max") return std::max(arg(0), arg(1));
        if (f == "gauss") {
            if (n.args.size() == 2) return gauss(vars[0], arg(0), arg(1));
            return gauss(arg(0), arg(1), arg(2));
        }
        if (f == "bump") {
            const double s = (arg(0) - arg(1)) / arg(2);
            if (std::abs(s) >= 1.0) return 0.0;
            return std::exp(1.0 - 1.0 / (1.0 - s * s));
        }
        return 0.0;
    }

    std::shared_ptr<Node> root_;
    std::string text_;
};

inline Field field_from_expression(const Grid& g, std::string_view expr) {
    return SignalExpression::parse(expr).sample(g);
}

} // namespace halfheat

#include "lazytime/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <utility>

namespace lazytime {
namespace {

enum class Tok {
    Ident,
    Int,
    ObsName,  // print#k
    KwIf, KwThen, KwElse, KwFi,
    KwWhile, KwDo, KwOd, KwSpec,
    KwPrint, KwOk, KwStop,
    KwTrue, KwFalse,
    KwNeed, KwForall, KwExists, KwMax, KwInf, KwTime,
    Assign, Semi,
    LParen, RParen,
    Plus, Minus, Star, Slash,
    Eq, Ne, Lt, Le, Gt, Ge,
    Bang, AndOp, OrOp, Tilde, ImpliesOp,
    Dot, DotDot, Colon, Bar, Prime,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    long long value = 0;
    SourceSpan span;
};

Tok keyword_of(const std::string& s) {
    if (s == "if") return Tok::KwIf;
    if (s == "then") return Tok::KwThen;
    if (s == "else") return Tok::KwElse;
    if (s == "fi") return Tok::KwFi;
    if (s == "while") return Tok::KwWhile;
    if (s == "do") return Tok::KwDo;
    if (s == "od") return Tok::KwOd;
    if (s == "spec") return Tok::KwSpec;
    if (s == "print") return Tok::KwPrint;
    if (s == "ok") return Tok::KwOk;
    if (s == "stop") return Tok::KwStop;
    if (s == "true") return Tok::KwTrue;
    if (s == "false") return Tok::KwFalse;
    if (s == "need") return Tok::KwNeed;
    if (s == "forall") return Tok::KwForall;
    if (s == "exists") return Tok::KwExists;
    if (s == "max") return Tok::KwMax;
    if (s == "inf") return Tok::KwInf;
    if (s == "t") return Tok::KwTime;
    return Tok::Ident;
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    int col = 1;
    auto here = [&](std::size_t begin, std::size_t end, int l, int c) {
        SourceSpan s;
        s.line = l;
        s.column = c;
        s.begin = begin;
        s.end = end;
        return s;
    };
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i + k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };
    auto push = [&](Tok kind, std::size_t len, std::string text = {}) {
        Token t;
        t.kind = kind;
        t.text = std::move(text);
        t.span = here(i, i + len, line, col);
        out.push_back(std::move(t));
        advance(len);
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            std::string digits(src.substr(i, j - i));
            errno = 0;
            char* endp = nullptr;
            long long v = std::strtoll(digits.c_str(), &endp, 10);
            if (errno == ERANGE)
                throw Error(ErrorKind::Syntax, "integer literal out of range", here(i, j, line, col));
            Token t;
            t.kind = Tok::Int;
            t.value = v;
            t.span = here(i, j, line, col);
            out.push_back(std::move(t));
            advance(j - i);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
                ++j;
            std::string word(src.substr(i, j - i));
            // print#k is one token; everywhere else # starts a comment.
            if (word == "print" && j + 1 < src.size() && src[j] == '#' &&
                std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                std::size_t k = j + 1;
                while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                Token t;
                t.kind = Tok::ObsName;
                t.value = std::strtoll(std::string(src.substr(j + 1, k - j - 1)).c_str(), nullptr, 10);
                t.span = here(i, k, line, col);
                out.push_back(std::move(t));
                advance(k - i);
                continue;
            }
            Tok kind = keyword_of(word);
            Token t;
            t.kind = kind;
            if (kind == Tok::Ident) t.text = std::move(word);
            t.span = here(i, j, line, col);
            out.push_back(std::move(t));
            advance(j - i);
            continue;
        }
        auto rest = src.substr(i);
        auto starts = [&](std::string_view p) { return rest.substr(0, p.size()) == p; };
        if (starts("==>")) { push(Tok::ImpliesOp, 3); continue; }
        if (starts(":=")) { push(Tok::Assign, 2); continue; }
        if (starts("!=")) { push(Tok::Ne, 2); continue; }
        if (starts("<=")) { push(Tok::Le, 2); continue; }
        if (starts(">=")) { push(Tok::Ge, 2); continue; }
        if (starts("/\\")) { push(Tok::AndOp, 2); continue; }
        if (starts("\\/")) { push(Tok::OrOp, 2); continue; }
        if (starts("..")) { push(Tok::DotDot, 2); continue; }
        switch (c) {
            case ';': push(Tok::Semi, 1); continue;
            case '(': push(Tok::LParen, 1); continue;
            case ')': push(Tok::RParen, 1); continue;
            case '+': push(Tok::Plus, 1); continue;
            case '-': push(Tok::Minus, 1); continue;
            case '*': push(Tok::Star, 1); continue;
            case '/': push(Tok::Slash, 1); continue;
            case '=': push(Tok::Eq, 1); continue;
            case '<': push(Tok::Lt, 1); continue;
            case '>': push(Tok::Gt, 1); continue;
            case '!': push(Tok::Bang, 1); continue;
            case '~': push(Tok::Tilde, 1); continue;
            case '.': push(Tok::Dot, 1); continue;
            case ':': push(Tok::Colon, 1); continue;
            case '|': push(Tok::Bar, 1); continue;
            case '\'': push(Tok::Prime, 1); continue;
            default:
                throw Error(ErrorKind::Syntax,
                            std::string("unexpected character '") + c + "'",
                            here(i, i + 1, line, col));
        }
    }
    Token eof;
    eof.kind = Tok::End;
    eof.span = here(i, i, line, col);
    out.push_back(std::move(eof));
    return out;
}

const char* tok_name(Tok k) {
    switch (k) {
        case Tok::Ident: return "identifier";
        case Tok::Int: return "integer";
        case Tok::ObsName: return "print#k";
        case Tok::KwIf: return "'if'";
        case Tok::KwThen: return "'then'";
        case Tok::KwElse: return "'else'";
        case Tok::KwFi: return "'fi'";
        case Tok::KwWhile: return "'while'";
        case Tok::KwDo: return "'do'";
        case Tok::KwOd: return "'od'";
        case Tok::KwSpec: return "'spec'";
        case Tok::KwPrint: return "'print'";
        case Tok::KwOk: return "'ok'";
        case Tok::KwStop: return "'stop'";
        case Tok::KwTrue: return "'true'";
        case Tok::KwFalse: return "'false'";
        case Tok::KwNeed: return "'need'";
        case Tok::KwForall: return "'forall'";
        case Tok::KwExists: return "'exists'";
        case Tok::KwMax: return "'max'";
        case Tok::KwInf: return "'inf'";
        case Tok::KwTime: return "'t'";
        case Tok::Assign: return "':='";
        case Tok::Semi: return "';'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::Eq: return "'='";
        case Tok::Ne: return "'!='";
        case Tok::Lt: return "'<'";
        case Tok::Le: return "'<='";
        case Tok::Gt: return "'>'";
        case Tok::Ge: return "'>='";
        case Tok::Bang: return "'!'";
        case Tok::AndOp: return "'/\\'";
        case Tok::OrOp: return "'\\/'";
        case Tok::Tilde: return "'~'";
        case Tok::ImpliesOp: return "'==>'";
        case Tok::Dot: return "'.'";
        case Tok::DotDot: return "'..'";
        case Tok::Colon: return "':'";
        case Tok::Bar: return "'|'";
        case Tok::Prime: return "'''";
        case Tok::End: return "end of input";
    }
    return "?";
}

// A parsed operand that is not yet committed to being a term or a predicate.
// Exactly one of the two pointers is set.
struct Operand {
    TermPtr term;
    PredPtr pred;
    SourceSpan span;
};

bool term_boolish(const TermPtr& t) {
    if (std::holds_alternative<Term::BoolLit>(t->node)) return true;
    if (std::holds_alternative<Term::NeedScalarRef>(t->node)) return true;
    if (std::holds_alternative<Term::NeedCellRef>(t->node)) return true;
    if (auto* f = std::get_if<Term::IfTerm>(&t->node)) return term_boolish(f->then_term);
    return false;
}

struct Parser {
    std::vector<Token> toks;
    std::size_t pos = 0;

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t k = pos + ahead;
        if (k >= toks.size()) k = toks.size() - 1;
        return toks[k];
    }
    bool at(Tok k) const { return peek().kind == k; }
    Token take() { return toks[pos < toks.size() - 1 ? pos++ : pos]; }
    Token expect(Tok k, const char* where) {
        if (!at(k)) {
            std::ostringstream os;
            os << "expected " << tok_name(k) << " " << where << ", found " << tok_name(peek().kind);
            throw Error(ErrorKind::Syntax, os.str(), peek().span);
        }
        return take();
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::Syntax, msg + ", found " + tok_name(peek().kind), peek().span);
    }

    // ----- operand coercion --------------------------------------------

    PredPtr to_pred(const Operand& o) const {
        if (o.pred) return o.pred;
        if (term_boolish(o.term)) return p_bool_term(o.term);
        throw Error(ErrorKind::Syntax, "expected a predicate, found a numeric expression", o.span);
    }
    TermPtr to_term(const Operand& o) const {
        if (o.term) return o.term;
        throw Error(ErrorKind::Syntax, "expected a numeric expression, found a predicate", o.span);
    }
    static Operand of_term(TermPtr t, SourceSpan s) {
        Operand o;
        o.term = std::move(t);
        o.span = s;
        return o;
    }
    static Operand of_pred(PredPtr p, SourceSpan s) {
        Operand o;
        o.pred = std::move(p);
        o.span = s;
        return o;
    }

    // ----- predicates and terms -----------------------------------------

    // Quantifier-bound index variables currently in scope.
    std::vector<std::string> bound_scope;

    bool in_scope(const std::string& name) const {
        for (auto it = bound_scope.rbegin(); it != bound_scope.rend(); ++it)
            if (*it == name) return true;
        return false;
    }

    PredPtr parse_pred() { return to_pred(parse_implies()); }

    Operand parse_implies() {
        Operand lhs = parse_or();
        if (!at(Tok::ImpliesOp)) return lhs;
        SourceSpan sp = take().span;
        Operand rhs = parse_implies();  // right associative
        return of_pred(p_implies(to_pred(lhs), to_pred(rhs)), sp);
    }

    Operand parse_or() {
        Operand lhs = parse_and();
        if (!at(Tok::OrOp)) return lhs;
        std::vector<PredPtr> parts{to_pred(lhs)};
        SourceSpan sp = lhs.span;
        while (at(Tok::OrOp)) {
            take();
            parts.push_back(to_pred(parse_and()));
        }
        return of_pred(p_or_all(parts), sp);
    }

    Operand parse_and() {
        Operand lhs = parse_not();
        if (!at(Tok::AndOp)) return lhs;
        std::vector<PredPtr> parts{to_pred(lhs)};
        SourceSpan sp = lhs.span;
        while (at(Tok::AndOp)) {
            take();
            parts.push_back(to_pred(parse_not()));
        }
        return of_pred(p_and_all(parts), sp);
    }

    Operand parse_not() {
        if (at(Tok::Tilde)) {
            SourceSpan sp = take().span;
            Operand arg = parse_not();
            return of_pred(p_not(to_pred(arg)), sp);
        }
        return parse_cmp();
    }

    static std::optional<CmpOp> cmp_op_of(Tok k) {
        switch (k) {
            case Tok::Eq: return CmpOp::Eq;
            case Tok::Ne: return CmpOp::Ne;
            case Tok::Lt: return CmpOp::Lt;
            case Tok::Le: return CmpOp::Le;
            case Tok::Gt: return CmpOp::Gt;
            case Tok::Ge: return CmpOp::Ge;
            default: return std::nullopt;
        }
    }

    Operand parse_cmp() {
        Operand lhs = parse_add();
        auto op = cmp_op_of(peek().kind);
        if (!op) return lhs;
        SourceSpan sp = take().span;
        Operand rhs = parse_add();
        if (cmp_op_of(peek().kind))
            fail("comparisons do not chain; parenthesize");
        bool lhs_pred = lhs.pred || term_boolish(lhs.term);
        bool rhs_pred = rhs.pred || term_boolish(rhs.term);
        if (lhs_pred || rhs_pred) {
            if (!(lhs_pred && rhs_pred))
                throw Error(ErrorKind::Syntax, "comparison mixes a predicate with a number", sp);
            if (*op == CmpOp::Eq) return of_pred(p_equiv(to_pred(lhs), to_pred(rhs)), sp);
            if (*op == CmpOp::Ne)
                return of_pred(p_not(p_equiv(to_pred(lhs), to_pred(rhs))), sp);
            throw Error(ErrorKind::Syntax, "predicates only compare with = or !=", sp);
        }
        return of_pred(p_cmp(*op, to_term(lhs), to_term(rhs)), sp);
    }

    Operand parse_add() {
        Operand lhs = parse_mul();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            ArithOp op = at(Tok::Plus) ? ArithOp::Add : ArithOp::Sub;
            SourceSpan sp = take().span;
            Operand rhs = parse_mul();
            lhs = of_term(t_arith(op, to_term(lhs), to_term(rhs)), sp);
        }
        return lhs;
    }

    Operand parse_mul() {
        Operand lhs = parse_unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            ArithOp op = at(Tok::Star) ? ArithOp::Mul : ArithOp::Div;
            SourceSpan sp = take().span;
            Operand rhs = parse_unary();
            lhs = of_term(t_arith(op, to_term(lhs), to_term(rhs)), sp);
        }
        return lhs;
    }

    Operand parse_unary() {
        if (at(Tok::Minus)) {
            SourceSpan sp = take().span;
            Operand arg = parse_unary();
            return of_term(t_neg(to_term(arg)), sp);
        }
        return parse_postfix();
    }

    Operand parse_postfix() {
        Operand base = parse_atom();
        while (at(Tok::Bang)) {
            SourceSpan sp = take().span;
            base = of_term(t_fact(to_term(base)), sp);
        }
        return base;
    }

    Side parse_prime() { return at(Tok::Prime) ? (take(), Side::Post) : Side::Pre; }

    Operand parse_atom() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Int: {
                Token tok = take();
                return of_term(t_int(tok.value), tok.span);
            }
            case Tok::KwTrue: {
                Token tok = take();
                return of_term(t_bool(true), tok.span);
            }
            case Tok::KwFalse: {
                Token tok = take();
                return of_term(t_bool(false), tok.span);
            }
            case Tok::KwInf: {
                Token tok = take();
                return of_term(t_inf(), tok.span);
            }
            case Tok::KwTime: {
                Token tok = take();
                return of_term(t_time(parse_prime()), tok.span);
            }
            case Tok::KwPrint: {
                Token tok = take();
                return of_term(t_obs(0), tok.span);
            }
            case Tok::ObsName: {
                Token tok = take();
                return of_term(t_obs(static_cast<int>(tok.value)), tok.span);
            }
            case Tok::KwNeed: {
                Token tok = take();
                Token name = expect(Tok::Ident, "after 'need'");
                Side side = parse_prime();
                if (at(Tok::LParen)) {
                    take();
                    TermPtr idx = to_term(parse_implies());
                    expect(Tok::RParen, "after a need index");
                    return of_term(t_need_cell(name.text, side, idx), tok.span);
                }
                return of_term(t_need_scalar(name.text, side), tok.span);
            }
            case Tok::Ident: {
                Token name = take();
                if (in_scope(name.text)) {
                    if (at(Tok::Prime) || at(Tok::LParen))
                        throw Error(ErrorKind::Syntax,
                                    "index variable '" + name.text + "' takes no prime or index",
                                    name.span);
                    return of_term(t_bound(name.text), name.span);
                }
                Side side = parse_prime();
                if (at(Tok::LParen)) {
                    take();
                    TermPtr idx = to_term(parse_implies());
                    expect(Tok::RParen, "after an array index");
                    return of_term(t_cell(name.text, side, idx), name.span);
                }
                return of_term(t_scalar(name.text, side), name.span);
            }
            case Tok::KwIf: {
                Token tok = take();
                PredPtr cond = parse_pred();
                expect(Tok::KwThen, "in if");
                Operand a = parse_implies();
                expect(Tok::KwElse, "in if");
                Operand b = parse_implies();
                expect(Tok::KwFi, "closing if");
                bool a_pred = a.pred || term_boolish(a.term);
                bool b_pred = b.pred || term_boolish(b.term);
                if (a.pred || b.pred || (a_pred && b_pred))
                    return of_pred(p_if(cond, to_pred(a), to_pred(b)), tok.span);
                return of_term(t_if(cond, to_term(a), to_term(b)), tok.span);
            }
            case Tok::KwForall:
            case Tok::KwExists: {
                bool universal = t.kind == Tok::KwForall;
                Token tok = take();
                Token var = expect(Tok::Ident, "after quantifier");
                Range r = parse_opt_range();  // bounds are outside the new scope
                expect(Tok::Dot, "before quantifier body");
                bound_scope.push_back(var.text);
                PredPtr body = parse_pred();
                bound_scope.pop_back();
                PredPtr q = universal ? p_forall(var.text, r, body)
                                      : p_exists(var.text, r, body);
                return of_pred(q, tok.span);
            }
            case Tok::KwMax: {
                Token tok = take();
                Token var = expect(Tok::Ident, "after 'max'");
                expect(Tok::Colon, "before max range");
                Range r = parse_range();
                bound_scope.push_back(var.text);
                PredPtr guard;
                if (at(Tok::Bar)) {
                    take();
                    guard = parse_pred();
                }
                expect(Tok::Dot, "before max body");
                TermPtr body = to_term(parse_add());
                bound_scope.pop_back();
                return of_term(t_max(var.text, r, guard, body), tok.span);
            }
            case Tok::LParen: {
                take();
                Operand inner = parse_implies();
                expect(Tok::RParen, "closing '('");
                return inner;
            }
            default:
                fail("expected an expression");
        }
    }

    // Optional ": lo..hi" after a quantifier variable.
    Range parse_opt_range() {
        Range r;
        if (!at(Tok::Colon)) return r;
        take();
        return parse_range();
    }

    static bool starts_term(Tok k) {
        switch (k) {
            case Tok::Int:
            case Tok::Ident:
            case Tok::LParen:
            case Tok::Minus:
            case Tok::KwTime:
            case Tok::KwInf:
                return true;
            default:
                return false;
        }
    }

    Range parse_range() {
        Range r;
        if (!at(Tok::DotDot)) r.lo = to_term(parse_add());
        expect(Tok::DotDot, "in range");
        if (starts_term(peek().kind)) r.hi = to_term(parse_add());
        return r;
    }

    // ----- program expressions ------------------------------------------

    ExprPtr parse_expr() { return parse_expr_or(); }

    ExprPtr parse_expr_or() {
        ExprPtr lhs = parse_expr_and();
        while (at(Tok::OrOp)) {
            SourceSpan sp = take().span;
            lhs = mk_binary(BinOp::Or, lhs, parse_expr_and(), sp);
        }
        return lhs;
    }

    ExprPtr parse_expr_and() {
        ExprPtr lhs = parse_expr_not();
        while (at(Tok::AndOp)) {
            SourceSpan sp = take().span;
            lhs = mk_binary(BinOp::And, lhs, parse_expr_not(), sp);
        }
        return lhs;
    }

    ExprPtr parse_expr_not() {
        if (at(Tok::Tilde)) {
            SourceSpan sp = take().span;
            return mk_unary(UnOp::Not, parse_expr_not(), sp);
        }
        return parse_expr_cmp();
    }

    static std::optional<BinOp> expr_cmp_of(Tok k) {
        switch (k) {
            case Tok::Eq: return BinOp::Eq;
            case Tok::Ne: return BinOp::Ne;
            case Tok::Lt: return BinOp::Lt;
            case Tok::Le: return BinOp::Le;
            case Tok::Gt: return BinOp::Gt;
            case Tok::Ge: return BinOp::Ge;
            default: return std::nullopt;
        }
    }

    ExprPtr parse_expr_cmp() {
        ExprPtr lhs = parse_expr_add();
        auto op = expr_cmp_of(peek().kind);
        if (!op) return lhs;
        SourceSpan sp = take().span;
        ExprPtr rhs = parse_expr_add();
        if (expr_cmp_of(peek().kind))
            fail("comparisons do not chain; parenthesize");
        return mk_binary(*op, lhs, rhs, sp);
    }

    ExprPtr parse_expr_add() {
        ExprPtr lhs = parse_expr_mul();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            BinOp op = at(Tok::Plus) ? BinOp::Add : BinOp::Sub;
            SourceSpan sp = take().span;
            lhs = mk_binary(op, lhs, parse_expr_mul(), sp);
        }
        return lhs;
    }

    ExprPtr parse_expr_mul() {
        ExprPtr lhs = parse_expr_unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            BinOp op = at(Tok::Star) ? BinOp::Mul : BinOp::Div;
            SourceSpan sp = take().span;
            lhs = mk_binary(op, lhs, parse_expr_unary(), sp);
        }
        return lhs;
    }

    ExprPtr parse_expr_unary() {
        if (at(Tok::Minus)) {
            SourceSpan sp = take().span;
            return mk_unary(UnOp::Neg, parse_expr_unary(), sp);
        }
        return parse_expr_postfix();
    }

    ExprPtr parse_expr_postfix() {
        ExprPtr base = parse_expr_atom();
        while (at(Tok::Bang)) {
            SourceSpan sp = take().span;
            base = mk_unary(UnOp::Fact, base, sp);
        }
        return base;
    }

    ExprPtr parse_expr_atom() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Int: {
                Token tok = take();
                return mk_int(tok.value, tok.span);
            }
            case Tok::KwTrue: {
                Token tok = take();
                return mk_bool(true, tok.span);
            }
            case Tok::KwFalse: {
                Token tok = take();
                return mk_bool(false, tok.span);
            }
            case Tok::Ident: {
                Token name = take();
                if (at(Tok::Prime))
                    throw Error(ErrorKind::Syntax, "primed variables cannot appear in programs",
                                peek().span);
                if (at(Tok::LParen)) {
                    take();
                    ExprPtr idx = parse_expr();
                    expect(Tok::RParen, "after an array index");
                    return mk_cell(name.text, idx, name.span);
                }
                return mk_var(name.text, name.span);
            }
            case Tok::LParen: {
                take();
                ExprPtr inner = parse_expr();
                expect(Tok::RParen, "closing '('");
                return inner;
            }
            case Tok::KwTime:
                throw Error(ErrorKind::Syntax, "the time variable cannot appear in programs",
                            t.span);
            case Tok::KwNeed:
            case Tok::KwForall:
            case Tok::KwExists:
            case Tok::KwMax:
            case Tok::KwInf:
                throw Error(ErrorKind::Syntax,
                            std::string(tok_name(t.kind)) + " is specification syntax, not program syntax",
                            t.span);
            default:
                fail("expected an expression");
        }
    }

    // ----- statements -----------------------------------------------------

    int obs_counter = 0;

    StmtPtr parse_stmt_seq() {
        StmtPtr first = parse_stmt();
        if (!at(Tok::Semi)) return first;
        SourceSpan sp = take().span;
        StmtPtr rest = parse_stmt_seq();
        return mk_seq(first, rest, sp);
    }

    StmtPtr parse_stmt() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::KwOk: return mk_ok(take().span);
            case Tok::KwStop: return mk_stop(take().span);
            case Tok::KwPrint: {
                Token tok = take();
                ExprPtr arg = parse_expr();
                return mk_print(arg, obs_counter++, tok.span);
            }
            case Tok::KwIf: {
                Token tok = take();
                ExprPtr cond = parse_expr();
                expect(Tok::KwThen, "in if");
                StmtPtr then_branch = parse_stmt_seq();
                StmtPtr else_branch;
                if (at(Tok::KwElse)) {
                    take();
                    else_branch = parse_stmt_seq();
                } else {
                    else_branch = mk_ok(tok.span);
                }
                expect(Tok::KwFi, "closing if");
                return mk_if(cond, then_branch, else_branch, tok.span);
            }
            case Tok::KwWhile: {
                Token tok = take();
                ExprPtr cond = parse_expr();
                expect(Tok::KwSpec, "in while (loops carry 'spec NAME')");
                Token name = expect(Tok::Ident, "after 'spec'");
                expect(Tok::KwDo, "in while");
                StmtPtr body = parse_stmt_seq();
                expect(Tok::KwOd, "closing while");
                return mk_while(cond, body, name.text, tok.span);
            }
            case Tok::Ident: {
                Token name = take();
                Lvalue lv;
                lv.name = name.text;
                lv.span = name.span;
                if (at(Tok::LParen)) {
                    take();
                    lv.index = parse_expr();
                    expect(Tok::RParen, "after an assignment index");
                }
                expect(Tok::Assign, "in assignment");
                ExprPtr rhs = parse_expr();
                return mk_assign(std::move(lv), rhs, name.span);
            }
            case Tok::KwTime:
                throw Error(ErrorKind::Syntax, "the time variable cannot be assigned", t.span);
            default:
                fail("expected a statement");
        }
    }
};

// stop may appear only as the final statement of the whole program.
void check_stop_placement(const StmtPtr& s, bool tail_position) {
    if (auto* q = std::get_if<Stmt::Seq>(&s->node)) {
        check_stop_placement(q->first, false);
        check_stop_placement(q->second, tail_position);
        return;
    }
    if (auto* f = std::get_if<Stmt::If>(&s->node)) {
        check_stop_placement(f->then_branch, false);
        check_stop_placement(f->else_branch, false);
        return;
    }
    if (auto* w = std::get_if<Stmt::While>(&s->node)) {
        check_stop_placement(w->body, false);
        return;
    }
    if (std::holds_alternative<Stmt::Stop>(s->node) && !tail_position)
        throw Error(ErrorKind::Syntax, "stop may only appear as the final statement", s->span);
}

bool ends_with_stop(const StmtPtr& s) {
    if (auto* q = std::get_if<Stmt::Seq>(&s->node)) return ends_with_stop(q->second);
    return std::holds_alternative<Stmt::Stop>(s->node);
}

// ----- pretty printer ------------------------------------------------------

int expr_prec(const Expr& e) {
    if (auto* u = std::get_if<Expr::Unary>(&e.node)) {
        switch (u->op) {
            case UnOp::Not: return 4;
            case UnOp::Neg: return 30;
            case UnOp::Fact: return 40;
        }
    }
    if (auto* b = std::get_if<Expr::Binary>(&e.node)) {
        switch (b->op) {
            case BinOp::Or: return 2;
            case BinOp::And: return 3;
            case BinOp::Eq:
            case BinOp::Ne:
            case BinOp::Lt:
            case BinOp::Le:
            case BinOp::Gt:
            case BinOp::Ge: return 5;
            case BinOp::Add:
            case BinOp::Sub: return 10;
            case BinOp::Mul:
            case BinOp::Div: return 20;
        }
    }
    if (auto* i = std::get_if<Expr::IntLit>(&e.node)) return i->value < 0 ? 30 : 100;
    return 100;
}

const char* binop_text(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Eq: return "=";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "/\\";
        case BinOp::Or: return "\\/";
    }
    return "?";
}

std::string render_expr(const Expr& e, int req);

std::string render_expr_raw(const Expr& e) {
    struct V {
        std::string operator()(const Expr::IntLit& n) const { return std::to_string(n.value); }
        std::string operator()(const Expr::BoolLit& n) const { return n.value ? "true" : "false"; }
        std::string operator()(const Expr::Var& n) const { return n.name; }
        std::string operator()(const Expr::ArrayRef& n) const {
            return n.name + "(" + render_expr(*n.index, 0) + ")";
        }
        std::string operator()(const Expr::Unary& n) const {
            switch (n.op) {
                case UnOp::Neg: return "-" + render_expr(*n.arg, 31);
                case UnOp::Not: return "~ " + render_expr(*n.arg, 4);
                case UnOp::Fact: return render_expr(*n.arg, 41) + "!";
            }
            return "?";
        }
        std::string operator()(const Expr::Binary& n) const {
            int p = expr_prec(Expr{n, {}});
            int lreq = p;
            int rreq = p + 1;
            // And/Or chains read better unparenthesized to the right.
            if (n.op == BinOp::And || n.op == BinOp::Or) {
                lreq = p + 1;
                rreq = p;
            }
            if (n.op == BinOp::Eq || n.op == BinOp::Ne || n.op == BinOp::Lt ||
                n.op == BinOp::Le || n.op == BinOp::Gt || n.op == BinOp::Ge) {
                lreq = p + 1;
                rreq = p + 1;
            }
            std::string lhs = render_expr(*n.lhs, lreq);
            if (!lhs.empty() && lhs.back() == '!' &&
                (n.op == BinOp::Eq || n.op == BinOp::Ne))
                lhs = "(" + lhs + ")";
            return lhs + " " + binop_text(n.op) + " " + render_expr(*n.rhs, rreq);
        }
    };
    return std::visit(V{}, e.node);
}

std::string render_expr(const Expr& e, int req) {
    std::string body = render_expr_raw(e);
    if (expr_prec(e) < req) return "(" + body + ")";
    return body;
}

void render_stmt(const Stmt& s, int indent, std::string& out);

void render_seq(const Stmt& s, int indent, std::string& out) {
    if (auto* q = std::get_if<Stmt::Seq>(&s.node)) {
        render_seq(*q->first, indent, out);
        out += ";\n";
        render_seq(*q->second, indent, out);
        return;
    }
    render_stmt(s, indent, out);
}

void render_stmt(const Stmt& s, int indent, std::string& out) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    struct V {
        int indent;
        std::string& out;
        const std::string& pad;
        void operator()(const Stmt::Ok&) const { out += pad + "ok"; }
        void operator()(const Stmt::Stop&) const { out += pad + "stop"; }
        void operator()(const Stmt::Assign& n) const {
            out += pad + n.target.name;
            if (n.target.index) out += "(" + render_expr(*n.target.index, 0) + ")";
            out += " := " + render_expr(*n.rhs, 0);
        }
        void operator()(const Stmt::Print& n) const {
            out += pad + "print " + render_expr(*n.arg, 0);
        }
        void operator()(const Stmt::If& n) const {
            out += pad + "if " + render_expr(*n.cond, 0) + " then\n";
            render_seq(*n.then_branch, indent + 1, out);
            out += "\n";
            bool skip_else = std::holds_alternative<Stmt::Ok>(n.else_branch->node);
            if (!skip_else) {
                out += pad + "else\n";
                render_seq(*n.else_branch, indent + 1, out);
                out += "\n";
            }
            out += pad + "fi";
        }
        void operator()(const Stmt::While& n) const {
            out += pad + "while " + render_expr(*n.cond, 0) + " spec " + n.spec_name + " do\n";
            render_seq(*n.body, indent + 1, out);
            out += "\n" + pad + "od";
        }
        void operator()(const Stmt::Seq& n) const {
            render_seq(*n.first, indent, out);
            out += ";\n";
            render_seq(*n.second, indent, out);
        }
    };
    std::visit(V{indent, out, pad}, s.node);
}

}  // namespace

ParseResult parse_program(std::string_view src, std::size_t array_bound) {
    Parser p;
    p.toks = lex(src);
    if (p.at(Tok::End)) throw Error(ErrorKind::Syntax, "empty program", p.peek().span);
    StmtPtr program = p.parse_stmt_seq();
    if (!p.at(Tok::End)) p.fail("expected ';' or end of program");
    ParseResult r;
    r.program = std::move(program);
    check_stop_placement(r.program, true);
    if (!ends_with_stop(r.program)) {
        r.program = mk_seq(r.program, mk_stop(), r.program->span);
        r.warnings.push_back("program does not end in stop; appended one");
    }
    r.universe = infer_universe(*r.program, array_bound);
    return r;
}

std::map<std::string, PredPtr> parse_spec(std::string_view src) {
    Parser p;
    p.toks = lex(src);
    std::map<std::string, PredPtr> defs;
    while (!p.at(Tok::End)) {
        Token name = p.expect(Tok::Ident, "starting a definition");
        p.expect(Tok::Eq, "after a definition name");
        PredPtr body = p.parse_pred();
        if (defs.count(name.text))
            throw Error(ErrorKind::Syntax, "duplicate definition of " + name.text, name.span);
        defs.emplace(name.text, std::move(body));
    }
    return defs;
}

PredPtr parse_predicate(std::string_view src) {
    Parser p;
    p.toks = lex(src);
    PredPtr body = p.parse_pred();
    if (!p.at(Tok::End)) p.fail("trailing input after predicate");
    return body;
}

std::string pretty_print(const Stmt& program) {
    std::string out;
    render_seq(program, 0, out);
    out += "\n";
    return out;
}

}  // namespace lazytime
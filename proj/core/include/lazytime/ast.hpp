#pragma once

// Core syntax and value model for the lazytime mini-language: expressions,
// statements, the variable universe, stores, need stores, and extended
// naturals used as execution time.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lazytime {

struct SourceSpan {
    int line = 0;
    int column = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

enum class ErrorKind {
    Syntax,
    Type,
    IndexOutOfRange,
    InexactDivision,
    NegativeFactorial,
    Overflow,
    UnboundVariable,
    UndefinedMax,
    DomainTooLarge,
    UnknownSpecName,
    UniverseMismatch,
    NotLoopFree,
    NonStaticIndex,
    Unsupported,
    Runtime,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}
    Error(ErrorKind kind, std::string message, SourceSpan span)
        : std::runtime_error(std::move(message)), kind_(kind), span_(span) {}

    ErrorKind kind() const { return kind_; }
    const std::optional<SourceSpan>& span() const { return span_; }

  private:
    ErrorKind kind_;
    std::optional<SourceSpan> span_;
};

// Natural numbers extended with infinity. x + inf = inf + x = inf.
class ExtNat {
  public:
    constexpr ExtNat() = default;
    static constexpr ExtNat fin(std::uint64_t n) { return ExtNat(false, n); }
    static constexpr ExtNat inf() { return ExtNat(true, 0); }

    constexpr bool is_inf() const { return inf_; }
    constexpr bool is_fin() const { return !inf_; }
    std::uint64_t finite() const;

    friend constexpr bool operator==(ExtNat a, ExtNat b) {
        return a.inf_ == b.inf_ && (a.inf_ || a.n_ == b.n_);
    }
    friend constexpr bool operator<(ExtNat a, ExtNat b) {
        if (a.inf_) return false;
        if (b.inf_) return true;
        return a.n_ < b.n_;
    }
    friend constexpr bool operator<=(ExtNat a, ExtNat b) { return a == b || a < b; }
    friend constexpr bool operator>(ExtNat a, ExtNat b) { return b < a; }
    friend constexpr bool operator>=(ExtNat a, ExtNat b) { return b <= a; }

  private:
    constexpr ExtNat(bool inf, std::uint64_t n) : inf_(inf), n_(n) {}
    bool inf_ = false;
    std::uint64_t n_ = 0;
};

ExtNat extnat_add(ExtNat a, ExtNat b);
// inf * 0 = 0; inf * n = inf for n > 0.
ExtNat extnat_mul(ExtNat a, ExtNat b);
// a - b for b finite and b <= a (saturating rules: inf - fin = inf). Errors otherwise.
ExtNat extnat_sub(ExtNat a, ExtNat b);
std::string to_string(ExtNat v);

inline ExtNat operator+(ExtNat a, ExtNat b) { return extnat_add(a, b); }

// Overflow-checked signed arithmetic for program and specification values.
long long checked_add(long long a, long long b);
long long checked_sub(long long a, long long b);
long long checked_mul(long long a, long long b);
// Exact division: errors with InexactDivision when the remainder is nonzero.
long long checked_div(long long a, long long b);
// Errors with NegativeFactorial for a < 0 and Overflow for a > 20.
long long checked_factorial(long long a);

// Dynamically typed evaluation result: integer, boolean, or extended-natural time.
struct Value {
    enum class Kind { Int, Bool, Time };
    Kind kind = Kind::Int;
    long long i = 0;
    bool b = false;
    ExtNat t;

    static Value of_int(long long v) { Value r; r.kind = Kind::Int; r.i = v; return r; }
    static Value of_bool(bool v) { Value r; r.kind = Kind::Bool; r.b = v; return r; }
    static Value of_time(ExtNat v) { Value r; r.kind = Kind::Time; r.t = v; return r; }

    long long as_int() const;
    bool as_bool() const;
    ExtNat as_time() const;  // ints >= 0 coerce to finite time
    bool is_numeric() const { return kind != Kind::Bool; }
};

bool value_equal(const Value& a, const Value& b);
std::string to_string(const Value& v);

// ---------------------------------------------------------------------------
// Program expressions
// ---------------------------------------------------------------------------

enum class UnOp { Neg, Not, Fact };
enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    struct IntLit { long long value = 0; };
    struct BoolLit { bool value = false; };
    struct Var { std::string name; };
    struct ArrayRef { std::string name; ExprPtr index; };
    struct Unary { UnOp op; ExprPtr arg; };
    struct Binary { BinOp op; ExprPtr lhs; ExprPtr rhs; };

    std::variant<IntLit, BoolLit, Var, ArrayRef, Unary, Binary> node;
    SourceSpan span;
};

ExprPtr mk_int(long long v, SourceSpan s = {});
ExprPtr mk_bool(bool v, SourceSpan s = {});
ExprPtr mk_var(std::string name, SourceSpan s = {});
ExprPtr mk_cell(std::string name, ExprPtr index, SourceSpan s = {});
ExprPtr mk_unary(UnOp op, ExprPtr a, SourceSpan s = {});
ExprPtr mk_binary(BinOp op, ExprPtr l, ExprPtr r, SourceSpan s = {});

bool expr_equal(const Expr& a, const Expr& b);

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

// Assignment target: scalar when index is null, array cell otherwise.
struct Lvalue {
    std::string name;
    ExprPtr index;
    SourceSpan span;
};

struct Stmt {
    struct Ok {};
    struct Stop {};
    struct Assign { Lvalue target; ExprPtr rhs; };
    struct If { ExprPtr cond; StmtPtr then_branch; StmtPtr else_branch; };
    struct While { ExprPtr cond; StmtPtr body; std::string spec_name; };
    struct Seq { StmtPtr first; StmtPtr second; };
    struct Print { ExprPtr arg; int obs_index = 0; };

    std::variant<Ok, Stop, Assign, If, While, Seq, Print> node;
    SourceSpan span;
};

StmtPtr mk_ok(SourceSpan s = {});
StmtPtr mk_stop(SourceSpan s = {});
StmtPtr mk_assign(Lvalue target, ExprPtr rhs, SourceSpan s = {});
StmtPtr mk_if(ExprPtr cond, StmtPtr t, StmtPtr e, SourceSpan s = {});
StmtPtr mk_while(ExprPtr cond, StmtPtr body, std::string spec_name, SourceSpan s = {});
StmtPtr mk_seq(StmtPtr a, StmtPtr b, SourceSpan s = {});
StmtPtr mk_print(ExprPtr arg, int obs_index, SourceSpan s = {});

bool is_loop_free(const Stmt& s);

// ---------------------------------------------------------------------------
// Universe and stores
// ---------------------------------------------------------------------------

// The ordered variable universe of a program: scalar names, array names,
// the shared array bound N, and the number of print observables.
struct Universe {
    std::vector<std::string> scalars;  // sorted
    std::vector<std::string> arrays;   // sorted
    std::size_t array_bound = 8;
    std::size_t print_count = 0;

    std::optional<std::size_t> scalar_slot(std::string_view name) const;
    std::optional<std::size_t> array_slot(std::string_view name) const;
    bool has_variable(std::string_view name) const;
    std::size_t need_bit_count() const { return scalars.size() + arrays.size() * array_bound; }
    bool same_shape(const Universe& other) const;
};

// Infers the universe of a program: indexed names become arrays, the rest
// scalars. A name used both ways is a type error.
Universe infer_universe(const Stmt& program, std::size_t array_bound = 8);

// A store indexed by universe slots. Arrays hold exactly N cells (the modeled
// prefix of the paper's unbounded arrays).
struct State {
    std::vector<long long> scalars;
    std::vector<std::vector<long long>> arrays;
    ExtNat time;

    static State zeros(const Universe& u);
    long long scalar(std::size_t slot) const { return scalars.at(slot); }
    long long cell(std::size_t slot, long long index, const SourceSpan* where = nullptr) const;
};

State state_of(const Universe& u,
               const std::map<std::string, long long>& scalars,
               const std::map<std::string, std::vector<long long>>& arrays = {},
               ExtNat time = ExtNat::fin(0));

bool state_equal(const State& a, const State& b);

// One need bit per location, shaped exactly like the store.
struct NeedState {
    std::vector<std::uint8_t> scalars;
    std::vector<std::vector<std::uint8_t>> arrays;

    static NeedState all(const Universe& u, bool value);
    bool scalar(std::size_t slot) const { return scalars.at(slot) != 0; }
    bool cell(std::size_t slot, long long index) const;
    void set_scalar(std::size_t slot, bool v) { scalars.at(slot) = v ? 1 : 0; }
    void set_cell(std::size_t slot, long long index, bool v);
};

bool need_equal(const NeedState& a, const NeedState& b);

// ---------------------------------------------------------------------------
// Expression evaluation and reads
// ---------------------------------------------------------------------------

// Evaluates a program expression against a bounded store. Arithmetic is
// overflow-checked, division exact, indices must land in [0, N).
Value eval_expr(const Expr& e, const State& s, const Universe& u);

// The set of locations an expression reads: scalar names plus (array name,
// index expression) pairs. Index expressions of array reads contribute their
// own reads as well.
struct ReadSet {
    std::set<std::string> scalars;
    std::vector<std::pair<std::string, ExprPtr>> cells;  // deduplicated structurally

    bool has_scalar(std::string_view name) const { return scalars.count(std::string(name)) > 0; }
    void add_scalar(std::string name) { scalars.insert(std::move(name)); }
    void add_cell(const std::string& name, const ExprPtr& index);
};

ReadSet reads_of(const Expr& e);

namespace detail {

// Store access concept shared by bounded (State) and growable (exec) stores.
template <typename S>
concept StoreLike = requires(const S s, const std::string& n, long long i, SourceSpan sp) {
    { s.read_scalar(n, sp) } -> std::convertible_to<long long>;
    { s.read_cell(n, i, sp) } -> std::convertible_to<long long>;
};

template <StoreLike S>
Value eval_expr_on(const Expr& e, const S& store) {
    struct V {
        const S& store;
        Value operator()(const Expr::IntLit& n) const { return Value::of_int(n.value); }
        Value operator()(const Expr::BoolLit& n) const { return Value::of_bool(n.value); }
        Value operator()(const Expr::Var& n) const { return Value::of_int(store.read_scalar(n.name, span)); }
        Value operator()(const Expr::ArrayRef& n) const {
            long long idx = eval_expr_on(*n.index, store).as_int();
            return Value::of_int(store.read_cell(n.name, idx, span));
        }
        Value operator()(const Expr::Unary& n) const {
            Value a = eval_expr_on(*n.arg, store);
            switch (n.op) {
                case UnOp::Neg: return Value::of_int(checked_sub(0, a.as_int()));
                case UnOp::Not: return Value::of_bool(!a.as_bool());
                case UnOp::Fact: return Value::of_int(checked_factorial(a.as_int()));
            }
            throw Error(ErrorKind::Runtime, "bad unary op");
        }
        Value operator()(const Expr::Binary& n) const {
            if (n.op == BinOp::And) {
                Value l = eval_expr_on(*n.lhs, store);
                if (!l.as_bool()) return Value::of_bool(false);
                return Value::of_bool(eval_expr_on(*n.rhs, store).as_bool());
            }
            if (n.op == BinOp::Or) {
                Value l = eval_expr_on(*n.lhs, store);
                if (l.as_bool()) return Value::of_bool(true);
                return Value::of_bool(eval_expr_on(*n.rhs, store).as_bool());
            }
            Value l = eval_expr_on(*n.lhs, store);
            Value r = eval_expr_on(*n.rhs, store);
            switch (n.op) {
                case BinOp::Add: return Value::of_int(checked_add(l.as_int(), r.as_int()));
                case BinOp::Sub: return Value::of_int(checked_sub(l.as_int(), r.as_int()));
                case BinOp::Mul: return Value::of_int(checked_mul(l.as_int(), r.as_int()));
                case BinOp::Div: return Value::of_int(checked_div(l.as_int(), r.as_int()));
                case BinOp::Eq: return Value::of_bool(value_equal(l, r));
                case BinOp::Ne: return Value::of_bool(!value_equal(l, r));
                case BinOp::Lt: return Value::of_bool(l.as_int() < r.as_int());
                case BinOp::Le: return Value::of_bool(l.as_int() <= r.as_int());
                case BinOp::Gt: return Value::of_bool(l.as_int() > r.as_int());
                case BinOp::Ge: return Value::of_bool(l.as_int() >= r.as_int());
                default: throw Error(ErrorKind::Runtime, "bad binary op");
            }
        }
        SourceSpan span;
    };
    return std::visit(V{store, e.span}, e.node);
}

}  // namespace detail

}  // namespace lazytime

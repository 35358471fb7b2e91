#include "lazytime/ast.hpp"

#include <algorithm>

namespace lazytime {

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Syntax: return "syntax error";
        case ErrorKind::Type: return "type error";
        case ErrorKind::IndexOutOfRange: return "index out of range";
        case ErrorKind::InexactDivision: return "inexact division";
        case ErrorKind::NegativeFactorial: return "negative factorial";
        case ErrorKind::Overflow: return "arithmetic overflow";
        case ErrorKind::UnboundVariable: return "unbound variable";
        case ErrorKind::UndefinedMax: return "empty max comprehension";
        case ErrorKind::DomainTooLarge: return "domain too large";
        case ErrorKind::UnknownSpecName: return "unknown spec name";
        case ErrorKind::UniverseMismatch: return "universe mismatch";
        case ErrorKind::NotLoopFree: return "statement is not loop-free";
        case ErrorKind::NonStaticIndex: return "array index is not a literal";
        case ErrorKind::Unsupported: return "unsupported construct";
        case ErrorKind::Runtime: return "runtime error";
    }
    return "error";
}

std::uint64_t ExtNat::finite() const {
    if (inf_) throw Error(ErrorKind::Runtime, "finite() on infinite time");
    return n_;
}

ExtNat extnat_add(ExtNat a, ExtNat b) {
    if (a.is_inf() || b.is_inf()) return ExtNat::inf();
    std::uint64_t r = a.finite() + b.finite();
    if (r < a.finite()) throw Error(ErrorKind::Overflow, "time overflow");
    return ExtNat::fin(r);
}

ExtNat extnat_mul(ExtNat a, ExtNat b) {
    auto zero = [](ExtNat v) { return v.is_fin() && v.finite() == 0; };
    if (zero(a) || zero(b)) return ExtNat::fin(0);
    if (a.is_inf() || b.is_inf()) return ExtNat::inf();
    std::uint64_t x = a.finite(), y = b.finite(), r = x * y;
    if (y != 0 && r / y != x) throw Error(ErrorKind::Overflow, "time overflow");
    return ExtNat::fin(r);
}

ExtNat extnat_sub(ExtNat a, ExtNat b) {
    if (b.is_inf()) throw Error(ErrorKind::Runtime, "cannot subtract infinite time");
    if (a.is_inf()) return ExtNat::inf();
    if (a.finite() < b.finite()) throw Error(ErrorKind::Runtime, "negative time");
    return ExtNat::fin(a.finite() - b.finite());
}

std::string to_string(ExtNat v) {
    return v.is_inf() ? "inf" : std::to_string(v.finite());
}

long long checked_add(long long a, long long b) {
    long long r;
    if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "integer overflow in +");
    return r;
}

long long checked_sub(long long a, long long b) {
    long long r;
    if (__builtin_sub_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "integer overflow in -");
    return r;
}

long long checked_mul(long long a, long long b) {
    long long r;
    if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "integer overflow in *");
    return r;
}

long long checked_div(long long a, long long b) {
    if (b == 0) throw Error(ErrorKind::Runtime, "division by zero");
    if (a % b != 0)
        throw Error(ErrorKind::InexactDivision,
                    "inexact division: " + std::to_string(a) + " / " + std::to_string(b));
    return a / b;
}

long long checked_factorial(long long a) {
    if (a < 0) throw Error(ErrorKind::NegativeFactorial, "factorial of " + std::to_string(a));
    if (a > 20) throw Error(ErrorKind::Overflow, "factorial of " + std::to_string(a) + " overflows");
    long long r = 1;
    for (long long k = 2; k <= a; ++k) r *= k;
    return r;
}

long long Value::as_int() const {
    if (kind == Kind::Int) return i;
    if (kind == Kind::Time && t.is_fin()) return static_cast<long long>(t.finite());
    throw Error(ErrorKind::Type, "expected an integer value");
}

bool Value::as_bool() const {
    if (kind != Kind::Bool) throw Error(ErrorKind::Type, "expected a boolean value");
    return b;
}

ExtNat Value::as_time() const {
    if (kind == Kind::Time) return t;
    if (kind == Kind::Int) {
        if (i < 0) throw Error(ErrorKind::Runtime, "negative value used as time");
        return ExtNat::fin(static_cast<std::uint64_t>(i));
    }
    throw Error(ErrorKind::Type, "expected a time value");
}

bool value_equal(const Value& a, const Value& b) {
    if (a.kind == Value::Kind::Bool || b.kind == Value::Kind::Bool) {
        if (a.kind != Value::Kind::Bool || b.kind != Value::Kind::Bool)
            throw Error(ErrorKind::Type, "cannot compare boolean with number");
        return a.b == b.b;
    }
    if (a.kind == Value::Kind::Time || b.kind == Value::Kind::Time)
        return a.as_time() == b.as_time();
    return a.i == b.i;
}

std::string to_string(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Int: return std::to_string(v.i);
        case Value::Kind::Bool: return v.b ? "true" : "false";
        case Value::Kind::Time: return to_string(v.t);
    }
    return "?";
}

// --- expression builders ----------------------------------------------------

ExprPtr mk_int(long long v, SourceSpan s) {
    return std::make_shared<Expr>(Expr{Expr::IntLit{v}, s});
}
ExprPtr mk_bool(bool v, SourceSpan s) {
    return std::make_shared<Expr>(Expr{Expr::BoolLit{v}, s});
}
ExprPtr mk_var(std::string name, SourceSpan s) {
    return std::make_shared<Expr>(Expr{Expr::Var{std::move(name)}, s});
}
ExprPtr mk_cell(std::string name, ExprPtr index, SourceSpan s) {
    return std::make_shared<Expr>(Expr{Expr::ArrayRef{std::move(name), std::move(index)}, s});
}
ExprPtr mk_unary(UnOp op, ExprPtr a, SourceSpan s) {
    return std::make_shared<Expr>(Expr{Expr::Unary{op, std::move(a)}, s});
}
ExprPtr mk_binary(BinOp op, ExprPtr l, ExprPtr r, SourceSpan s) {
    return std::make_shared<Expr>(Expr{Expr::Binary{op, std::move(l), std::move(r)}, s});
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    struct V {
        const Expr& other;
        bool operator()(const Expr::IntLit& n) const { return std::get<Expr::IntLit>(other.node).value == n.value; }
        bool operator()(const Expr::BoolLit& n) const { return std::get<Expr::BoolLit>(other.node).value == n.value; }
        bool operator()(const Expr::Var& n) const { return std::get<Expr::Var>(other.node).name == n.name; }
        bool operator()(const Expr::ArrayRef& n) const {
            const auto& o = std::get<Expr::ArrayRef>(other.node);
            return o.name == n.name && expr_equal(*o.index, *n.index);
        }
        bool operator()(const Expr::Unary& n) const {
            const auto& o = std::get<Expr::Unary>(other.node);
            return o.op == n.op && expr_equal(*o.arg, *n.arg);
        }
        bool operator()(const Expr::Binary& n) const {
            const auto& o = std::get<Expr::Binary>(other.node);
            return o.op == n.op && expr_equal(*o.lhs, *n.lhs) && expr_equal(*o.rhs, *n.rhs);
        }
    };
    return std::visit(V{b}, a.node);
}

// --- statement builders -----------------------------------------------------

StmtPtr mk_ok(SourceSpan s) { return std::make_shared<Stmt>(Stmt{Stmt::Ok{}, s}); }
StmtPtr mk_stop(SourceSpan s) { return std::make_shared<Stmt>(Stmt{Stmt::Stop{}, s}); }
StmtPtr mk_assign(Lvalue target, ExprPtr rhs, SourceSpan s) {
    return std::make_shared<Stmt>(Stmt{Stmt::Assign{std::move(target), std::move(rhs)}, s});
}
StmtPtr mk_if(ExprPtr cond, StmtPtr t, StmtPtr e, SourceSpan s) {
    return std::make_shared<Stmt>(Stmt{Stmt::If{std::move(cond), std::move(t), std::move(e)}, s});
}
StmtPtr mk_while(ExprPtr cond, StmtPtr body, std::string spec_name, SourceSpan s) {
    return std::make_shared<Stmt>(Stmt{Stmt::While{std::move(cond), std::move(body), std::move(spec_name)}, s});
}
StmtPtr mk_seq(StmtPtr a, StmtPtr b, SourceSpan s) {
    return std::make_shared<Stmt>(Stmt{Stmt::Seq{std::move(a), std::move(b)}, s});
}
StmtPtr mk_print(ExprPtr arg, int obs_index, SourceSpan s) {
    return std::make_shared<Stmt>(Stmt{Stmt::Print{std::move(arg), obs_index}, s});
}

bool is_loop_free(const Stmt& s) {
    struct V {
        bool operator()(const Stmt::Ok&) const { return true; }
        bool operator()(const Stmt::Stop&) const { return true; }
        bool operator()(const Stmt::Assign&) const { return true; }
        bool operator()(const Stmt::Print&) const { return true; }
        bool operator()(const Stmt::While&) const { return false; }
        bool operator()(const Stmt::If& n) const {
            return is_loop_free(*n.then_branch) && is_loop_free(*n.else_branch);
        }
        bool operator()(const Stmt::Seq& n) const {
            return is_loop_free(*n.first) && is_loop_free(*n.second);
        }
    };
    return std::visit(V{}, s.node);
}

// --- universe ----------------------------------------------------------------

static std::optional<std::size_t> find_slot(const std::vector<std::string>& v, std::string_view name) {
    auto it = std::lower_bound(v.begin(), v.end(), name);
    if (it != v.end() && *it == name) return static_cast<std::size_t>(it - v.begin());
    return std::nullopt;
}

std::optional<std::size_t> Universe::scalar_slot(std::string_view name) const {
    return find_slot(scalars, name);
}
std::optional<std::size_t> Universe::array_slot(std::string_view name) const {
    return find_slot(arrays, name);
}
bool Universe::has_variable(std::string_view name) const {
    return scalar_slot(name).has_value() || array_slot(name).has_value();
}
bool Universe::same_shape(const Universe& o) const {
    return scalars == o.scalars && arrays == o.arrays && array_bound == o.array_bound;
}

namespace {

void collect_expr_vars(const Expr& e, std::set<std::string>& scalars, std::set<std::string>& arrays) {
    struct V {
        std::set<std::string>& scalars;
        std::set<std::string>& arrays;
        void operator()(const Expr::IntLit&) const {}
        void operator()(const Expr::BoolLit&) const {}
        void operator()(const Expr::Var& n) const { scalars.insert(n.name); }
        void operator()(const Expr::ArrayRef& n) const {
            arrays.insert(n.name);
            collect_expr_vars(*n.index, scalars, arrays);
        }
        void operator()(const Expr::Unary& n) const { collect_expr_vars(*n.arg, scalars, arrays); }
        void operator()(const Expr::Binary& n) const {
            collect_expr_vars(*n.lhs, scalars, arrays);
            collect_expr_vars(*n.rhs, scalars, arrays);
        }
    };
    std::visit(V{scalars, arrays}, e.node);
}

void collect_stmt_vars(const Stmt& s, std::set<std::string>& scalars, std::set<std::string>& arrays,
                       std::size_t& prints) {
    struct V {
        std::set<std::string>& scalars;
        std::set<std::string>& arrays;
        std::size_t& prints;
        void operator()(const Stmt::Ok&) const {}
        void operator()(const Stmt::Stop&) const {}
        void operator()(const Stmt::Assign& n) const {
            if (n.target.index) {
                arrays.insert(n.target.name);
                collect_expr_vars(*n.target.index, scalars, arrays);
            } else {
                scalars.insert(n.target.name);
            }
            collect_expr_vars(*n.rhs, scalars, arrays);
        }
        void operator()(const Stmt::Print& n) const {
            prints += 1;
            collect_expr_vars(*n.arg, scalars, arrays);
        }
        void operator()(const Stmt::If& n) const {
            collect_expr_vars(*n.cond, scalars, arrays);
            collect_stmt_vars(*n.then_branch, scalars, arrays, prints);
            collect_stmt_vars(*n.else_branch, scalars, arrays, prints);
        }
        void operator()(const Stmt::While& n) const {
            collect_expr_vars(*n.cond, scalars, arrays);
            collect_stmt_vars(*n.body, scalars, arrays, prints);
        }
        void operator()(const Stmt::Seq& n) const {
            collect_stmt_vars(*n.first, scalars, arrays, prints);
            collect_stmt_vars(*n.second, scalars, arrays, prints);
        }
    };
    std::visit(V{scalars, arrays, prints}, s.node);
}

}  // namespace

Universe infer_universe(const Stmt& program, std::size_t array_bound) {
    std::set<std::string> scalars, arrays;
    std::size_t prints = 0;
    collect_stmt_vars(program, scalars, arrays, prints);
    for (const auto& name : arrays) {
        if (scalars.count(name))
            throw Error(ErrorKind::Type, "variable '" + name + "' used both as scalar and as array");
    }
    Universe u;
    u.scalars.assign(scalars.begin(), scalars.end());
    u.arrays.assign(arrays.begin(), arrays.end());
    u.array_bound = array_bound;
    u.print_count = prints;
    return u;
}

// --- stores -------------------------------------------------------------------

State State::zeros(const Universe& u) {
    State s;
    s.scalars.assign(u.scalars.size(), 0);
    s.arrays.assign(u.arrays.size(), std::vector<long long>(u.array_bound, 0));
    s.time = ExtNat::fin(0);
    return s;
}

long long State::cell(std::size_t slot, long long index, const SourceSpan* where) const {
    const auto& a = arrays.at(slot);
    if (index < 0 || static_cast<std::size_t>(index) >= a.size()) {
        Error e(ErrorKind::IndexOutOfRange,
                "index " + std::to_string(index) + " outside [0, " + std::to_string(a.size()) + ")");
        if (where) throw Error(e.kind(), e.what(), *where);
        throw e;
    }
    return a[static_cast<std::size_t>(index)];
}

State state_of(const Universe& u,
               const std::map<std::string, long long>& scalars,
               const std::map<std::string, std::vector<long long>>& arrays,
               ExtNat time) {
    State s = State::zeros(u);
    s.time = time;
    for (const auto& [name, v] : scalars) {
        auto slot = u.scalar_slot(name);
        if (!slot) throw Error(ErrorKind::UniverseMismatch, "no scalar named '" + name + "'");
        s.scalars[*slot] = v;
    }
    for (const auto& [name, cells] : arrays) {
        auto slot = u.array_slot(name);
        if (!slot) throw Error(ErrorKind::UniverseMismatch, "no array named '" + name + "'");
        auto& dst = s.arrays[*slot];
        for (std::size_t i = 0; i < dst.size() && i < cells.size(); ++i) dst[i] = cells[i];
    }
    return s;
}

bool state_equal(const State& a, const State& b) {
    return a.scalars == b.scalars && a.arrays == b.arrays && a.time == b.time;
}

NeedState NeedState::all(const Universe& u, bool value) {
    NeedState n;
    n.scalars.assign(u.scalars.size(), value ? 1 : 0);
    n.arrays.assign(u.arrays.size(), std::vector<std::uint8_t>(u.array_bound, value ? 1 : 0));
    return n;
}

bool NeedState::cell(std::size_t slot, long long index) const {
    const auto& a = arrays.at(slot);
    if (index < 0 || static_cast<std::size_t>(index) >= a.size())
        throw Error(ErrorKind::IndexOutOfRange, "need index " + std::to_string(index) + " out of range");
    return a[static_cast<std::size_t>(index)] != 0;
}

void NeedState::set_cell(std::size_t slot, long long index, bool v) {
    auto& a = arrays.at(slot);
    if (index < 0 || static_cast<std::size_t>(index) >= a.size())
        throw Error(ErrorKind::IndexOutOfRange, "need index " + std::to_string(index) + " out of range");
    a[static_cast<std::size_t>(index)] = v ? 1 : 0;
}

bool need_equal(const NeedState& a, const NeedState& b) {
    return a.scalars == b.scalars && a.arrays == b.arrays;
}

// --- evaluation ----------------------------------------------------------------

namespace {

struct BoundedStore {
    const State& state;
    const Universe& universe;

    long long read_scalar(const std::string& name, SourceSpan span) const {
        auto slot = universe.scalar_slot(name);
        if (!slot) throw Error(ErrorKind::UnboundVariable, "unbound scalar '" + name + "'", span);
        return state.scalar(*slot);
    }
    long long read_cell(const std::string& name, long long index, SourceSpan span) const {
        auto slot = universe.array_slot(name);
        if (!slot) throw Error(ErrorKind::UnboundVariable, "unbound array '" + name + "'", span);
        return state.cell(*slot, index, &span);
    }
};

}  // namespace

Value eval_expr(const Expr& e, const State& s, const Universe& u) {
    BoundedStore store{s, u};
    return detail::eval_expr_on(e, store);
}

// --- reads ----------------------------------------------------------------------

void ReadSet::add_cell(const std::string& name, const ExprPtr& index) {
    for (const auto& [n, idx] : cells)
        if (n == name && expr_equal(*idx, *index)) return;
    cells.emplace_back(name, index);
}

namespace {

void collect_reads(const Expr& e, ReadSet& out) {
    struct V {
        ReadSet& out;
        void operator()(const Expr::IntLit&) const {}
        void operator()(const Expr::BoolLit&) const {}
        void operator()(const Expr::Var& n) const { out.add_scalar(n.name); }
        void operator()(const Expr::ArrayRef& n) const {
            out.add_cell(n.name, n.index);
            collect_reads(*n.index, out);
        }
        void operator()(const Expr::Unary& n) const { collect_reads(*n.arg, out); }
        void operator()(const Expr::Binary& n) const {
            collect_reads(*n.lhs, out);
            collect_reads(*n.rhs, out);
        }
    };
    std::visit(V{out}, e.node);
}

}  // namespace

ReadSet reads_of(const Expr& e) {
    ReadSet r;
    collect_reads(e, r);
    return r;
}

}  // namespace lazytime

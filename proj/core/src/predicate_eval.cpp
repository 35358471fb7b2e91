#include <algorithm>

#include "lazytime/predicate.hpp"
#include "predicate_internal.hpp"

namespace lazytime {

// --- builders -----------------------------------------------------------------

namespace {
TermPtr mk_term(Term t) { return std::make_shared<Term>(std::move(t)); }
PredPtr mk_pred(Predicate p) { return std::make_shared<Predicate>(std::move(p)); }
}  // namespace

TermPtr t_int(long long v) { return mk_term({Term::IntLit{v}, {}}); }
TermPtr t_bool(bool v) { return mk_term({Term::BoolLit{v}, {}}); }
TermPtr t_inf() { return mk_term({Term::InfLit{}, {}}); }
TermPtr t_time(Side side) { return mk_term({Term::TimeRef{side}, {}}); }
TermPtr t_scalar(std::string name, Side side, int slot) {
    return mk_term({Term::ScalarRef{std::move(name), slot, side}, {}});
}
TermPtr t_cell(std::string name, Side side, TermPtr index, int slot) {
    return mk_term({Term::CellRef{std::move(name), slot, side, std::move(index)}, {}});
}
TermPtr t_need_scalar(std::string name, Side side, int slot) {
    return mk_term({Term::NeedScalarRef{std::move(name), slot, side}, {}});
}
TermPtr t_need_cell(std::string name, Side side, TermPtr index, int slot) {
    return mk_term({Term::NeedCellRef{std::move(name), slot, side, std::move(index)}, {}});
}
TermPtr t_obs(int index) { return mk_term({Term::ObsRef{index}, {}}); }
TermPtr t_bound(std::string name) { return mk_term({Term::BoundRef{std::move(name)}, {}}); }
TermPtr t_arith(ArithOp op, TermPtr l, TermPtr r) {
    return mk_term({Term::Arith{op, std::move(l), std::move(r)}, {}});
}
TermPtr t_neg(TermPtr a) { return mk_term({Term::Neg{std::move(a)}, {}}); }
TermPtr t_fact(TermPtr a) { return mk_term({Term::Fact{std::move(a)}, {}}); }
TermPtr t_if(PredPtr c, TermPtr t, TermPtr e) {
    return mk_term({Term::IfTerm{std::move(c), std::move(t), std::move(e)}, {}});
}
TermPtr t_max(std::string var, Range range, PredPtr guard, TermPtr body) {
    return mk_term({Term::MaxTerm{std::move(var), std::move(range), std::move(guard), std::move(body)}, {}});
}

PredPtr p_bool_term(TermPtr t) { return mk_pred({Predicate::BoolTerm{std::move(t)}, {}}); }
PredPtr p_true() { return p_bool_term(t_bool(true)); }
PredPtr p_false() { return p_bool_term(t_bool(false)); }
PredPtr p_cmp(CmpOp op, TermPtr l, TermPtr r) {
    return mk_pred({Predicate::Cmp{op, std::move(l), std::move(r)}, {}});
}
PredPtr p_not(PredPtr p) { return mk_pred({Predicate::Not{std::move(p)}, {}}); }
PredPtr p_and(PredPtr l, PredPtr r) { return mk_pred({Predicate::And{std::move(l), std::move(r)}, {}}); }
PredPtr p_or(PredPtr l, PredPtr r) { return mk_pred({Predicate::Or{std::move(l), std::move(r)}, {}}); }
PredPtr p_implies(PredPtr l, PredPtr r) {
    return mk_pred({Predicate::Implies{std::move(l), std::move(r)}, {}});
}
PredPtr p_equiv(PredPtr l, PredPtr r) { return mk_pred({Predicate::Equiv{std::move(l), std::move(r)}, {}}); }
PredPtr p_if(PredPtr c, PredPtr t, PredPtr e) {
    return mk_pred({Predicate::IfFi{std::move(c), std::move(t), std::move(e)}, {}});
}
PredPtr p_forall(std::string var, Range range, PredPtr body) {
    return mk_pred({Predicate::Forall{std::move(var), std::move(range), std::move(body)}, {}});
}
PredPtr p_exists(std::string var, Range range, PredPtr body) {
    return mk_pred({Predicate::Exists{std::move(var), std::move(range), std::move(body)}, {}});
}
PredPtr p_compose(PredPtr a, PredPtr b) {
    return mk_pred({Predicate::Compose{std::move(a), std::move(b)}, {}});
}

PredPtr p_and_all(std::vector<PredPtr> ps) {
    if (ps.empty()) return p_true();
    PredPtr acc = ps.back();
    for (auto it = ps.rbegin() + 1; it != ps.rend(); ++it) acc = p_and(*it, acc);
    return acc;
}

PredPtr p_or_all(std::vector<PredPtr> ps) {
    if (ps.empty()) return p_false();
    PredPtr acc = ps.back();
    for (auto it = ps.rbegin() + 1; it != ps.rend(); ++it) acc = p_or(*it, acc);
    return acc;
}

PredPtr compose(PredPtr a, PredPtr b) { return p_compose(std::move(a), std::move(b)); }

Binding zero_binding(const Universe& u) {
    Binding b;
    b.pre = State::zeros(u);
    b.post = State::zeros(u);
    b.pre_need = NeedState::all(u, false);
    b.post_need = NeedState::all(u, false);
    b.obs.assign(u.print_count, 0);
    return b;
}

// --- generic rewriting ----------------------------------------------------------

namespace detail {

namespace {

struct TermRewriteV {
    const TermPtr& self;
    const TermHook& th;
    const PredHook& ph;

    TermPtr sub(const TermPtr& c) const { return c ? rewrite_term(c, th, ph) : c; }
    PredPtr subp(const PredPtr& c) const { return c ? rewrite_pred(c, th, ph) : c; }

    TermPtr operator()(const Term::CellRef& n) const {
        TermPtr idx = sub(n.index);
        if (idx == n.index) return self;
        return std::make_shared<Term>(Term{Term::CellRef{n.name, n.slot, n.side, idx}, self->span});
    }
    TermPtr operator()(const Term::NeedCellRef& n) const {
        TermPtr idx = sub(n.index);
        if (idx == n.index) return self;
        return std::make_shared<Term>(Term{Term::NeedCellRef{n.name, n.slot, n.side, idx}, self->span});
    }
    TermPtr operator()(const Term::Arith& n) const {
        TermPtr l = sub(n.lhs), r = sub(n.rhs);
        if (l == n.lhs && r == n.rhs) return self;
        return std::make_shared<Term>(Term{Term::Arith{n.op, l, r}, self->span});
    }
    TermPtr operator()(const Term::Neg& n) const {
        TermPtr a = sub(n.arg);
        if (a == n.arg) return self;
        return std::make_shared<Term>(Term{Term::Neg{a}, self->span});
    }
    TermPtr operator()(const Term::Fact& n) const {
        TermPtr a = sub(n.arg);
        if (a == n.arg) return self;
        return std::make_shared<Term>(Term{Term::Fact{a}, self->span});
    }
    TermPtr operator()(const Term::IfTerm& n) const {
        PredPtr c = subp(n.cond);
        TermPtr t1 = sub(n.then_term), t2 = sub(n.else_term);
        if (c == n.cond && t1 == n.then_term && t2 == n.else_term) return self;
        return std::make_shared<Term>(Term{Term::IfTerm{c, t1, t2}, self->span});
    }
    TermPtr operator()(const Term::MaxTerm& n) const {
        Range r{sub(n.range.lo), sub(n.range.hi)};
        PredPtr g = subp(n.guard);
        TermPtr b = sub(n.body);
        if (r.lo == n.range.lo && r.hi == n.range.hi && g == n.guard && b == n.body) return self;
        return std::make_shared<Term>(Term{Term::MaxTerm{n.var, r, g, b}, self->span});
    }
    template <typename Leaf>
    TermPtr operator()(const Leaf&) const { return self; }
};

struct PredRewriteV {
    const PredPtr& self;
    const TermHook& th;
    const PredHook& ph;

    TermPtr sub(const TermPtr& c) const { return c ? rewrite_term(c, th, ph) : c; }
    PredPtr subp(const PredPtr& c) const { return c ? rewrite_pred(c, th, ph) : c; }

    PredPtr operator()(const Predicate::BoolTerm& n) const {
        TermPtr t = sub(n.term);
        if (t == n.term) return self;
        return std::make_shared<Predicate>(Predicate{Predicate::BoolTerm{t}, self->span});
    }
    PredPtr operator()(const Predicate::Cmp& n) const {
        TermPtr l = sub(n.lhs), r = sub(n.rhs);
        if (l == n.lhs && r == n.rhs) return self;
        return std::make_shared<Predicate>(Predicate{Predicate::Cmp{n.op, l, r}, self->span});
    }
    PredPtr operator()(const Predicate::Not& n) const {
        PredPtr a = subp(n.arg);
        if (a == n.arg) return self;
        return std::make_shared<Predicate>(Predicate{Predicate::Not{a}, self->span});
    }
    template <typename Bin>
    PredPtr binary(const Bin& n) const {
        PredPtr l = subp(n.lhs), r = subp(n.rhs);
        if (l == n.lhs && r == n.rhs) return self;
        return std::make_shared<Predicate>(Predicate{Bin{l, r}, self->span});
    }
    PredPtr operator()(const Predicate::And& n) const { return binary(n); }
    PredPtr operator()(const Predicate::Or& n) const { return binary(n); }
    PredPtr operator()(const Predicate::Implies& n) const { return binary(n); }
    PredPtr operator()(const Predicate::Equiv& n) const { return binary(n); }
    PredPtr operator()(const Predicate::IfFi& n) const {
        PredPtr c = subp(n.cond), t = subp(n.then_pred), e = subp(n.else_pred);
        if (c == n.cond && t == n.then_pred && e == n.else_pred) return self;
        return std::make_shared<Predicate>(Predicate{Predicate::IfFi{c, t, e}, self->span});
    }
    template <typename Q>
    PredPtr quant(const Q& n) const {
        Range r{sub(n.range.lo), sub(n.range.hi)};
        PredPtr b = subp(n.body);
        if (r.lo == n.range.lo && r.hi == n.range.hi && b == n.body) return self;
        return std::make_shared<Predicate>(Predicate{Q{n.var, r, b}, self->span});
    }
    PredPtr operator()(const Predicate::Forall& n) const { return quant(n); }
    PredPtr operator()(const Predicate::Exists& n) const { return quant(n); }
    PredPtr operator()(const Predicate::Compose& n) const {
        PredPtr a = subp(n.first), b = subp(n.second);
        if (a == n.first && b == n.second) return self;
        return std::make_shared<Predicate>(Predicate{Predicate::Compose{a, b}, self->span});
    }
};

}  // namespace

TermPtr rewrite_term(const TermPtr& t, const TermHook& th, const PredHook& ph) {
    if (th) {
        if (TermPtr r = th(t)) return r;
    }
    return std::visit(TermRewriteV{t, th, ph}, t->node);
}

PredPtr rewrite_pred(const PredPtr& p, const TermHook& th, const PredHook& ph) {
    if (ph) {
        if (PredPtr r = ph(p)) return r;
    }
    return std::visit(PredRewriteV{p, th, ph}, p->node);
}

namespace {

using TermScan = std::function<bool(const Term&)>;

bool scan_term(const Term& t, const TermScan& hit);
bool scan_pred(const Predicate& p, const TermScan& hit);

struct PredScanV {
    const TermScan& hit;
    bool operator()(const Predicate::BoolTerm& n) const { return scan_term(*n.term, hit); }
    bool operator()(const Predicate::Cmp& n) const {
        return scan_term(*n.lhs, hit) || scan_term(*n.rhs, hit);
    }
    bool operator()(const Predicate::Not& n) const { return scan_pred(*n.arg, hit); }
    bool operator()(const Predicate::And& n) const {
        return scan_pred(*n.lhs, hit) || scan_pred(*n.rhs, hit);
    }
    bool operator()(const Predicate::Or& n) const {
        return scan_pred(*n.lhs, hit) || scan_pred(*n.rhs, hit);
    }
    bool operator()(const Predicate::Implies& n) const {
        return scan_pred(*n.lhs, hit) || scan_pred(*n.rhs, hit);
    }
    bool operator()(const Predicate::Equiv& n) const {
        return scan_pred(*n.lhs, hit) || scan_pred(*n.rhs, hit);
    }
    bool operator()(const Predicate::IfFi& n) const {
        return scan_pred(*n.cond, hit) || scan_pred(*n.then_pred, hit) || scan_pred(*n.else_pred, hit);
    }
    bool operator()(const Predicate::Forall& n) const {
        if (n.range.lo && scan_term(*n.range.lo, hit)) return true;
        if (n.range.hi && scan_term(*n.range.hi, hit)) return true;
        return scan_pred(*n.body, hit);
    }
    bool operator()(const Predicate::Exists& n) const {
        if (n.range.lo && scan_term(*n.range.lo, hit)) return true;
        if (n.range.hi && scan_term(*n.range.hi, hit)) return true;
        return scan_pred(*n.body, hit);
    }
    bool operator()(const Predicate::Compose& n) const {
        return scan_pred(*n.first, hit) || scan_pred(*n.second, hit);
    }
};

struct TermScanV {
    const TermScan& hit;
    bool operator()(const Term::CellRef& n) const { return scan_term(*n.index, hit); }
    bool operator()(const Term::NeedCellRef& n) const { return scan_term(*n.index, hit); }
    bool operator()(const Term::Arith& n) const {
        return scan_term(*n.lhs, hit) || scan_term(*n.rhs, hit);
    }
    bool operator()(const Term::Neg& n) const { return scan_term(*n.arg, hit); }
    bool operator()(const Term::Fact& n) const { return scan_term(*n.arg, hit); }
    bool operator()(const Term::IfTerm& n) const {
        return scan_pred(*n.cond, hit) || scan_term(*n.then_term, hit) || scan_term(*n.else_term, hit);
    }
    bool operator()(const Term::MaxTerm& n) const {
        if (n.range.lo && scan_term(*n.range.lo, hit)) return true;
        if (n.range.hi && scan_term(*n.range.hi, hit)) return true;
        return (n.guard && scan_pred(*n.guard, hit)) || scan_term(*n.body, hit);
    }
    template <typename Leaf>
    bool operator()(const Leaf&) const { return false; }
};

bool scan_pred(const Predicate& p, const TermScan& hit) { return std::visit(PredScanV{hit}, p.node); }

bool scan_term(const Term& t, const TermScan& hit) {
    if (hit(t)) return true;
    return std::visit(TermScanV{hit}, t.node);
}

bool is_side_store_ref(const Term& t, Side side) {
    if (const auto* s = std::get_if<Term::ScalarRef>(&t.node)) return s->side == side;
    if (const auto* c = std::get_if<Term::CellRef>(&t.node)) return c->side == side;
    if (const auto* tm = std::get_if<Term::TimeRef>(&t.node)) return tm->side == side;
    return false;
}

bool is_need_ref(const Term& t) {
    return std::holds_alternative<Term::NeedScalarRef>(t.node) ||
           std::holds_alternative<Term::NeedCellRef>(t.node);
}

}  // namespace

bool term_mentions_side_store(const Term& t, Side side) {
    return scan_term(t, [side](const Term& n) { return is_side_store_ref(n, side); });
}
bool pred_mentions_side_store(const Predicate& p, Side side) {
    return scan_pred(p, [side](const Term& n) { return is_side_store_ref(n, side); });
}
bool term_mentions_needs(const Term& t) {
    return scan_term(t, [](const Term& n) { return is_need_ref(n); });
}
bool pred_mentions_needs(const Predicate& p) {
    return scan_pred(p, [](const Term& n) { return is_need_ref(n); });
}

}  // namespace detail

// --- linking ------------------------------------------------------------------

PredPtr link(const PredPtr& p, const Universe& u) {
    detail::TermHook th;
    th = [&u, &th](const TermPtr& t) -> TermPtr {
        if (const auto* s = std::get_if<Term::ScalarRef>(&t->node)) {
            auto slot = u.scalar_slot(s->name);
            if (!slot) {
                if (u.array_slot(s->name))
                    throw Error(ErrorKind::UniverseMismatch,
                                "'" + s->name + "' is an array and needs an index", t->span);
                throw Error(ErrorKind::UniverseMismatch, "unknown variable '" + s->name + "'", t->span);
            }
            if (s->slot == static_cast<int>(*slot)) return t;
            return std::make_shared<Term>(
                Term{Term::ScalarRef{s->name, static_cast<int>(*slot), s->side}, t->span});
        }
        if (const auto* c = std::get_if<Term::CellRef>(&t->node)) {
            auto slot = u.array_slot(c->name);
            if (!slot)
                throw Error(ErrorKind::UniverseMismatch, "unknown array '" + c->name + "'", t->span);
            TermPtr idx = detail::rewrite_term(c->index, th, nullptr);
            return std::make_shared<Term>(
                Term{Term::CellRef{c->name, static_cast<int>(*slot), c->side, idx}, t->span});
        }
        if (const auto* s = std::get_if<Term::NeedScalarRef>(&t->node)) {
            auto slot = u.scalar_slot(s->name);
            if (!slot)
                throw Error(ErrorKind::UniverseMismatch, "unknown variable '" + s->name + "'", t->span);
            return std::make_shared<Term>(
                Term{Term::NeedScalarRef{s->name, static_cast<int>(*slot), s->side}, t->span});
        }
        if (const auto* c = std::get_if<Term::NeedCellRef>(&t->node)) {
            auto slot = u.array_slot(c->name);
            if (!slot)
                throw Error(ErrorKind::UniverseMismatch, "unknown array '" + c->name + "'", t->span);
            TermPtr idx = detail::rewrite_term(c->index, th, nullptr);
            return std::make_shared<Term>(
                Term{Term::NeedCellRef{c->name, static_cast<int>(*slot), c->side, idx}, t->span});
        }
        if (const auto* o = std::get_if<Term::ObsRef>(&t->node)) {
            if (o->index < 0 || static_cast<std::size_t>(o->index) >= u.print_count)
                throw Error(ErrorKind::UniverseMismatch,
                            "program has no print observable #" + std::to_string(o->index), t->span);
            return t;
        }
        return nullptr;
    };
    return detail::rewrite_pred(p, th, nullptr);
}

// --- evaluation -----------------------------------------------------------------

namespace {

struct EvalCtx {
    const Binding& b;
    const Domain& d;
    IndexEnv env;
};

Value eval_t(const Term& t, EvalCtx& cx);
bool eval_p(const Predicate& p, EvalCtx& cx);

int want_slot(int slot, const std::string& name, const SourceSpan& sp) {
    if (slot < 0)
        throw Error(ErrorKind::UniverseMismatch, "unlinked reference to '" + name + "'", sp);
    return slot;
}

const State& side_state(const Binding& b, Side s) { return s == Side::Pre ? b.pre : b.post; }
const NeedState& side_need(const Binding& b, Side s) {
    return s == Side::Pre ? b.pre_need : b.post_need;
}

// Inclusive range clamped to [0, N); empty when lo > hi after clamping.
std::pair<long long, long long> resolve_range(const Range& r, EvalCtx& cx) {
    long long n = static_cast<long long>(cx.d.array_bound);
    long long lo = 0;
    long long hi = n - 1;
    if (r.lo) lo = eval_t(*r.lo, cx).as_int();
    if (r.hi) hi = eval_t(*r.hi, cx).as_int();
    if (lo < 0) lo = 0;
    if (hi > n - 1) hi = n - 1;
    return {lo, hi};
}

Value arith(ArithOp op, const Value& l, const Value& r, const SourceSpan& sp) {
    if (l.kind == Value::Kind::Bool || r.kind == Value::Kind::Bool)
        throw Error(ErrorKind::Type, "arithmetic on a boolean", sp);
    bool timed = l.kind == Value::Kind::Time || r.kind == Value::Kind::Time;
    if (!timed) {
        switch (op) {
            case ArithOp::Add: return Value::of_int(checked_add(l.i, r.i));
            case ArithOp::Sub: return Value::of_int(checked_sub(l.i, r.i));
            case ArithOp::Mul: return Value::of_int(checked_mul(l.i, r.i));
            case ArithOp::Div: return Value::of_int(checked_div(l.i, r.i));
        }
    }
    ExtNat a = l.as_time(), b = r.as_time();
    switch (op) {
        case ArithOp::Add: return Value::of_time(extnat_add(a, b));
        case ArithOp::Sub: return Value::of_time(extnat_sub(a, b));
        case ArithOp::Mul: return Value::of_time(extnat_mul(a, b));
        case ArithOp::Div:
            if (a.is_inf() || b.is_inf())
                throw Error(ErrorKind::Unsupported, "division with infinite time", sp);
            return Value::of_time(
                ExtNat::fin(static_cast<std::uint64_t>(checked_div(
                    static_cast<long long>(a.finite()), static_cast<long long>(b.finite())))));
    }
    throw Error(ErrorKind::Runtime, "bad arithmetic op", sp);
}

bool compare(CmpOp op, const Value& l, const Value& r, const SourceSpan& sp) {
    if (op == CmpOp::Eq) return value_equal(l, r);
    if (op == CmpOp::Ne) return !value_equal(l, r);
    if (l.kind == Value::Kind::Bool || r.kind == Value::Kind::Bool)
        throw Error(ErrorKind::Type, "ordering comparison on a boolean", sp);
    if (l.kind == Value::Kind::Time || r.kind == Value::Kind::Time) {
        ExtNat a = l.as_time(), b = r.as_time();
        switch (op) {
            case CmpOp::Lt: return a < b;
            case CmpOp::Le: return a <= b;
            case CmpOp::Gt: return a > b;
            case CmpOp::Ge: return a >= b;
            default: break;
        }
    }
    switch (op) {
        case CmpOp::Lt: return l.i < r.i;
        case CmpOp::Le: return l.i <= r.i;
        case CmpOp::Gt: return l.i > r.i;
        case CmpOp::Ge: return l.i >= r.i;
        default: break;
    }
    throw Error(ErrorKind::Runtime, "bad comparison op", sp);
}

Value eval_t(const Term& t, EvalCtx& cx) {
    struct V {
        EvalCtx& cx;
        const SourceSpan& sp;

        Value operator()(const Term::IntLit& n) const { return Value::of_int(n.value); }
        Value operator()(const Term::BoolLit& n) const { return Value::of_bool(n.value); }
        Value operator()(const Term::InfLit&) const { return Value::of_time(ExtNat::inf()); }
        Value operator()(const Term::TimeRef& n) const {
            return Value::of_time(side_state(cx.b, n.side).time);
        }
        Value operator()(const Term::ScalarRef& n) const {
            int slot = want_slot(n.slot, n.name, sp);
            return Value::of_int(side_state(cx.b, n.side).scalar(static_cast<std::size_t>(slot)));
        }
        Value operator()(const Term::CellRef& n) const {
            int slot = want_slot(n.slot, n.name, sp);
            long long idx = eval_t(*n.index, cx).as_int();
            return Value::of_int(side_state(cx.b, n.side).cell(static_cast<std::size_t>(slot), idx, &sp));
        }
        Value operator()(const Term::NeedScalarRef& n) const {
            int slot = want_slot(n.slot, n.name, sp);
            return Value::of_bool(side_need(cx.b, n.side).scalar(static_cast<std::size_t>(slot)));
        }
        Value operator()(const Term::NeedCellRef& n) const {
            int slot = want_slot(n.slot, n.name, sp);
            long long idx = eval_t(*n.index, cx).as_int();
            if (idx < 0 || static_cast<std::size_t>(idx) >=
                               side_need(cx.b, n.side).arrays.at(static_cast<std::size_t>(slot)).size())
                throw Error(ErrorKind::IndexOutOfRange,
                            "need index " + std::to_string(idx) + " out of range", sp);
            return Value::of_bool(side_need(cx.b, n.side).cell(static_cast<std::size_t>(slot), idx));
        }
        Value operator()(const Term::ObsRef& n) const {
            if (n.index < 0 || static_cast<std::size_t>(n.index) >= cx.b.obs.size())
                throw Error(ErrorKind::UniverseMismatch,
                            "binding has no print observable #" + std::to_string(n.index), sp);
            return Value::of_int(cx.b.obs[static_cast<std::size_t>(n.index)]);
        }
        Value operator()(const Term::BoundRef& n) const {
            for (auto it = cx.env.rbegin(); it != cx.env.rend(); ++it)
                if (it->first == n.name) return Value::of_int(it->second);
            throw Error(ErrorKind::UnboundVariable, "unbound index variable '" + n.name + "'", sp);
        }
        Value operator()(const Term::Arith& n) const {
            Value l = eval_t(*n.lhs, cx);
            Value r = eval_t(*n.rhs, cx);
            return arith(n.op, l, r, sp);
        }
        Value operator()(const Term::Neg& n) const {
            return Value::of_int(checked_sub(0, eval_t(*n.arg, cx).as_int()));
        }
        Value operator()(const Term::Fact& n) const {
            return Value::of_int(checked_factorial(eval_t(*n.arg, cx).as_int()));
        }
        Value operator()(const Term::IfTerm& n) const {
            return eval_p(*n.cond, cx) ? eval_t(*n.then_term, cx) : eval_t(*n.else_term, cx);
        }
        Value operator()(const Term::MaxTerm& n) const {
            auto [lo, hi] = resolve_range(n.range, cx);
            std::optional<Value> best;
            for (long long j = lo; j <= hi; ++j) {
                cx.env.emplace_back(n.var, j);
                bool in = !n.guard || eval_p(*n.guard, cx);
                if (in) {
                    Value v = eval_t(*n.body, cx);
                    if (!best) {
                        best = v;
                    } else if (best->kind == Value::Kind::Time || v.kind == Value::Kind::Time) {
                        if (best->as_time() < v.as_time()) best = v;
                    } else if (best->as_int() < v.as_int()) {
                        best = v;
                    }
                }
                cx.env.pop_back();
            }
            if (!best)
                throw Error(ErrorKind::UndefinedMax,
                            "max over '" + n.var + "': no index satisfies the guard", sp);
            return *best;
        }
    };
    return std::visit(V{cx, t.span}, t.node);
}

// Domain and linking faults indicate a malformed query and always propagate;
// everything else is a value-level error a decisive sibling may absorb.
bool fatal_eval_error(ErrorKind k) {
    return k == ErrorKind::DomainTooLarge || k == ErrorKind::UniverseMismatch ||
           k == ErrorKind::UnboundVariable;
}

// Enumerates intermediate (store, needs, time) triples for a Compose node.
// Eval errors at an intermediate mean it is not a witness; they are skipped,
// except domain/linking faults which indicate a malformed query.
bool eval_compose(const Predicate::Compose& n, EvalCtx& cx) {
    const Binding& b = cx.b;
    std::size_t scalar_count = b.pre.scalars.size();
    std::vector<std::size_t> cell_counts;
    std::size_t total_cells = 0;
    for (const auto& arr : b.pre.arrays) {
        cell_counts.push_back(arr.size());
        total_cells += arr.size();
    }
    std::size_t numeric = scalar_count + total_cells;
    std::size_t bits = scalar_count + total_cells;

    // budget check with saturation
    long double est = 1.0L;
    for (std::size_t k = 0; k < numeric; ++k) est *= static_cast<long double>(cx.d.scalar_values.size());
    for (std::size_t k = 0; k < bits; ++k) est *= 2.0L;
    est *= static_cast<long double>(cx.d.time_samples.size());
    if (est > static_cast<long double>(cx.d.compose_budget))
        throw Error(ErrorKind::DomainTooLarge,
                    "composition would enumerate about " + std::to_string(static_cast<double>(est)) +
                        " intermediates; raise compose_budget or use the one-point form");

    Binding mid_a;  // A's view: given pre, chosen post
    mid_a.pre = b.pre;
    mid_a.post = b.pre;  // shape; values overwritten below
    mid_a.pre_need = b.pre_need;
    mid_a.post_need = b.pre_need;  // shape
    mid_a.obs = b.obs;

    Binding mid_b;  // B's view: chosen pre, given post
    mid_b.pre = b.pre;  // shape
    mid_b.post = b.post;
    mid_b.pre_need = b.pre_need;  // shape
    mid_b.post_need = b.post_need;
    mid_b.obs = b.obs;

    std::vector<std::size_t> num_idx(numeric, 0);
    std::vector<std::uint8_t> bit_val(bits, 0);

    auto apply = [&](ExtNat t_mid) {
        // numeric coords: scalars first, then arrays flattened in slot order
        std::size_t k = 0;
        for (std::size_t s = 0; s < scalar_count; ++s, ++k) {
            long long v = cx.d.scalar_values[num_idx[k]];
            mid_a.post.scalars[s] = v;
            mid_b.pre.scalars[s] = v;
        }
        for (std::size_t a = 0; a < cell_counts.size(); ++a)
            for (std::size_t c = 0; c < cell_counts[a]; ++c, ++k) {
                long long v = cx.d.scalar_values[num_idx[k]];
                mid_a.post.arrays[a][c] = v;
                mid_b.pre.arrays[a][c] = v;
            }
        std::size_t m = 0;
        for (std::size_t s = 0; s < scalar_count; ++s, ++m) {
            mid_a.post_need.scalars[s] = bit_val[m];
            mid_b.pre_need.scalars[s] = bit_val[m];
        }
        for (std::size_t a = 0; a < cell_counts.size(); ++a)
            for (std::size_t c = 0; c < cell_counts[a]; ++c, ++m) {
                mid_a.post_need.arrays[a][c] = bit_val[m];
                mid_b.pre_need.arrays[a][c] = bit_val[m];
            }
        mid_a.post.time = t_mid;
        mid_b.pre.time = t_mid;
    };

    auto holds_at = [&](const Predicate& p, const Binding& at) -> bool {
        EvalCtx sub{at, cx.d, cx.env};
        try {
            return eval_p(p, sub);
        } catch (const Error& e) {
            if (fatal_eval_error(e.kind())) throw;
            return false;
        }
    };

    if (numeric > 0 && cx.d.scalar_values.empty()) return false;

    while (true) {
        // enumerate need bits and time samples for the current numeric choice
        while (true) {
            for (ExtNat ts : cx.d.time_samples) {
                apply(ts);
                if (holds_at(*n.first, mid_a) && holds_at(*n.second, mid_b)) return true;
            }
            std::size_t m = 0;
            while (m < bits && bit_val[m] == 1) bit_val[m++] = 0;
            if (m == bits) break;
            bit_val[m] = 1;
        }
        std::size_t k = 0;
        while (k < numeric && num_idx[k] + 1 == cx.d.scalar_values.size()) num_idx[k++] = 0;
        if (k == numeric) break;
        ++num_idx[k];
    }
    return false;
}

bool eval_p(const Predicate& p, EvalCtx& cx) {
    struct V {
        EvalCtx& cx;
        const SourceSpan& sp;

        bool operator()(const Predicate::BoolTerm& n) const { return eval_t(*n.term, cx).as_bool(); }
        bool operator()(const Predicate::Cmp& n) const {
            Value l = eval_t(*n.lhs, cx);
            Value r = eval_t(*n.rhs, cx);
            return compare(n.op, l, r, sp);
        }
        bool operator()(const Predicate::Not& n) const { return !eval_p(*n.arg, cx); }
        // Conjunction and disjunction are symmetric even under value errors: a
        // side that decides the connective on its own absorbs an error in the
        // other. Normalization sorts these nodes, so evaluation must not
        // depend on operand order.
        bool operator()(const Predicate::And& n) const {
            bool lhs;
            try {
                lhs = eval_p(*n.lhs, cx);
            } catch (const Error& e) {
                if (fatal_eval_error(e.kind())) throw;
                if (!eval_p(*n.rhs, cx)) return false;
                throw;
            }
            return lhs && eval_p(*n.rhs, cx);
        }
        bool operator()(const Predicate::Or& n) const {
            bool lhs;
            try {
                lhs = eval_p(*n.lhs, cx);
            } catch (const Error& e) {
                if (fatal_eval_error(e.kind())) throw;
                if (eval_p(*n.rhs, cx)) return true;
                throw;
            }
            return lhs || eval_p(*n.rhs, cx);
        }
        bool operator()(const Predicate::Implies& n) const {
            bool lhs;
            try {
                lhs = eval_p(*n.lhs, cx);
            } catch (const Error& e) {
                if (fatal_eval_error(e.kind())) throw;
                if (eval_p(*n.rhs, cx)) return true;
                throw;
            }
            return !lhs || eval_p(*n.rhs, cx);
        }
        bool operator()(const Predicate::Equiv& n) const {
            return eval_p(*n.lhs, cx) == eval_p(*n.rhs, cx);
        }
        bool operator()(const Predicate::IfFi& n) const {
            return eval_p(*n.cond, cx) ? eval_p(*n.then_pred, cx) : eval_p(*n.else_pred, cx);
        }
        bool operator()(const Predicate::Forall& n) const {
            auto [lo, hi] = resolve_range(n.range, cx);
            for (long long j = lo; j <= hi; ++j) {
                cx.env.emplace_back(n.var, j);
                bool ok = eval_p(*n.body, cx);
                cx.env.pop_back();
                if (!ok) return false;
            }
            return true;
        }
        bool operator()(const Predicate::Exists& n) const {
            auto [lo, hi] = resolve_range(n.range, cx);
            for (long long j = lo; j <= hi; ++j) {
                cx.env.emplace_back(n.var, j);
                bool ok = eval_p(*n.body, cx);
                cx.env.pop_back();
                if (ok) return true;
            }
            return false;
        }
        bool operator()(const Predicate::Compose& n) const { return eval_compose(n, cx); }
    };
    return std::visit(V{cx, p.span}, p.node);
}

}  // namespace

bool eval_pred(const Predicate& p, const Binding& b, const Domain& d) {
    EvalCtx cx{b, d, {}};
    return eval_p(p, cx);
}

Value eval_term(const Term& t, const Binding& b, const Domain& d) {
    EvalCtx cx{b, d, {}};
    return eval_t(t, cx);
}

bool eval_pred_env(const Predicate& p, const Binding& b, const Domain& d, const IndexEnv& env) {
    EvalCtx cx{b, d, env};
    return eval_p(p, cx);
}

Value eval_term_env(const Term& t, const Binding& b, const Domain& d, const IndexEnv& env) {
    EvalCtx cx{b, d, env};
    return eval_t(t, cx);
}

// --- misc ------------------------------------------------------------------------

std::vector<PredPtr> conjuncts_of(const PredPtr& p) {
    std::vector<PredPtr> out;
    std::vector<PredPtr> stack{p};
    while (!stack.empty()) {
        PredPtr cur = stack.back();
        stack.pop_back();
        if (const auto* a = std::get_if<Predicate::And>(&cur->node)) {
            stack.push_back(a->rhs);  // lhs on top so source order is preserved
            stack.push_back(a->lhs);
        } else {
            out.push_back(cur);
        }
    }
    return out;
}

std::vector<long long> int_literals_of(const PredPtr& p) {
    std::vector<long long> out;
    detail::TermHook th = [&out](const TermPtr& t) -> TermPtr {
        if (const auto* n = std::get_if<Term::IntLit>(&t->node)) out.push_back(n->value);
        return nullptr;
    };
    detail::rewrite_pred(p, th, nullptr);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace lazytime

#include "lazytime/annotator.hpp"

#include <algorithm>
#include <functional>
#include <optional>

#include "predicate_internal.hpp"

namespace lazytime {
namespace {

// --- program expression conversion ------------------------------------------------

bool expr_is_boolean(const Expr& e) {
    if (std::holds_alternative<Expr::BoolLit>(e.node)) return true;
    if (const auto* un = std::get_if<Expr::Unary>(&e.node)) return un->op == UnOp::Not;
    if (const auto* bi = std::get_if<Expr::Binary>(&e.node)) {
        switch (bi->op) {
            case BinOp::Eq:
            case BinOp::Ne:
            case BinOp::Lt:
            case BinOp::Le:
            case BinOp::Gt:
            case BinOp::Ge:
            case BinOp::And:
            case BinOp::Or:
                return true;
            default:
                return false;
        }
    }
    return false;
}

TermPtr expr_term(const Expr& e, const Universe& u);

PredPtr expr_pred(const Expr& e, const Universe& u) {
    if (const auto* b = std::get_if<Expr::BoolLit>(&e.node)) return b->value ? p_true() : p_false();
    if (const auto* un = std::get_if<Expr::Unary>(&e.node)) {
        if (un->op == UnOp::Not) return p_not(expr_pred(*un->arg, u));
    }
    if (const auto* bi = std::get_if<Expr::Binary>(&e.node)) {
        switch (bi->op) {
            case BinOp::And: return p_and(expr_pred(*bi->lhs, u), expr_pred(*bi->rhs, u));
            case BinOp::Or: return p_or(expr_pred(*bi->lhs, u), expr_pred(*bi->rhs, u));
            case BinOp::Eq: return p_cmp(CmpOp::Eq, expr_term(*bi->lhs, u), expr_term(*bi->rhs, u));
            case BinOp::Ne: return p_cmp(CmpOp::Ne, expr_term(*bi->lhs, u), expr_term(*bi->rhs, u));
            case BinOp::Lt: return p_cmp(CmpOp::Lt, expr_term(*bi->lhs, u), expr_term(*bi->rhs, u));
            case BinOp::Le: return p_cmp(CmpOp::Le, expr_term(*bi->lhs, u), expr_term(*bi->rhs, u));
            case BinOp::Gt: return p_cmp(CmpOp::Gt, expr_term(*bi->lhs, u), expr_term(*bi->rhs, u));
            case BinOp::Ge: return p_cmp(CmpOp::Ge, expr_term(*bi->lhs, u), expr_term(*bi->rhs, u));
            default: break;
        }
    }
    throw Error(ErrorKind::Type, "expected a boolean expression", e.span);
}

TermPtr expr_term(const Expr& e, const Universe& u) {
    if (expr_is_boolean(e))
        throw Error(ErrorKind::Type, "boolean expression in a value position", e.span);
    struct V {
        const Universe& u;
        const SourceSpan& span;
        TermPtr operator()(const Expr::IntLit& n) const { return t_int(n.value); }
        TermPtr operator()(const Expr::BoolLit&) const {
            throw Error(ErrorKind::Type, "boolean expression in a value position", span);
        }
        TermPtr operator()(const Expr::Var& n) const {
            auto slot = u.scalar_slot(n.name);
            if (!slot) {
                if (u.array_slot(n.name))
                    throw Error(ErrorKind::UniverseMismatch,
                                "'" + n.name + "' is an array and needs an index", span);
                throw Error(ErrorKind::UniverseMismatch, "unknown variable '" + n.name + "'", span);
            }
            return t_scalar(n.name, Side::Pre, static_cast<int>(*slot));
        }
        TermPtr operator()(const Expr::ArrayRef& n) const {
            auto slot = u.array_slot(n.name);
            if (!slot)
                throw Error(ErrorKind::UniverseMismatch, "unknown array '" + n.name + "'", span);
            return t_cell(n.name, Side::Pre, expr_term(*n.index, u), static_cast<int>(*slot));
        }
        TermPtr operator()(const Expr::Unary& n) const {
            switch (n.op) {
                case UnOp::Neg: return t_neg(expr_term(*n.arg, u));
                case UnOp::Fact: return t_fact(expr_term(*n.arg, u));
                case UnOp::Not: break;
            }
            throw Error(ErrorKind::Type, "boolean expression in a value position", span);
        }
        TermPtr operator()(const Expr::Binary& n) const {
            switch (n.op) {
                case BinOp::Add:
                    return t_arith(ArithOp::Add, expr_term(*n.lhs, u), expr_term(*n.rhs, u));
                case BinOp::Sub:
                    return t_arith(ArithOp::Sub, expr_term(*n.lhs, u), expr_term(*n.rhs, u));
                case BinOp::Mul:
                    return t_arith(ArithOp::Mul, expr_term(*n.lhs, u), expr_term(*n.rhs, u));
                case BinOp::Div:
                    return t_arith(ArithOp::Div, expr_term(*n.lhs, u), expr_term(*n.rhs, u));
                default: break;
            }
            throw Error(ErrorKind::Type, "boolean expression in a value position", span);
        }
    };
    return std::visit(V{u, e.span}, e.node);
}

// --- effect forms -----------------------------------------------------------------

// One array write: a(index) := value, fired when guard holds (null = always).
struct ArrayWrite {
    TermPtr index;
    TermPtr value;
    PredPtr guard;
};

// One print observable with the condition under which it happens.
struct ObsForm {
    PredPtr guard;  // null = unconditional
    TermPtr value;  // null = this observable never fires
};

// A loop-free program as simultaneous equations over the initial store:
// final scalar values, ordered array writes, observables, and an additive
// time cost whose conditions reference final (post-side) need variables.
struct EffectForm {
    std::vector<TermPtr> scalars;
    std::vector<std::vector<ArrayWrite>> arrays;
    std::vector<ObsForm> obs;
    TermPtr time;
    bool stopped = false;  // a trailing stop: nothing afterwards demands anything
};

EffectForm identity_form(const Universe& u) {
    EffectForm f;
    f.scalars.reserve(u.scalars.size());
    for (std::size_t s = 0; s < u.scalars.size(); ++s)
        f.scalars.push_back(t_scalar(u.scalars[s], Side::Pre, static_cast<int>(s)));
    f.arrays.resize(u.arrays.size());
    f.obs.resize(u.print_count);
    f.time = t_int(0);
    return f;
}

// Literal or syntactic index comparison; nullopt when undecidable.
std::optional<bool> index_eq(const TermPtr& a, const TermPtr& b) {
    const auto* la = std::get_if<Term::IntLit>(&a->node);
    const auto* lb = std::get_if<Term::IntLit>(&b->node);
    if (la && lb) return la->value == lb->value;
    if (term_equal(*a, *b)) return true;
    return std::nullopt;
}

PredPtr conj(const PredPtr& a, const PredPtr& b) {
    if (!a) return b;
    if (!b) return a;
    return p_and(a, b);
}

// Value of cell idx after the given writes, over the form's initial store.
TermPtr chain_value(const Universe& u, int aslot, const std::vector<ArrayWrite>& writes,
                    const TermPtr& idx) {
    TermPtr acc = t_cell(u.arrays[static_cast<std::size_t>(aslot)], Side::Pre, idx, aslot);
    for (const auto& w : writes) {
        auto eq = index_eq(w.index, idx);
        if (eq && !*eq) continue;
        if (eq && *eq && !w.guard) {
            acc = w.value;
            continue;
        }
        PredPtr cond = (eq && *eq) ? w.guard : conj(w.guard, p_cmp(CmpOp::Eq, idx, w.index));
        acc = t_if(cond, w.value, acc);
    }
    return acc;
}

// Substitutes form A for the initial store of a term/pred, so that refs over
// A's final store become refs over A's initial store.
detail::TermHook store_hook(const EffectForm& a, const Universe& u) {
    // recursive so cell indices are rewritten before chain lookup
    auto hook = std::make_shared<detail::TermHook>();
    *hook = [&a, &u, hook](const TermPtr& t) -> TermPtr {
        if (const auto* s = std::get_if<Term::ScalarRef>(&t->node)) {
            if (s->side != Side::Pre) return t;
            return a.scalars[static_cast<std::size_t>(s->slot)];
        }
        if (const auto* c = std::get_if<Term::CellRef>(&t->node)) {
            if (c->side != Side::Pre) return nullptr;
            TermPtr idx = detail::rewrite_term(c->index, *hook, nullptr);
            return chain_value(u, c->slot, a.arrays[static_cast<std::size_t>(c->slot)], idx);
        }
        return nullptr;
    };
    return [hook](const TermPtr& t) { return (*hook)(t); };
}

// --- the occurrence rule ------------------------------------------------------

// Reads of a term/pred over the initial store: scalar slots plus per-array
// index terms. Need refs are not store reads.
struct Reads {
    std::vector<char> scalars;
    std::vector<std::vector<TermPtr>> cells;
};

void scan_reads_term(const TermPtr& t, Reads& r);

void scan_reads_pred(const PredPtr& p, Reads& r) {
    detail::TermHook th = [&r](const TermPtr& t) -> TermPtr {
        scan_reads_term(t, r);
        return t;  // handled; stop descent (scan recursed already)
    };
    detail::rewrite_pred(p, th, nullptr);
}

void scan_reads_term(const TermPtr& t, Reads& r) {
    if (const auto* s = std::get_if<Term::ScalarRef>(&t->node)) {
        if (s->side == Side::Pre) r.scalars[static_cast<std::size_t>(s->slot)] = 1;
        return;
    }
    if (const auto* c = std::get_if<Term::CellRef>(&t->node)) {
        if (c->side == Side::Pre) {
            auto& lst = r.cells[static_cast<std::size_t>(c->slot)];
            bool seen = false;
            for (const auto& e : lst)
                if (term_equal(*e, *c->index)) seen = true;
            if (!seen) lst.push_back(c->index);
        }
        scan_reads_term(c->index, r);
        return;
    }
    if (const auto* n = std::get_if<Term::NeedCellRef>(&t->node)) {
        scan_reads_term(n->index, r);
        return;
    }
    if (std::holds_alternative<Term::NeedScalarRef>(t->node)) return;
    if (const auto* a = std::get_if<Term::Arith>(&t->node)) {
        scan_reads_term(a->lhs, r);
        scan_reads_term(a->rhs, r);
        return;
    }
    if (const auto* n = std::get_if<Term::Neg>(&t->node)) return scan_reads_term(n->arg, r);
    if (const auto* f = std::get_if<Term::Fact>(&t->node)) return scan_reads_term(f->arg, r);
    if (const auto* i = std::get_if<Term::IfTerm>(&t->node)) {
        scan_reads_pred(i->cond, r);
        scan_reads_term(i->then_term, r);
        scan_reads_term(i->else_term, r);
        return;
    }
    if (const auto* m = std::get_if<Term::MaxTerm>(&t->node)) {
        if (m->range.lo) scan_reads_term(m->range.lo, r);
        if (m->range.hi) scan_reads_term(m->range.hi, r);
        if (m->guard) scan_reads_pred(m->guard, r);
        scan_reads_term(m->body, r);
        return;
    }
}

Reads empty_reads(const Universe& u) {
    Reads r;
    r.scalars.assign(u.scalars.size(), 0);
    r.cells.resize(u.arrays.size());
    return r;
}

// One demand source: the condition under which it fires and what it reads.
struct Consumer {
    PredPtr when;  // null = unconditional demand
    Reads reads;
};

// All demand sources of a form: scalar results, array writes (with write-over
// shadowing), observables. Stop cuts result/write demand but not observables.
std::vector<Consumer> consumers_of(const EffectForm& f, const Universe& u) {
    std::vector<Consumer> out;
    if (!f.stopped) {
        for (std::size_t s = 0; s < f.scalars.size(); ++s) {
            Consumer c{p_bool_term(t_need_scalar(u.scalars[s], Side::Post, static_cast<int>(s))),
                       empty_reads(u)};
            scan_reads_term(f.scalars[s], c.reads);
            out.push_back(std::move(c));
        }
        for (std::size_t a = 0; a < f.arrays.size(); ++a) {
            const auto& ws = f.arrays[a];
            for (std::size_t k = 0; k < ws.size(); ++k) {
                PredPtr demanded = p_bool_term(
                    t_need_cell(u.arrays[a], Side::Post, ws[k].index, static_cast<int>(a)));
                PredPtr when = conj(ws[k].guard, demanded);
                // later writes to the same cell shadow this one
                for (std::size_t k2 = k + 1; k2 < ws.size(); ++k2) {
                    auto eq = index_eq(ws[k2].index, ws[k].index);
                    if (eq && !*eq) continue;
                    PredPtr same = (eq && *eq)
                                       ? (ws[k2].guard ? ws[k2].guard : p_true())
                                       : conj(ws[k2].guard,
                                              p_cmp(CmpOp::Eq, ws[k2].index, ws[k].index));
                    if (eq && *eq && !ws[k2].guard) {
                        when = p_false();  // certainly overwritten
                        break;
                    }
                    when = conj(when, p_not(same));
                }
                if (pred_equal(*when, *p_false())) continue;
                Consumer c{when, empty_reads(u)};
                scan_reads_term(ws[k].index, c.reads);
                scan_reads_term(ws[k].value, c.reads);
                if (ws[k].guard) scan_reads_pred(ws[k].guard, c.reads);
                out.push_back(std::move(c));
            }
        }
    }
    for (const auto& o : f.obs) {
        if (!o.value) continue;
        Consumer c{o.guard, empty_reads(u)};
        scan_reads_term(o.value, c.reads);
        if (o.guard) scan_reads_pred(o.guard, c.reads);
        out.push_back(std::move(c));
    }
    return out;
}

PredPtr pre_need_scalar(const std::vector<Consumer>& cs, int slot) {
    std::vector<PredPtr> parts;
    for (const auto& c : cs)
        if (c.reads.scalars[static_cast<std::size_t>(slot)]) parts.push_back(c.when ? c.when : p_true());
    return p_or_all(parts);
}

PredPtr pre_need_cell(const EffectForm& f, const std::vector<Consumer>& cs, const Universe& u,
                      int aslot, const TermPtr& idx) {
    std::vector<PredPtr> parts;
    // pass-through: no write hits this cell and it is demanded afterwards
    if (!f.stopped) {
        PredPtr pass = p_bool_term(
            t_need_cell(u.arrays[static_cast<std::size_t>(aslot)], Side::Post, idx, aslot));
        bool killed = false;
        std::vector<PredPtr> nots;
        for (const auto& w : f.arrays[static_cast<std::size_t>(aslot)]) {
            auto eq = index_eq(w.index, idx);
            if (eq && !*eq) continue;
            if (eq && *eq && !w.guard) {
                killed = true;
                break;
            }
            PredPtr hits = (eq && *eq) ? w.guard : conj(w.guard, p_cmp(CmpOp::Eq, w.index, idx));
            nots.push_back(p_not(hits));
        }
        if (!killed) {
            for (auto& n : nots) pass = p_and(n, pass);
            parts.push_back(pass);
        }
    }
    // read occurrences at a matching index
    for (const auto& c : cs) {
        for (const auto& fr : c.reads.cells[static_cast<std::size_t>(aslot)]) {
            auto eq = index_eq(fr, idx);
            if (eq && !*eq) continue;
            PredPtr gate = c.when ? c.when : p_true();
            if (!(eq && *eq)) gate = p_and(p_cmp(CmpOp::Eq, fr, idx), gate);
            parts.push_back(gate);
        }
    }
    return p_or_all(parts);
}

// --- composition ---------------------------------------------------------------

EffectForm seq_compose(const Universe& u, const EffectForm& a, const EffectForm& b) {
    detail::TermHook store = store_hook(a, u);
    auto sub_t = [&](const TermPtr& t) { return t ? detail::rewrite_term(t, store, nullptr) : t; };
    auto sub_p = [&](const PredPtr& p) { return p ? detail::rewrite_pred(p, store, nullptr) : p; };

    EffectForm bh;  // b over the composed initial store
    bh.scalars.reserve(b.scalars.size());
    for (const auto& s : b.scalars) bh.scalars.push_back(sub_t(s));
    bh.arrays.resize(b.arrays.size());
    for (std::size_t i = 0; i < b.arrays.size(); ++i)
        for (const auto& w : b.arrays[i])
            bh.arrays[i].push_back({sub_t(w.index), sub_t(w.value), sub_p(w.guard)});
    bh.obs.resize(b.obs.size());
    for (std::size_t i = 0; i < b.obs.size(); ++i)
        if (b.obs[i].value) bh.obs[i] = {sub_p(b.obs[i].guard), sub_t(b.obs[i].value)};
    bh.time = sub_t(b.time);
    bh.stopped = b.stopped;

    // a's costs fire on intermediate demand: what b reads of its own initial
    // store. Collect those reads before substitution (folding a's literal
    // effects into b can erase them), then rewrite the conditions and read
    // indices into the composed initial store so all index terms compare in
    // one space.
    auto cs = consumers_of(b, u);
    for (auto& c : cs) {
        c.when = sub_p(c.when);
        for (auto& frs : c.reads.cells)
            for (auto& fr : frs) fr = sub_t(fr);
    }
    detail::PredHook needs = [&](const PredPtr& p) -> PredPtr {
        const auto* bt = std::get_if<Predicate::BoolTerm>(&p->node);
        if (!bt) return nullptr;
        if (const auto* ns = std::get_if<Term::NeedScalarRef>(&bt->term->node)) {
            if (ns->side == Side::Post) return pre_need_scalar(cs, ns->slot);
            return nullptr;
        }
        if (const auto* nc = std::get_if<Term::NeedCellRef>(&bt->term->node)) {
            if (nc->side == Side::Post) return pre_need_cell(bh, cs, u, nc->slot, nc->index);
            return nullptr;
        }
        return nullptr;
    };
    TermPtr a_time = detail::rewrite_term(a.time, nullptr, needs);

    EffectForm out;
    out.scalars = std::move(bh.scalars);
    out.arrays.resize(u.arrays.size());
    for (std::size_t i = 0; i < u.arrays.size(); ++i) {
        out.arrays[i] = a.arrays[i];
        for (auto& w : bh.arrays[i]) out.arrays[i].push_back(std::move(w));
    }
    out.obs.resize(u.print_count);
    for (std::size_t i = 0; i < u.print_count; ++i) {
        if (a.obs[i].value && bh.obs[i].value)
            throw Error(ErrorKind::Runtime, "print observable defined twice");
        out.obs[i] = a.obs[i].value ? a.obs[i] : bh.obs[i];
    }
    out.time = t_arith(ArithOp::Add, a_time, bh.time);
    out.stopped = bh.stopped;
    return out;
}

EffectForm merge_if(const Universe& u, const PredPtr& c, const EffectForm& a, const EffectForm& b) {
    EffectForm out;
    out.scalars.reserve(u.scalars.size());
    for (std::size_t s = 0; s < u.scalars.size(); ++s) {
        if (term_equal(*a.scalars[s], *b.scalars[s]))
            out.scalars.push_back(a.scalars[s]);
        else
            out.scalars.push_back(t_if(c, a.scalars[s], b.scalars[s]));
    }
    PredPtr nc = p_not(c);
    out.arrays.resize(u.arrays.size());
    for (std::size_t i = 0; i < u.arrays.size(); ++i) {
        for (const auto& w : a.arrays[i]) out.arrays[i].push_back({w.index, w.value, conj(c, w.guard)});
        for (const auto& w : b.arrays[i]) out.arrays[i].push_back({w.index, w.value, conj(nc, w.guard)});
    }
    out.obs.resize(u.print_count);
    for (std::size_t i = 0; i < u.print_count; ++i) {
        if (a.obs[i].value)
            out.obs[i] = {conj(c, a.obs[i].guard), a.obs[i].value};
        else if (b.obs[i].value)
            out.obs[i] = {conj(nc, b.obs[i].guard), b.obs[i].value};
    }
    out.time = t_if(c, a.time, b.time);
    return out;
}

EffectForm build_form(const StmtPtr& s, const Universe& u, bool lazy) {
    struct V {
        const StmtPtr& self;
        const Universe& u;
        bool lazy;
        EffectForm operator()(const Stmt::Ok&) const { return identity_form(u); }
        EffectForm operator()(const Stmt::Stop&) const {
            EffectForm f = identity_form(u);
            f.stopped = true;
            return f;
        }
        EffectForm operator()(const Stmt::Assign& n) const {
            EffectForm f = identity_form(u);
            if (!n.target.index) {
                auto slot = u.scalar_slot(n.target.name);
                if (!slot)
                    throw Error(ErrorKind::UniverseMismatch,
                                "unknown variable '" + n.target.name + "'", n.target.span);
                f.scalars[*slot] = expr_term(*n.rhs, u);
                f.time = lazy ? t_if(p_bool_term(t_need_scalar(n.target.name, Side::Post,
                                                               static_cast<int>(*slot))),
                                     t_int(1), t_int(0))
                              : t_int(1);
                return f;
            }
            auto slot = u.array_slot(n.target.name);
            if (!slot)
                throw Error(ErrorKind::UniverseMismatch, "unknown array '" + n.target.name + "'",
                            n.target.span);
            TermPtr idx = expr_term(*n.target.index, u);
            f.arrays[*slot].push_back({idx, expr_term(*n.rhs, u), nullptr});
            f.time = lazy ? t_if(p_bool_term(t_need_cell(n.target.name, Side::Post, idx,
                                                         static_cast<int>(*slot))),
                                 t_int(1), t_int(0))
                          : t_int(1);
            return f;
        }
        EffectForm operator()(const Stmt::Print& n) const {
            EffectForm f = identity_form(u);
            f.obs[static_cast<std::size_t>(n.obs_index)] = {nullptr, expr_term(*n.arg, u)};
            f.time = t_int(1);
            return f;
        }
        EffectForm operator()(const Stmt::If& n) const {
            return merge_if(u, expr_pred(*n.cond, u), build_form(n.then_branch, u, lazy),
                            build_form(n.else_branch, u, lazy));
        }
        EffectForm operator()(const Stmt::Seq& n) const {
            return seq_compose(u, build_form(n.first, u, lazy), build_form(n.second, u, lazy));
        }
        EffectForm operator()(const Stmt::While&) const {
            throw Error(ErrorKind::NotLoopFree, "loop in a loop-free context", self->span);
        }
    };
    return std::visit(V{s, u, lazy}, s->node);
}

// --- emission -------------------------------------------------------------------

// Picks an index variable name not used by the program.
std::string fresh_bound(const Universe& u) {
    for (const char* cand : {"j", "k", "m", "jj"}) {
        if (!u.has_variable(cand)) return cand;
    }
    return "j_";
}

PredPtr emit_need(const TermPtr& ref, const PredPtr& rhs) {
    if (std::holds_alternative<Predicate::BoolTerm>(rhs->node)) {
        const auto& bt = std::get<Predicate::BoolTerm>(rhs->node);
        if (const auto* b = std::get_if<Term::BoolLit>(&bt.term->node)) {
            if (!b->value) return p_not(p_bool_term(ref));
            return p_bool_term(ref);
        }
    }
    return p_equiv(p_bool_term(ref), rhs);
}

bool all_literal_writes(const std::vector<ArrayWrite>& ws) {
    for (const auto& w : ws)
        if (!std::holds_alternative<Term::IntLit>(w.index->node)) return false;
    return true;
}

PredPtr emit_pred(const EffectForm& f, const Universe& u, bool lazy) {
    std::vector<PredPtr> cj;
    std::string jv = fresh_bound(u);

    for (std::size_t s = 0; s < u.scalars.size(); ++s)
        cj.push_back(p_cmp(CmpOp::Eq, t_scalar(u.scalars[s], Side::Post, static_cast<int>(s)),
                           f.scalars[s]));

    for (std::size_t a = 0; a < u.arrays.size(); ++a) {
        const auto& name = u.arrays[a];
        const auto& ws = f.arrays[a];
        int slot = static_cast<int>(a);
        auto post_at = [&](const TermPtr& i) { return t_cell(name, Side::Post, i, slot); };
        auto pre_at = [&](const TermPtr& i) { return t_cell(name, Side::Pre, i, slot); };
        if (ws.empty()) {
            TermPtr j = t_bound(jv);
            cj.push_back(p_forall(jv, Range{}, p_cmp(CmpOp::Eq, post_at(j), pre_at(j))));
        } else if (all_literal_writes(ws) && u.array_bound <= 2) {
            for (std::size_t m = 0; m < u.array_bound; ++m) {
                TermPtr mi = t_int(static_cast<long long>(m));
                cj.push_back(p_cmp(CmpOp::Eq, post_at(mi), chain_value(u, slot, ws, mi)));
            }
        } else if (ws.size() == 1 && !ws[0].guard) {
            TermPtr j = t_bound(jv);
            cj.push_back(p_cmp(CmpOp::Eq, post_at(ws[0].index), ws[0].value));
            cj.push_back(p_forall(jv, Range{},
                                  p_implies(p_cmp(CmpOp::Ne, j, ws[0].index),
                                            p_cmp(CmpOp::Eq, post_at(j), pre_at(j)))));
        } else {
            TermPtr j = t_bound(jv);
            cj.push_back(
                p_forall(jv, Range{}, p_cmp(CmpOp::Eq, post_at(j), chain_value(u, slot, ws, j))));
        }
    }

    for (std::size_t k = 0; k < u.print_count; ++k) {
        if (!f.obs[k].value) continue;
        PredPtr eq = p_cmp(CmpOp::Eq, t_obs(static_cast<int>(k)), f.obs[k].value);
        cj.push_back(f.obs[k].guard ? p_implies(f.obs[k].guard, eq) : eq);
    }

    cj.push_back(p_cmp(CmpOp::Eq, t_time(Side::Post), t_arith(ArithOp::Add, t_time(Side::Pre), f.time)));

    if (lazy) {
        auto cs = consumers_of(f, u);
        for (std::size_t s = 0; s < u.scalars.size(); ++s)
            cj.push_back(emit_need(t_need_scalar(u.scalars[s], Side::Pre, static_cast<int>(s)),
                                   pre_need_scalar(cs, static_cast<int>(s))));
        for (std::size_t a = 0; a < u.arrays.size(); ++a) {
            const auto& name = u.arrays[a];
            const auto& ws = f.arrays[a];
            int slot = static_cast<int>(a);
            auto need_pre = [&](const TermPtr& i) { return t_need_cell(name, Side::Pre, i, slot); };
            auto need_post = [&](const TermPtr& i) { return t_need_cell(name, Side::Post, i, slot); };
            // distinct read indices of this array across all consumers
            std::vector<TermPtr> read_idx;
            for (const auto& c : cs)
                for (const auto& fr : c.reads.cells[a]) {
                    bool seen = false;
                    for (const auto& e : read_idx)
                        if (term_equal(*e, *fr)) seen = true;
                    if (!seen) read_idx.push_back(fr);
                }
            bool literal_ok = all_literal_writes(ws) && u.array_bound <= 2;
            for (const auto& fr : read_idx)
                if (!std::holds_alternative<Term::IntLit>(fr->node)) literal_ok = false;
            if (literal_ok) {
                for (std::size_t m = 0; m < u.array_bound; ++m) {
                    TermPtr mi = t_int(static_cast<long long>(m));
                    cj.push_back(emit_need(need_pre(mi), pre_need_cell(f, cs, u, slot, mi)));
                }
            } else if (ws.size() == 1 && !ws[0].guard && !f.stopped) {
                // written cell, read cells, and a frame over everything else
                TermPtr j = t_bound(jv);
                PredPtr guard = p_cmp(CmpOp::Ne, j, ws[0].index);
                for (const auto& fr : read_idx)
                    guard = p_and(guard, p_cmp(CmpOp::Ne, j, fr));
                cj.push_back(p_forall(jv, Range{},
                                      p_implies(guard, p_equiv(p_bool_term(need_pre(j)),
                                                               p_bool_term(need_post(j))))));
                cj.push_back(
                    emit_need(need_pre(ws[0].index), pre_need_cell(f, cs, u, slot, ws[0].index)));
                for (const auto& fr : read_idx) {
                    if (term_equal(*fr, *ws[0].index)) continue;
                    cj.push_back(emit_need(need_pre(fr), pre_need_cell(f, cs, u, slot, fr)));
                }
            } else {
                TermPtr j = t_bound(jv);
                cj.push_back(p_forall(
                    jv, Range{},
                    emit_need(need_pre(j), pre_need_cell(f, cs, u, slot, j))));
            }
        }
    }
    return p_and_all(cj);
}

}  // namespace

// --- public API -----------------------------------------------------------------

namespace {

PredPtr annotate_rec(const StmtPtr& s, const std::map<std::string, PredPtr>& specs,
                     const Universe& u, bool lazy, std::vector<RefinementObligation>& obls) {
    if (is_loop_free(*s)) return emit_pred(build_form(s, u, lazy), u, lazy);
    if (const auto* q = std::get_if<Stmt::Seq>(&s->node)) {
        PredPtr a = annotate_rec(q->first, specs, u, lazy, obls);
        PredPtr b = annotate_rec(q->second, specs, u, lazy, obls);
        return p_compose(a, b);
    }
    if (const auto* w = std::get_if<Stmt::While>(&s->node)) {
        auto it = specs.find(w->spec_name);
        if (it == specs.end())
            throw Error(ErrorKind::UnknownSpecName, "no spec named '" + w->spec_name + "'",
                        s->span);
        PredPtr spec = link(it->second, u);
        PredPtr body = annotate_rec(w->body, specs, u, lazy, obls);
        PredPtr rhs = flatten(p_compose(body, spec), u);
        obls.push_back({w->spec_name, spec, rhs});
        return spec;
    }
    if (const auto* f = std::get_if<Stmt::If>(&s->node)) {
        PredPtr c = expr_pred(*f->cond, u);
        PredPtr a = annotate_rec(f->then_branch, specs, u, lazy, obls);
        PredPtr b = annotate_rec(f->else_branch, specs, u, lazy, obls);
        return p_if(c, a, b);
    }
    // remaining node kinds are loop-free and handled above
    throw Error(ErrorKind::Runtime, "unexpected statement shape", s->span);
}

Annotation annotate_with(const StmtPtr& program, const std::map<std::string, PredPtr>& specs,
                         const Universe& u, bool lazy) {
    Annotation a;
    a.pred = flatten(annotate_rec(program, specs, u, lazy, a.obligations), u);
    return a;
}

}  // namespace

Annotation annotate(const StmtPtr& program, const std::map<std::string, PredPtr>& specs,
                    const Universe& u) {
    return annotate_with(program, specs, u, true);
}

Annotation annotate_eager(const StmtPtr& program, const std::map<std::string, PredPtr>& specs,
                          const Universe& u) {
    return annotate_with(program, specs, u, false);
}

// --- syntactic needs ---------------------------------------------------------------

namespace {

long long literal_index(const Expr& e) {
    if (const auto* i = std::get_if<Expr::IntLit>(&e.node)) return i->value;
    if (const auto* n = std::get_if<Expr::Unary>(&e.node)) {
        if (n->op == UnOp::Neg)
            if (const auto* i = std::get_if<Expr::IntLit>(&n->arg->node)) return -i->value;
    }
    throw Error(ErrorKind::NonStaticIndex, "array index is not a constant", e.span);
}

void add_reads(const Expr& e, const Universe& u, NeedState& live) {
    ReadSet r = reads_of(e);
    for (const auto& name : r.scalars) {
        auto slot = u.scalar_slot(name);
        if (slot) live.set_scalar(*slot, true);
    }
    for (const auto& [name, idx] : r.cells) {
        auto slot = u.array_slot(name);
        if (!slot) continue;
        long long i = literal_index(*idx);
        if (i < 0 || static_cast<std::size_t>(i) >= u.array_bound)
            throw Error(ErrorKind::IndexOutOfRange,
                        "constant index " + std::to_string(i) + " is outside the array bound",
                        idx->span);
        live.set_cell(*slot, static_cast<std::size_t>(i), true);
    }
}

NeedState backward(const StmtPtr& s, const Universe& u, NeedState live) {
    struct V {
        const Universe& u;
        NeedState live;
        NeedState operator()(const Stmt::Ok&) { return live; }
        NeedState operator()(const Stmt::Stop&) {
            NeedState dead = live;
            for (std::size_t i = 0; i < u.scalars.size(); ++i) dead.set_scalar(i, false);
            for (std::size_t a = 0; a < u.arrays.size(); ++a)
                for (std::size_t i = 0; i < u.array_bound; ++i) dead.set_cell(a, i, false);
            return dead;
        }
        NeedState operator()(const Stmt::Assign& n) {
            bool demanded;
            if (!n.target.index) {
                auto slot = u.scalar_slot(n.target.name);
                if (!slot)
                    throw Error(ErrorKind::UniverseMismatch,
                                "unknown variable '" + n.target.name + "'", n.target.span);
                demanded = live.scalar(*slot);
                if (demanded) live.set_scalar(*slot, false);
            } else {
                auto slot = u.array_slot(n.target.name);
                if (!slot)
                    throw Error(ErrorKind::UniverseMismatch,
                                "unknown array '" + n.target.name + "'", n.target.span);
                long long i = literal_index(*n.target.index);
                if (i < 0 || static_cast<std::size_t>(i) >= u.array_bound)
                    throw Error(ErrorKind::IndexOutOfRange,
                                "constant index " + std::to_string(i) +
                                    " is outside the array bound",
                                n.target.span);
                demanded = live.cell(*slot, static_cast<std::size_t>(i));
                if (demanded) live.set_cell(*slot, static_cast<std::size_t>(i), false);
            }
            if (demanded) add_reads(*n.rhs, u, live);
            return live;
        }
        NeedState operator()(const Stmt::Print& n) {
            add_reads(*n.arg, u, live);
            return live;
        }
        NeedState operator()(const Stmt::If& n) {
            NeedState a = backward(n.then_branch, u, live);
            NeedState b = backward(n.else_branch, u, live);
            NeedState joined = a;
            for (std::size_t i = 0; i < u.scalars.size(); ++i)
                joined.set_scalar(i, a.scalar(i) || b.scalar(i));
            for (std::size_t ar = 0; ar < u.arrays.size(); ++ar)
                for (std::size_t i = 0; i < u.array_bound; ++i)
                    joined.set_cell(ar, i, a.cell(ar, i) || b.cell(ar, i));
            add_reads(*n.cond, u, joined);
            return joined;
        }
        NeedState operator()(const Stmt::Seq& n) {
            return backward(n.first, u, backward(n.second, u, live));
        }
        NeedState operator()(const Stmt::While&) {
            throw Error(ErrorKind::NotLoopFree, "syntactic needs are defined for loop-free programs");
        }
    };
    return std::visit(V{u, std::move(live)}, s->node);
}

}  // namespace

NeedState syntactic_needs(const StmtPtr& program, const Universe& u, const NeedState& post_need) {
    if (!is_loop_free(*program))
        throw Error(ErrorKind::NotLoopFree, "syntactic needs are defined for loop-free programs");
    bool shaped = post_need.scalars.size() == u.scalars.size() &&
                  post_need.arrays.size() == u.arrays.size();
    for (const auto& a : post_need.arrays)
        if (a.size() != u.array_bound) shaped = false;
    if (!shaped)
        throw Error(ErrorKind::UniverseMismatch, "need vector does not match the universe");
    return backward(program, u, post_need);
}

}  // namespace lazytime
#include <algorithm>

#include "lazytime/predicate.hpp"
#include "predicate_internal.hpp"

// Definition extraction from annotation-shaped conjunctions, and the one-point
// elimination of the intermediate (store, needs, time) of a composition:
// needs resolve backward through the second operand's need equations, the
// intermediate store resolves forward from the first operand's result
// equations (or backward through the second's identity frames), and the
// intermediate time is the first operand's timing with its need references
// already resolved.

namespace lazytime {

// --- bound-variable substitution -------------------------------------------------

TermPtr subst_bound(const TermPtr& t, const std::string& var, const TermPtr& replacement) {
    detail::TermHook th;
    th = [&var, &replacement, &th](const TermPtr& n) -> TermPtr {
        if (const auto* b = std::get_if<Term::BoundRef>(&n->node)) {
            if (b->name == var) return replacement;
            return nullptr;
        }
        if (const auto* m = std::get_if<Term::MaxTerm>(&n->node)) {
            if (m->var == var) {
                // shadowed: only the range is in the outer scope
                Range r{m->range.lo ? detail::rewrite_term(m->range.lo, th, nullptr) : nullptr,
                        m->range.hi ? detail::rewrite_term(m->range.hi, th, nullptr) : nullptr};
                return t_max(m->var, r, m->guard, m->body);
            }
        }
        return nullptr;
    };
    detail::PredHook ph;
    ph = [&var, &th, &ph](const PredPtr& p) -> PredPtr {
        const auto* fa = std::get_if<Predicate::Forall>(&p->node);
        const auto* ex = std::get_if<Predicate::Exists>(&p->node);
        const std::string* qvar = fa ? &fa->var : ex ? &ex->var : nullptr;
        if (qvar && *qvar == var) {
            const Range& range = fa ? fa->range : ex->range;
            const PredPtr& body = fa ? fa->body : ex->body;
            Range r{range.lo ? detail::rewrite_term(range.lo, th, ph) : nullptr,
                    range.hi ? detail::rewrite_term(range.hi, th, ph) : nullptr};
            return fa ? p_forall(*qvar, r, body) : p_exists(*qvar, r, body);
        }
        return nullptr;
    };
    return detail::rewrite_term(t, th, ph);
}

PredPtr subst_bound(const PredPtr& p, const std::string& var, const TermPtr& replacement) {
    detail::TermHook th;
    detail::PredHook ph;
    th = [&var, &replacement, &th](const TermPtr& n) -> TermPtr {
        if (const auto* b = std::get_if<Term::BoundRef>(&n->node)) {
            if (b->name == var) return replacement;
            return nullptr;
        }
        if (const auto* m = std::get_if<Term::MaxTerm>(&n->node)) {
            if (m->var == var) {
                Range r{m->range.lo ? detail::rewrite_term(m->range.lo, th, nullptr) : nullptr,
                        m->range.hi ? detail::rewrite_term(m->range.hi, th, nullptr) : nullptr};
                return t_max(m->var, r, m->guard, m->body);
            }
        }
        return nullptr;
    };
    ph = [&var, &th, &ph](const PredPtr& q) -> PredPtr {
        const auto* fa = std::get_if<Predicate::Forall>(&q->node);
        const auto* ex = std::get_if<Predicate::Exists>(&q->node);
        const std::string* qvar = fa ? &fa->var : ex ? &ex->var : nullptr;
        if (qvar && *qvar == var) {
            const Range& range = fa ? fa->range : ex->range;
            const PredPtr& body = fa ? fa->body : ex->body;
            Range r{range.lo ? detail::rewrite_term(range.lo, th, ph) : nullptr,
                    range.hi ? detail::rewrite_term(range.hi, th, ph) : nullptr};
            return fa ? p_forall(*qvar, r, body) : p_exists(*qvar, r, body);
        }
        return nullptr;
    };
    return detail::rewrite_pred(p, th, ph);
}

// --- conjunct classification -----------------------------------------------------

namespace {

enum class DefKind {
    Other,
    PostScalar,      // x' = T
    PostCellPoint,   // a'(E) = T
    PostCellForall,  // forall j . [guard =>] a'(j) = T
    PostTime,        // t' = T
    Obs,             // print#k = T
    NeedScalar,      // need v = P | ~need v | need v
    NeedCellPoint,   // same, for a cell
    NeedCellForall,  // forall j . [guard =>] need-cell form
};

struct Classified {
    DefKind kind = DefKind::Other;
    int slot = -1;
    int obs_index = -1;
    TermPtr rhs;       // store/time/obs value
    PredPtr bool_rhs;  // need value
    CellCase cell;     // for array cases
};

const Term::NeedScalarRef* as_pre_need_scalar(const TermPtr& t) {
    const auto* n = std::get_if<Term::NeedScalarRef>(&t->node);
    return (n && n->side == Side::Pre) ? n : nullptr;
}

const Term::NeedCellRef* as_pre_need_cell(const TermPtr& t) {
    const auto* n = std::get_if<Term::NeedCellRef>(&t->node);
    return (n && n->side == Side::Pre) ? n : nullptr;
}

bool is_bound_var(const TermPtr& t, const std::string& var) {
    const auto* b = std::get_if<Term::BoundRef>(&t->node);
    return b && b->name == var;
}

// need-atom forms inside a (possibly guarded) quantifier body or at top level
bool match_need_form(const PredPtr& p, const std::string& quant_var, Classified& out) {
    // need v = P
    if (const auto* eq = std::get_if<Predicate::Equiv>(&p->node)) {
        if (const auto* bt = std::get_if<Predicate::BoolTerm>(&eq->lhs->node)) {
            if (const auto* ns = as_pre_need_scalar(bt->term)) {
                if (!quant_var.empty()) return false;
                out.kind = DefKind::NeedScalar;
                out.slot = ns->slot;
                out.bool_rhs = eq->rhs;
                return true;
            }
            if (const auto* nc = as_pre_need_cell(bt->term)) {
                out.bool_rhs = eq->rhs;
                out.slot = nc->slot;
                if (quant_var.empty()) {
                    out.kind = DefKind::NeedCellPoint;
                    out.cell.point_index = nc->index;
                } else {
                    if (!is_bound_var(nc->index, quant_var)) return false;
                    out.kind = DefKind::NeedCellForall;
                }
                out.cell.bool_value = eq->rhs;
                return true;
            }
        }
        return false;
    }
    // ~need v
    if (const auto* nt = std::get_if<Predicate::Not>(&p->node)) {
        if (const auto* bt = std::get_if<Predicate::BoolTerm>(&nt->arg->node)) {
            if (const auto* ns = as_pre_need_scalar(bt->term)) {
                if (!quant_var.empty()) return false;
                out.kind = DefKind::NeedScalar;
                out.slot = ns->slot;
                out.bool_rhs = p_false();
                return true;
            }
            if (const auto* nc = as_pre_need_cell(bt->term)) {
                out.bool_rhs = p_false();
                out.slot = nc->slot;
                if (quant_var.empty()) {
                    out.kind = DefKind::NeedCellPoint;
                    out.cell.point_index = nc->index;
                } else {
                    if (!is_bound_var(nc->index, quant_var)) return false;
                    out.kind = DefKind::NeedCellForall;
                }
                out.cell.bool_value = p_false();
                return true;
            }
        }
        return false;
    }
    // bare need v
    if (const auto* bt = std::get_if<Predicate::BoolTerm>(&p->node)) {
        if (const auto* ns = as_pre_need_scalar(bt->term)) {
            if (!quant_var.empty()) return false;
            out.kind = DefKind::NeedScalar;
            out.slot = ns->slot;
            out.bool_rhs = p_true();
            return true;
        }
        if (const auto* nc = as_pre_need_cell(bt->term)) {
            out.bool_rhs = p_true();
            out.slot = nc->slot;
            if (quant_var.empty()) {
                out.kind = DefKind::NeedCellPoint;
                out.cell.point_index = nc->index;
            } else {
                if (!is_bound_var(nc->index, quant_var)) return false;
                out.kind = DefKind::NeedCellForall;
            }
            out.cell.bool_value = p_true();
            return true;
        }
    }
    return false;
}

bool match_eq_form(const PredPtr& p, const std::string& quant_var, Classified& out) {
    const auto* cmp = std::get_if<Predicate::Cmp>(&p->node);
    if (!cmp || cmp->op != CmpOp::Eq) return false;
    if (const auto* sr = std::get_if<Term::ScalarRef>(&cmp->lhs->node)) {
        if (sr->side != Side::Post || !quant_var.empty()) return false;
        out.kind = DefKind::PostScalar;
        out.slot = sr->slot;
        out.rhs = cmp->rhs;
        return true;
    }
    if (const auto* cr = std::get_if<Term::CellRef>(&cmp->lhs->node)) {
        if (cr->side != Side::Post) return false;
        out.slot = cr->slot;
        out.rhs = cmp->rhs;
        out.cell.value = cmp->rhs;
        if (quant_var.empty()) {
            out.kind = DefKind::PostCellPoint;
            out.cell.point_index = cr->index;
        } else {
            if (!is_bound_var(cr->index, quant_var)) return false;
            out.kind = DefKind::PostCellForall;
        }
        return true;
    }
    if (const auto* tr = std::get_if<Term::TimeRef>(&cmp->lhs->node)) {
        if (tr->side != Side::Post || !quant_var.empty()) return false;
        out.kind = DefKind::PostTime;
        out.rhs = cmp->rhs;
        return true;
    }
    if (const auto* obs = std::get_if<Term::ObsRef>(&cmp->lhs->node)) {
        if (!quant_var.empty()) return false;
        out.kind = DefKind::Obs;
        out.obs_index = obs->index;
        out.rhs = cmp->rhs;
        return true;
    }
    return false;
}

Classified classify(const PredPtr& c) {
    Classified out;
    if (match_eq_form(c, "", out)) return out;
    if (match_need_form(c, "", out)) return out;
    if (const auto* fa = std::get_if<Predicate::Forall>(&c->node)) {
        PredPtr body = fa->body;
        PredPtr guard;
        if (const auto* imp = std::get_if<Predicate::Implies>(&body->node)) {
            guard = imp->lhs;
            body = imp->rhs;
        }
        Classified inner;
        if (match_eq_form(body, fa->var, inner) || match_need_form(body, fa->var, inner)) {
            inner.cell.range = fa->range;
            inner.cell.bound_var = fa->var;
            inner.cell.guard = guard;
            return inner;
        }
    }
    return out;
}

// --- range coverage proof --------------------------------------------------------

// index expressions linear in at most one unprimed scalar: coeff*pivot + c
struct Lin {
    int coeff = 0;
    long long c = 0;
};

struct LinCtx {
    std::string pivot;  // empty until one is seen
    bool ok = true;
};

std::optional<Lin> lin_of(const TermPtr& t, LinCtx& cx) {
    if (const auto* n = std::get_if<Term::IntLit>(&t->node)) return Lin{0, n->value};
    if (const auto* s = std::get_if<Term::ScalarRef>(&t->node)) {
        if (s->side != Side::Pre) return std::nullopt;
        if (cx.pivot.empty()) cx.pivot = s->name;
        if (cx.pivot != s->name) return std::nullopt;
        return Lin{1, 0};
    }
    if (const auto* a = std::get_if<Term::Arith>(&t->node)) {
        if (a->op == ArithOp::Add) {
            LinCtx save = cx;
            auto l = lin_of(a->lhs, cx);
            auto r = lin_of(a->rhs, cx);
            if (l && r && l->coeff + r->coeff <= 1) return Lin{l->coeff + r->coeff, l->c + r->c};
            cx = save;
            return std::nullopt;
        }
        if (a->op == ArithOp::Sub) {
            auto l = lin_of(a->lhs, cx);
            if (!l) return std::nullopt;
            if (const auto* rv = std::get_if<Term::IntLit>(&a->rhs->node))
                return Lin{l->coeff, l->c - rv->value};
            return std::nullopt;
        }
    }
    if (const auto* n = std::get_if<Term::Neg>(&t->node)) {
        if (const auto* v = std::get_if<Term::IntLit>(&n->arg->node)) return Lin{0, -v->value};
    }
    return std::nullopt;
}

struct CovPiece {
    bool point = false;
    Lin lo, hi;                       // for ranges (defaults applied)
    Lin at;                           // for points
    std::vector<Lin> excluded;        // range minus these indices
};

// Proves that the cases cover every index in [0, N). All endpoints must be
// linear in one shared unprimed scalar; coverage is then checked numerically
// across every ordering regime of that pivot.
bool cases_cover(const std::vector<CellCase>& cases, std::size_t array_bound) {
    long long n = static_cast<long long>(array_bound);
    if (n <= 0) return true;
    LinCtx cx;
    std::vector<CovPiece> pieces;
    long long max_c = 0;
    auto note = [&max_c](const Lin& l) {
        long long a = l.c < 0 ? -l.c : l.c;
        if (a > max_c) max_c = a;
    };
    for (const auto& cc : cases) {
        CovPiece piece;
        if (cc.point_index) {
            auto at = lin_of(cc.point_index, cx);
            if (!at) return false;
            if (cc.guard) continue;  // guarded points add nothing provable
            piece.point = true;
            piece.at = *at;
            note(*at);
        } else {
            auto lo = cc.range.lo ? lin_of(cc.range.lo, cx) : std::optional<Lin>(Lin{0, 0});
            auto hi = cc.range.hi ? lin_of(cc.range.hi, cx) : std::optional<Lin>(Lin{0, n - 1});
            if (!lo || !hi) return false;
            piece.lo = *lo;
            piece.hi = *hi;
            note(*lo);
            note(*hi);
            if (cc.guard) {
                // only conjunctions of "j != E" guards participate in coverage
                std::vector<PredPtr> parts{cc.guard};
                bool usable = true;
                while (!parts.empty()) {
                    PredPtr g = parts.back();
                    parts.pop_back();
                    if (const auto* a = std::get_if<Predicate::And>(&g->node)) {
                        parts.push_back(a->lhs);
                        parts.push_back(a->rhs);
                        continue;
                    }
                    const auto* cmp = std::get_if<Predicate::Cmp>(&g->node);
                    if (!cmp || cmp->op != CmpOp::Ne || !is_bound_var(cmp->lhs, cc.bound_var)) {
                        usable = false;
                        break;
                    }
                    auto ex = lin_of(cmp->rhs, cx);
                    if (!ex) return false;
                    piece.excluded.push_back(*ex);
                    note(*ex);
                }
                if (!usable) continue;
            }
        }
        pieces.push_back(piece);
    }
    if (pieces.empty()) return false;

    auto value = [](const Lin& l, long long v) { return l.coeff * v + l.c; };
    long long window = n + max_c + 2;
    std::vector<bool> covered(static_cast<std::size_t>(n));
    for (long long v = -window; v <= window; ++v) {
        std::fill(covered.begin(), covered.end(), false);
        for (const auto& piece : pieces) {
            if (piece.point) {
                long long at = value(piece.at, v);
                if (at >= 0 && at < n) covered[static_cast<std::size_t>(at)] = true;
            } else {
                long long lo = std::max<long long>(value(piece.lo, v), 0);
                long long hi = std::min<long long>(value(piece.hi, v), n - 1);
                for (long long j = lo; j <= hi; ++j) {
                    bool cut = false;
                    for (const auto& ex : piece.excluded)
                        if (value(ex, v) == j) cut = true;
                    if (!cut) covered[static_cast<std::size_t>(j)] = true;
                }
            }
        }
        for (bool c : covered)
            if (!c) return false;
    }
    return true;
}

}  // namespace

// --- extraction -------------------------------------------------------------------

Definitions extract_definitions(const std::vector<PredPtr>& conjuncts, const Universe& u) {
    Definitions d;
    d.post_scalar.resize(u.scalars.size());
    d.post_array.resize(u.arrays.size());
    d.pre_need_scalar.resize(u.scalars.size());
    d.pre_need_array.resize(u.arrays.size());
    d.obs.resize(u.print_count);
    d.consumed.assign(conjuncts.size(), false);

    for (std::size_t i = 0; i < conjuncts.size(); ++i) {
        Classified c = classify(conjuncts[i]);
        auto slot_ok = [&](std::size_t count) {
            return c.slot >= 0 && static_cast<std::size_t>(c.slot) < count;
        };
        switch (c.kind) {
            case DefKind::PostScalar:
                if (slot_ok(u.scalars.size()) && !d.post_scalar[c.slot]) {
                    d.post_scalar[c.slot] = c.rhs;
                    d.consumed[i] = true;
                }
                break;
            case DefKind::PostCellPoint:
            case DefKind::PostCellForall:
                if (slot_ok(u.arrays.size())) {
                    d.post_array[c.slot].cases.push_back(c.cell);
                    d.consumed[i] = true;
                }
                break;
            case DefKind::PostTime:
                if (!d.post_time) {
                    d.post_time = c.rhs;
                    d.consumed[i] = true;
                }
                break;
            case DefKind::Obs:
                if (c.obs_index >= 0 && static_cast<std::size_t>(c.obs_index) < u.print_count &&
                    !d.obs[c.obs_index]) {
                    d.obs[c.obs_index] = c.rhs;
                    d.consumed[i] = true;
                }
                break;
            case DefKind::NeedScalar:
                if (slot_ok(u.scalars.size()) && !d.pre_need_scalar[c.slot]) {
                    d.pre_need_scalar[c.slot] = c.bool_rhs;
                    d.consumed[i] = true;
                }
                break;
            case DefKind::NeedCellPoint:
            case DefKind::NeedCellForall:
                if (slot_ok(u.arrays.size())) {
                    d.pre_need_array[c.slot].cases.push_back(c.cell);
                    d.consumed[i] = true;
                }
                break;
            case DefKind::Other:
                break;
        }
    }
    for (auto& def : d.post_array) def.complete = cases_cover(def.cases, u.array_bound);
    for (auto& def : d.pre_need_array) def.complete = cases_cover(def.cases, u.array_bound);
    return d;
}

// --- case evaluation ---------------------------------------------------------------

namespace {

// first case applying to the index; env carries the case's bound variable
template <typename F>
auto first_applicable(const ArrayDef& def, long long index, const Binding& b, const Domain& d,
                      F&& eval_case) -> decltype(eval_case(std::declval<const CellCase&>(), IndexEnv{})) {
    long long n = static_cast<long long>(d.array_bound);
    for (const auto& cc : def.cases) {
        if (cc.point_index) {
            long long at = eval_term(*cc.point_index, b, d).as_int();
            if (at != index) continue;
            IndexEnv env;
            if (!cc.bound_var.empty()) env.emplace_back(cc.bound_var, index);
            if (cc.guard && !eval_pred_env(*cc.guard, b, d, env)) continue;
            return eval_case(cc, env);
        }
        long long lo = cc.range.lo ? eval_term(*cc.range.lo, b, d).as_int() : 0;
        long long hi = cc.range.hi ? eval_term(*cc.range.hi, b, d).as_int() : n - 1;
        lo = std::max<long long>(lo, 0);
        hi = std::min<long long>(hi, n - 1);
        if (index < lo || index > hi) continue;
        IndexEnv env;
        if (!cc.bound_var.empty()) env.emplace_back(cc.bound_var, index);
        if (cc.guard && !eval_pred_env(*cc.guard, b, d, env)) continue;
        return eval_case(cc, env);
    }
    return std::nullopt;
}

}  // namespace

std::optional<Value> array_def_value_at(const ArrayDef& def, long long index, const Binding& b,
                                        const Domain& d) {
    return first_applicable(def, index, b, d,
                            [&](const CellCase& cc, const IndexEnv& env) -> std::optional<Value> {
                                if (!cc.value) return std::nullopt;
                                return eval_term_env(*cc.value, b, d, env);
                            });
}

std::optional<bool> array_def_bool_value_at(const ArrayDef& def, long long index, const Binding& b,
                                            const Domain& d) {
    return first_applicable(def, index, b, d,
                            [&](const CellCase& cc, const IndexEnv& env) -> std::optional<bool> {
                                if (!cc.bool_value) return std::nullopt;
                                return eval_pred_env(*cc.bool_value, b, d, env);
                            });
}

// --- one-point composition ----------------------------------------------------------

namespace {

struct Unresolvable {};

// if-chains over an ArrayDef's cases, instantiated at a symbolic index
TermPtr cell_chain_term(const ArrayDef& def, const TermPtr& idx) {
    TermPtr out = t_int(0);  // unreachable when the cases are complete
    for (auto it = def.cases.rbegin(); it != def.cases.rend(); ++it) {
        const CellCase& cc = *it;
        if (!cc.value) throw Unresolvable{};
        std::vector<PredPtr> conds;
        TermPtr val = cc.value;
        if (cc.point_index) {
            conds.push_back(p_cmp(CmpOp::Eq, idx, cc.point_index));
            if (!cc.bound_var.empty()) val = subst_bound(val, cc.bound_var, idx);
            if (cc.guard) {
                PredPtr g = cc.bound_var.empty() ? cc.guard : subst_bound(cc.guard, cc.bound_var, idx);
                conds.push_back(g);
            }
        } else {
            if (cc.range.lo) conds.push_back(p_cmp(CmpOp::Le, cc.range.lo, idx));
            if (cc.range.hi) conds.push_back(p_cmp(CmpOp::Le, idx, cc.range.hi));
            if (cc.guard) conds.push_back(subst_bound(cc.guard, cc.bound_var, idx));
            val = subst_bound(val, cc.bound_var, idx);
        }
        out = t_if(p_and_all(std::move(conds)), val, out);
    }
    return out;
}

PredPtr cell_chain_pred(const ArrayDef& def, const TermPtr& idx) {
    PredPtr out = p_false();  // unreachable when the cases are complete
    for (auto it = def.cases.rbegin(); it != def.cases.rend(); ++it) {
        const CellCase& cc = *it;
        if (!cc.bool_value) throw Unresolvable{};
        std::vector<PredPtr> conds;
        PredPtr val = cc.bool_value;
        if (cc.point_index) {
            conds.push_back(p_cmp(CmpOp::Eq, idx, cc.point_index));
            if (!cc.bound_var.empty()) val = subst_bound(val, cc.bound_var, idx);
            if (cc.guard) {
                PredPtr g = cc.bound_var.empty() ? cc.guard : subst_bound(cc.guard, cc.bound_var, idx);
                conds.push_back(g);
            }
        } else {
            if (cc.range.lo) conds.push_back(p_cmp(CmpOp::Le, cc.range.lo, idx));
            if (cc.range.hi) conds.push_back(p_cmp(CmpOp::Le, idx, cc.range.hi));
            if (cc.guard) conds.push_back(subst_bound(cc.guard, cc.bound_var, idx));
            val = subst_bound(val, cc.bound_var, idx);
        }
        out = p_if(p_and_all(std::move(conds)), val, out);
    }
    return out;
}

// substitution forms for one side's store/time/need references
struct SideForms {
    Side side = Side::Pre;  // which side of the conjuncts gets replaced
    std::vector<TermPtr> scalar;                  // by slot; null = unresolved
    std::vector<std::optional<ArrayDef>> array;   // forward defs (complete)
    std::vector<bool> array_backward;             // a(E) -> a'(E)
    std::vector<bool> scalar_backward;            // x -> x'
    TermPtr time;                                 // null = unresolved
    std::vector<PredPtr> need_scalar;             // resolved need predicates
    std::vector<std::optional<ArrayDef>> need_array;
};

bool term_is_need_ref(const Term& t, Side side) {
    if (const auto* s = std::get_if<Term::NeedScalarRef>(&t.node)) return s->side == side;
    if (const auto* c = std::get_if<Term::NeedCellRef>(&t.node)) return c->side == side;
    return false;
}

PredPtr apply_forms(const PredPtr& p, const SideForms& f);
TermPtr apply_forms_term(const TermPtr& t, const SideForms& f);

std::pair<detail::TermHook, detail::PredHook> make_hooks(const SideForms& f) {
    detail::TermHook th = [&f](const TermPtr& t) -> TermPtr {
        if (const auto* s = std::get_if<Term::ScalarRef>(&t->node)) {
            if (s->side != f.side) return nullptr;
            std::size_t slot = static_cast<std::size_t>(s->slot);
            if (s->slot < 0 || slot >= f.scalar.size()) throw Unresolvable{};
            if (f.scalar[slot]) return f.scalar[slot];
            if (f.scalar_backward[slot])
                return t_scalar(s->name, Side::Post, s->slot);
            throw Unresolvable{};
        }
        if (const auto* c = std::get_if<Term::CellRef>(&t->node)) {
            if (c->side != f.side) return nullptr;
            std::size_t slot = static_cast<std::size_t>(c->slot);
            if (c->slot < 0 || slot >= f.array.size()) throw Unresolvable{};
            TermPtr idx = apply_forms_term(c->index, f);
            if (f.array[slot]) return cell_chain_term(*f.array[slot], idx);
            if (f.array_backward[slot]) return t_cell(c->name, Side::Post, idx, c->slot);
            throw Unresolvable{};
        }
        if (const auto* tr = std::get_if<Term::TimeRef>(&t->node)) {
            if (tr->side != f.side) return nullptr;
            if (!f.time) throw Unresolvable{};
            return f.time;
        }
        // a need reference in a raw term position cannot take a predicate form
        if (term_is_need_ref(*t, f.side)) throw Unresolvable{};
        return nullptr;
    };
    detail::PredHook ph = [&f](const PredPtr& p) -> PredPtr {
        const auto* bt = std::get_if<Predicate::BoolTerm>(&p->node);
        if (!bt) return nullptr;
        if (const auto* s = std::get_if<Term::NeedScalarRef>(&bt->term->node)) {
            if (s->side != f.side) return nullptr;
            std::size_t slot = static_cast<std::size_t>(s->slot);
            if (s->slot < 0 || slot >= f.need_scalar.size() || !f.need_scalar[slot])
                throw Unresolvable{};
            return f.need_scalar[slot];
        }
        if (const auto* c = std::get_if<Term::NeedCellRef>(&bt->term->node)) {
            if (c->side != f.side) return nullptr;
            std::size_t slot = static_cast<std::size_t>(c->slot);
            if (c->slot < 0 || slot >= f.need_array.size() || !f.need_array[slot])
                throw Unresolvable{};
            TermPtr idx = apply_forms_term(c->index, f);
            return cell_chain_pred(*f.need_array[slot], idx);
        }
        return nullptr;
    };
    return {std::move(th), std::move(ph)};
}

PredPtr apply_forms(const PredPtr& p, const SideForms& f) {
    auto [th, ph] = make_hooks(f);
    return detail::rewrite_pred(p, th, ph);
}

TermPtr apply_forms_term(const TermPtr& t, const SideForms& f) {
    auto [th, ph] = make_hooks(f);
    return detail::rewrite_term(t, th, ph);
}

bool rhs_mentions_post(const TermPtr& t) {
    return detail::term_mentions_side_store(*t, Side::Post) || detail::term_mentions_needs(*t);
}

bool case_mentions_post(const CellCase& cc) {
    if (cc.point_index && rhs_mentions_post(cc.point_index)) return true;
    if (cc.range.lo && rhs_mentions_post(cc.range.lo)) return true;
    if (cc.range.hi && rhs_mentions_post(cc.range.hi)) return true;
    if (cc.guard &&
        (detail::pred_mentions_side_store(*cc.guard, Side::Post) || detail::pred_mentions_needs(*cc.guard)))
        return true;
    if (cc.value && rhs_mentions_post(cc.value)) return true;
    return false;
}

// exactly  x' = x  (the identity frame usable backward)
bool is_identity_scalar_frame(const Classified& c, const PredPtr& conj) {
    if (c.kind != DefKind::PostScalar) return false;
    const auto* cmp = std::get_if<Predicate::Cmp>(&conj->node);
    const auto* lhs = std::get_if<Term::ScalarRef>(&cmp->lhs->node);
    const auto* rhs = std::get_if<Term::ScalarRef>(&c.rhs->node);
    return rhs && rhs->side == Side::Pre && lhs && rhs->slot == lhs->slot && rhs->name == lhs->name;
}

// exactly  forall j . a'(j) = a(j)  over the full range
bool is_identity_array_frame(const Classified& c) {
    if (c.kind != DefKind::PostCellForall) return false;
    if (c.cell.range.lo || c.cell.range.hi || c.cell.guard) return false;
    const auto* rhs = std::get_if<Term::CellRef>(&c.cell.value->node);
    if (!rhs || rhs->side != Side::Pre || rhs->slot != c.slot) return false;
    return is_bound_var(rhs->index, c.cell.bound_var);
}

}  // namespace

std::optional<PredPtr> one_point_compose(const PredPtr& a, const PredPtr& b, const Universe& u) {
    try {
        std::vector<PredPtr> conjA = conjuncts_of(a);
        std::vector<PredPtr> conjB = conjuncts_of(b);
        std::vector<Classified> clsA, clsB;
        clsA.reserve(conjA.size());
        clsB.reserve(conjB.size());
        for (const auto& c : conjA) clsA.push_back(classify(c));
        for (const auto& c : conjB) clsB.push_back(classify(c));
        Definitions defsA = extract_definitions(conjA, u);
        Definitions defsB = extract_definitions(conjB, u);

        // intermediate store: forward from A where its right sides stay in the
        // pre space, else backward through B's identity frames
        SideForms storeB;  // replaces B's pre-side references
        storeB.side = Side::Pre;
        storeB.scalar.resize(u.scalars.size());
        storeB.array.resize(u.arrays.size());
        storeB.array_backward.assign(u.arrays.size(), false);
        storeB.scalar_backward.assign(u.scalars.size(), false);
        storeB.need_scalar.resize(u.scalars.size());
        storeB.need_array.resize(u.arrays.size());

        for (std::size_t s = 0; s < u.scalars.size(); ++s)
            if (defsA.post_scalar[s] && !rhs_mentions_post(*defsA.post_scalar[s]))
                storeB.scalar[s] = *defsA.post_scalar[s];
        for (std::size_t s = 0; s < u.arrays.size(); ++s) {
            const ArrayDef& def = defsA.post_array[s];
            if (!def.complete) continue;
            bool clean = true;
            for (const auto& cc : def.cases)
                if (case_mentions_post(cc)) clean = false;
            if (clean) storeB.array[s] = def;
        }
        std::vector<std::size_t> backward_dropped;  // B conjunct indices
        for (std::size_t i = 0; i < conjB.size(); ++i) {
            const Classified& c = clsB[i];
            if (c.kind == DefKind::PostScalar && is_identity_scalar_frame(c, conjB[i])) {
                std::size_t slot = static_cast<std::size_t>(c.slot);
                if (!storeB.scalar[slot] && !storeB.scalar_backward[slot]) {
                    storeB.scalar_backward[slot] = true;
                    backward_dropped.push_back(i);
                }
            } else if (is_identity_array_frame(c)) {
                std::size_t slot = static_cast<std::size_t>(c.slot);
                if (!storeB.array[slot] && !storeB.array_backward[slot]) {
                    storeB.array_backward[slot] = true;
                    backward_dropped.push_back(i);
                }
            }
        }

        // intermediate needs: backward from B's need equations, with B's
        // intermediate store references already replaced
        SideForms needA;  // replaces A's post-side references
        needA.side = Side::Post;
        needA.scalar = storeB.scalar;  // same store forms serve A's post refs
        needA.array = storeB.array;
        needA.array_backward = storeB.array_backward;
        needA.scalar_backward = storeB.scalar_backward;
        needA.need_scalar.resize(u.scalars.size());
        needA.need_array.resize(u.arrays.size());

        for (std::size_t s = 0; s < u.scalars.size(); ++s) {
            if (!defsB.pre_need_scalar[s]) continue;
            needA.need_scalar[s] = apply_forms(*defsB.pre_need_scalar[s], storeB);
        }
        for (std::size_t s = 0; s < u.arrays.size(); ++s) {
            const ArrayDef& def = defsB.pre_need_array[s];
            if (!def.complete) continue;
            ArrayDef hatted;
            hatted.complete = true;
            for (const auto& cc : def.cases) {
                CellCase out = cc;
                if (out.point_index) out.point_index = apply_forms_term(out.point_index, storeB);
                if (out.range.lo) out.range.lo = apply_forms_term(out.range.lo, storeB);
                if (out.range.hi) out.range.hi = apply_forms_term(out.range.hi, storeB);
                if (out.guard) out.guard = apply_forms(out.guard, storeB);
                if (out.bool_value) out.bool_value = apply_forms(out.bool_value, storeB);
                hatted.cases.push_back(std::move(out));
            }
            needA.need_array[s] = std::move(hatted);
        }

        // intermediate time: A's timing with its need references resolved
        if (defsA.post_time) {
            if (detail::term_mentions_side_store(**defsA.post_time, Side::Post))
                return std::nullopt;
            SideForms timeForms = needA;
            timeForms.time = nullptr;
            TermPtr t_mid = apply_forms_term(*defsA.post_time, timeForms);
            storeB.time = t_mid;
            needA.time = t_mid;
        }

        // assemble: A's conjuncts minus its consumed store/time definers,
        // post-side references replaced
        std::vector<PredPtr> out;
        for (std::size_t i = 0; i < conjA.size(); ++i) {
            DefKind k = clsA[i].kind;
            bool dropped = defsA.consumed[i] &&
                           (k == DefKind::PostScalar || k == DefKind::PostCellPoint ||
                            k == DefKind::PostCellForall || k == DefKind::PostTime);
            if (dropped) continue;
            out.push_back(apply_forms(conjA[i], needA));
        }
        // B's conjuncts minus its consumed need definers and the identity
        // frames used backward, pre-side references replaced
        SideForms formsB = storeB;
        formsB.need_scalar = needA.need_scalar;
        formsB.need_array = needA.need_array;
        for (std::size_t i = 0; i < conjB.size(); ++i) {
            DefKind k = clsB[i].kind;
            bool dropped = (defsB.consumed[i] &&
                            (k == DefKind::NeedScalar || k == DefKind::NeedCellPoint ||
                             k == DefKind::NeedCellForall)) ||
                           std::find(backward_dropped.begin(), backward_dropped.end(), i) !=
                               backward_dropped.end();
            if (dropped) continue;
            out.push_back(apply_forms(conjB[i], formsB));
        }
        return p_and_all(std::move(out));
    } catch (const Unresolvable&) {
        return std::nullopt;
    }
}

PredPtr flatten(const PredPtr& p, const Universe& u) {
    detail::PredHook ph;
    ph = [&u, &ph](const PredPtr& q) -> PredPtr {
        const auto* c = std::get_if<Predicate::Compose>(&q->node);
        if (!c) return nullptr;
        PredPtr fa = detail::rewrite_pred(c->first, nullptr, ph);
        PredPtr fb = detail::rewrite_pred(c->second, nullptr, ph);
        if (auto r = one_point_compose(fa, fb, u)) return *r;
        if (fa == c->first && fb == c->second) return q;
        return p_compose(fa, fb);
    };
    return detail::rewrite_pred(p, nullptr, ph);
}

}  // namespace lazytime
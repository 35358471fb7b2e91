#include <algorithm>
#include <sstream>

#include "lazytime/predicate.hpp"

// Canonical rendering, structural equality, and the normal form used for
// golden comparisons: conjunctions/disjunctions flattened, sorted by their
// rendering and deduplicated; literals folded; negation pushed through
// comparisons; nested need-conditional costs straightened into guard chains.

namespace lazytime {

namespace {

// term precedence: add/sub 10, mul/div 20, unary minus 30, postfix ! 40,
// need prefix 50, atoms 100
struct TermPrecV {
    int operator()(const Term::Arith& n) const {
        return (n.op == ArithOp::Add || n.op == ArithOp::Sub) ? 10 : 20;
    }
    int operator()(const Term::Neg&) const { return 30; }
    int operator()(const Term::Fact&) const { return 40; }
    int operator()(const Term::NeedScalarRef&) const { return 50; }
    int operator()(const Term::NeedCellRef&) const { return 50; }
    int operator()(const Term::IntLit& n) const { return n.value < 0 ? 30 : 100; }
    template <typename N>
    int operator()(const N&) const { return 100; }
};

int term_prec(const Term& t) { return std::visit(TermPrecV{}, t.node); }

// predicate precedence: quantifiers 0, ==> 1, \/ 2, /\ 3, ~ 4, cmp/equiv 5, atoms 6
struct PredPrecV {
    int operator()(const Predicate::Forall&) const { return 0; }
    int operator()(const Predicate::Exists&) const { return 0; }
    int operator()(const Predicate::Implies&) const { return 1; }
    int operator()(const Predicate::Or&) const { return 2; }
    int operator()(const Predicate::And&) const { return 3; }
    int operator()(const Predicate::Not&) const { return 4; }
    int operator()(const Predicate::Cmp&) const { return 5; }
    int operator()(const Predicate::Equiv&) const { return 5; }
    template <typename N>
    int operator()(const N&) const { return 6; }
};

int pred_prec(const Predicate& p) { return std::visit(PredPrecV{}, p.node); }

void render_term(std::ostream& os, const Term& t, int min_prec);
void render_pred(std::ostream& os, const Predicate& p, int min_prec);

void render_range(std::ostream& os, const Range& r) {
    if (r.lo) render_term(os, *r.lo, 0);
    os << "..";
    if (r.hi) render_term(os, *r.hi, 0);
}

const char* cmp_text(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

void render_term(std::ostream& os, const Term& t, int min_prec) {
    bool paren = term_prec(t) < min_prec;
    if (paren) os << "(";
    struct V {
        std::ostream& os;
        const Term& self;

        void operator()(const Term::IntLit& n) const { os << n.value; }
        void operator()(const Term::BoolLit& n) const { os << (n.value ? "true" : "false"); }
        void operator()(const Term::InfLit&) const { os << "inf"; }
        void operator()(const Term::TimeRef& n) const { os << (n.side == Side::Post ? "t'" : "t"); }
        void operator()(const Term::ScalarRef& n) const {
            os << n.name << (n.side == Side::Post ? "'" : "");
        }
        void operator()(const Term::CellRef& n) const {
            os << n.name << (n.side == Side::Post ? "'" : "") << "(";
            render_term(os, *n.index, 0);
            os << ")";
        }
        void operator()(const Term::NeedScalarRef& n) const {
            os << "need " << n.name << (n.side == Side::Post ? "'" : "");
        }
        void operator()(const Term::NeedCellRef& n) const {
            os << "need " << n.name << (n.side == Side::Post ? "'" : "") << "(";
            render_term(os, *n.index, 0);
            os << ")";
        }
        void operator()(const Term::ObsRef& n) const { os << "print#" << n.index; }
        void operator()(const Term::BoundRef& n) const { os << n.name; }
        void operator()(const Term::Arith& n) const {
            int p = term_prec(self);
            const char* op = n.op == ArithOp::Add   ? " + "
                             : n.op == ArithOp::Sub ? " - "
                             : n.op == ArithOp::Mul ? " * "
                                                    : " / ";
            render_term(os, *n.lhs, p);
            os << op;
            render_term(os, *n.rhs, p + 1);
        }
        void operator()(const Term::Neg& n) const {
            os << "-";
            render_term(os, *n.arg, 31);
        }
        void operator()(const Term::Fact& n) const {
            render_term(os, *n.arg, 41);
            os << "!";
        }
        void operator()(const Term::IfTerm& n) const {
            os << "if ";
            render_pred(os, *n.cond, 0);
            os << " then ";
            render_term(os, *n.then_term, 0);
            os << " else ";
            render_term(os, *n.else_term, 0);
            os << " fi";
        }
        void operator()(const Term::MaxTerm& n) const {
            os << "(max " << n.var << ": ";
            render_range(os, n.range);
            if (n.guard) {
                os << " | ";
                render_pred(os, *n.guard, 0);
            }
            os << " . ";
            render_term(os, *n.body, 0);
            os << ")";
        }
    };
    std::visit(V{os, t}, t.node);
    if (paren) os << ")";
}

std::string term_text(const Term& t, int min_prec) {
    std::ostringstream os;
    render_term(os, t, min_prec);
    return os.str();
}

void render_pred(std::ostream& os, const Predicate& p, int min_prec) {
    bool paren = pred_prec(p) < min_prec;
    if (paren) os << "(";
    struct V {
        std::ostream& os;
        const Predicate& self;

        void operator()(const Predicate::BoolTerm& n) const { render_term(os, *n.term, 0); }
        void operator()(const Predicate::Cmp& n) const {
            // a factorial directly before = or != would lex into the wrong token
            std::string lhs = term_text(*n.lhs, 6);
            if (!lhs.empty() && lhs.back() == '!')
                lhs = "(" + lhs + ")";
            os << lhs << " " << cmp_text(n.op) << " ";
            render_term(os, *n.rhs, 6);
        }
        void operator()(const Predicate::Not& n) const {
            os << "~ ";
            render_pred(os, *n.arg, 4);
        }
        void operator()(const Predicate::And& n) const {
            // right-nested chains print flat
            render_pred(os, *n.lhs, 4);
            os << " /\\ ";
            render_pred(os, *n.rhs, 3);
        }
        void operator()(const Predicate::Or& n) const {
            render_pred(os, *n.lhs, 3);
            os << " \\/ ";
            render_pred(os, *n.rhs, 2);
        }
        void operator()(const Predicate::Implies& n) const {
            render_pred(os, *n.lhs, 2);
            os << " ==> ";
            render_pred(os, *n.rhs, 1);
        }
        void operator()(const Predicate::Equiv& n) const {
            render_pred(os, *n.lhs, 6);
            os << " = ";
            render_pred(os, *n.rhs, 6);
        }
        void operator()(const Predicate::IfFi& n) const {
            os << "if ";
            render_pred(os, *n.cond, 0);
            os << " then ";
            render_pred(os, *n.then_pred, 0);
            os << " else ";
            render_pred(os, *n.else_pred, 0);
            os << " fi";
        }
        void operator()(const Predicate::Forall& n) const {
            os << "forall " << n.var;
            if (n.range.lo || n.range.hi) {
                os << ": ";
                render_range(os, n.range);
            }
            os << " . ";
            render_pred(os, *n.body, 0);
        }
        void operator()(const Predicate::Exists& n) const {
            os << "exists " << n.var;
            if (n.range.lo || n.range.hi) {
                os << ": ";
                render_range(os, n.range);
            }
            os << " . ";
            render_pred(os, *n.body, 0);
        }
        void operator()(const Predicate::Compose& n) const {
            os << "(";
            render_pred(os, *n.first, 0);
            os << " ; ";
            render_pred(os, *n.second, 0);
            os << ")";
        }
    };
    std::visit(V{os, p}, p.node);
    if (paren) os << ")";
}

}  // namespace

std::string to_text(const Predicate& p) {
    std::ostringstream os;
    render_pred(os, p, 0);
    return os.str();
}

std::string to_text(const Term& t) {
    std::ostringstream os;
    render_term(os, t, 0);
    return os.str();
}

// --- structural equality -----------------------------------------------------

namespace {

bool range_equal(const Range& a, const Range& b) {
    if (static_cast<bool>(a.lo) != static_cast<bool>(b.lo)) return false;
    if (static_cast<bool>(a.hi) != static_cast<bool>(b.hi)) return false;
    if (a.lo && !term_equal(*a.lo, *b.lo)) return false;
    if (a.hi && !term_equal(*a.hi, *b.hi)) return false;
    return true;
}

}  // namespace

bool term_equal(const Term& a, const Term& b) {
    if (a.node.index() != b.node.index()) return false;
    struct V {
        const Term& b;
        bool operator()(const Term::IntLit& n) const { return std::get<Term::IntLit>(b.node).value == n.value; }
        bool operator()(const Term::BoolLit& n) const { return std::get<Term::BoolLit>(b.node).value == n.value; }
        bool operator()(const Term::InfLit&) const { return true; }
        bool operator()(const Term::TimeRef& n) const { return std::get<Term::TimeRef>(b.node).side == n.side; }
        bool operator()(const Term::ScalarRef& n) const {
            const auto& o = std::get<Term::ScalarRef>(b.node);
            return o.name == n.name && o.side == n.side;
        }
        bool operator()(const Term::CellRef& n) const {
            const auto& o = std::get<Term::CellRef>(b.node);
            return o.name == n.name && o.side == n.side && term_equal(*n.index, *o.index);
        }
        bool operator()(const Term::NeedScalarRef& n) const {
            const auto& o = std::get<Term::NeedScalarRef>(b.node);
            return o.name == n.name && o.side == n.side;
        }
        bool operator()(const Term::NeedCellRef& n) const {
            const auto& o = std::get<Term::NeedCellRef>(b.node);
            return o.name == n.name && o.side == n.side && term_equal(*n.index, *o.index);
        }
        bool operator()(const Term::ObsRef& n) const { return std::get<Term::ObsRef>(b.node).index == n.index; }
        bool operator()(const Term::BoundRef& n) const { return std::get<Term::BoundRef>(b.node).name == n.name; }
        bool operator()(const Term::Arith& n) const {
            const auto& o = std::get<Term::Arith>(b.node);
            return o.op == n.op && term_equal(*n.lhs, *o.lhs) && term_equal(*n.rhs, *o.rhs);
        }
        bool operator()(const Term::Neg& n) const {
            return term_equal(*n.arg, *std::get<Term::Neg>(b.node).arg);
        }
        bool operator()(const Term::Fact& n) const {
            return term_equal(*n.arg, *std::get<Term::Fact>(b.node).arg);
        }
        bool operator()(const Term::IfTerm& n) const {
            const auto& o = std::get<Term::IfTerm>(b.node);
            return pred_equal(*n.cond, *o.cond) && term_equal(*n.then_term, *o.then_term) &&
                   term_equal(*n.else_term, *o.else_term);
        }
        bool operator()(const Term::MaxTerm& n) const {
            const auto& o = std::get<Term::MaxTerm>(b.node);
            if (n.var != o.var || !range_equal(n.range, o.range)) return false;
            if (static_cast<bool>(n.guard) != static_cast<bool>(o.guard)) return false;
            if (n.guard && !pred_equal(*n.guard, *o.guard)) return false;
            return term_equal(*n.body, *o.body);
        }
    };
    return std::visit(V{b}, a.node);
}

bool pred_equal(const Predicate& a, const Predicate& b) {
    if (a.node.index() != b.node.index()) return false;
    struct V {
        const Predicate& b;
        bool operator()(const Predicate::BoolTerm& n) const {
            return term_equal(*n.term, *std::get<Predicate::BoolTerm>(b.node).term);
        }
        bool operator()(const Predicate::Cmp& n) const {
            const auto& o = std::get<Predicate::Cmp>(b.node);
            return o.op == n.op && term_equal(*n.lhs, *o.lhs) && term_equal(*n.rhs, *o.rhs);
        }
        bool operator()(const Predicate::Not& n) const {
            return pred_equal(*n.arg, *std::get<Predicate::Not>(b.node).arg);
        }
        bool operator()(const Predicate::And& n) const {
            const auto& o = std::get<Predicate::And>(b.node);
            return pred_equal(*n.lhs, *o.lhs) && pred_equal(*n.rhs, *o.rhs);
        }
        bool operator()(const Predicate::Or& n) const {
            const auto& o = std::get<Predicate::Or>(b.node);
            return pred_equal(*n.lhs, *o.lhs) && pred_equal(*n.rhs, *o.rhs);
        }
        bool operator()(const Predicate::Implies& n) const {
            const auto& o = std::get<Predicate::Implies>(b.node);
            return pred_equal(*n.lhs, *o.lhs) && pred_equal(*n.rhs, *o.rhs);
        }
        bool operator()(const Predicate::Equiv& n) const {
            const auto& o = std::get<Predicate::Equiv>(b.node);
            return pred_equal(*n.lhs, *o.lhs) && pred_equal(*n.rhs, *o.rhs);
        }
        bool operator()(const Predicate::IfFi& n) const {
            const auto& o = std::get<Predicate::IfFi>(b.node);
            return pred_equal(*n.cond, *o.cond) && pred_equal(*n.then_pred, *o.then_pred) &&
                   pred_equal(*n.else_pred, *o.else_pred);
        }
        bool operator()(const Predicate::Forall& n) const {
            const auto& o = std::get<Predicate::Forall>(b.node);
            return n.var == o.var && range_equal(n.range, o.range) && pred_equal(*n.body, *o.body);
        }
        bool operator()(const Predicate::Exists& n) const {
            const auto& o = std::get<Predicate::Exists>(b.node);
            return n.var == o.var && range_equal(n.range, o.range) && pred_equal(*n.body, *o.body);
        }
        bool operator()(const Predicate::Compose& n) const {
            const auto& o = std::get<Predicate::Compose>(b.node);
            return pred_equal(*n.first, *o.first) && pred_equal(*n.second, *o.second);
        }
    };
    return std::visit(V{b}, a.node);
}

// --- normalization -------------------------------------------------------------

namespace {

PredPtr norm_p(const PredPtr& p);
TermPtr norm_t(const TermPtr& t);

bool is_true(const PredPtr& p) {
    if (const auto* bt = std::get_if<Predicate::BoolTerm>(&p->node))
        if (const auto* bl = std::get_if<Term::BoolLit>(&bt->term->node)) return bl->value;
    return false;
}

bool is_false(const PredPtr& p) {
    if (const auto* bt = std::get_if<Predicate::BoolTerm>(&p->node))
        if (const auto* bl = std::get_if<Term::BoolLit>(&bt->term->node)) return !bl->value;
    return false;
}

const long long* int_of(const TermPtr& t) {
    if (const auto* n = std::get_if<Term::IntLit>(&t->node)) return &n->value;
    return nullptr;
}

CmpOp flip_cmp(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return CmpOp::Ne;
        case CmpOp::Ne: return CmpOp::Eq;
        case CmpOp::Lt: return CmpOp::Ge;
        case CmpOp::Le: return CmpOp::Gt;
        case CmpOp::Gt: return CmpOp::Le;
        case CmpOp::Ge: return CmpOp::Lt;
    }
    return op;
}

// negation of an already-normalized predicate
PredPtr not_norm(const PredPtr& p) {
    if (is_true(p)) return p_false();
    if (is_false(p)) return p_true();
    if (const auto* n = std::get_if<Predicate::Not>(&p->node)) return n->arg;
    if (const auto* c = std::get_if<Predicate::Cmp>(&p->node))
        return p_cmp(flip_cmp(c->op), c->lhs, c->rhs);
    return p_not(p);
}

// conjunction/disjunction of already-normalized parts: flatten, filter units,
// sort by rendering, deduplicate
PredPtr assemble_junction(std::vector<PredPtr> parts, bool conj) {
    std::vector<PredPtr> flat;
    while (!parts.empty()) {
        PredPtr cur = parts.back();
        parts.pop_back();
        if (conj) {
            if (const auto* a = std::get_if<Predicate::And>(&cur->node)) {
                parts.push_back(a->lhs);
                parts.push_back(a->rhs);
                continue;
            }
            if (is_true(cur)) continue;
            if (is_false(cur)) return p_false();
        } else {
            if (const auto* o = std::get_if<Predicate::Or>(&cur->node)) {
                parts.push_back(o->lhs);
                parts.push_back(o->rhs);
                continue;
            }
            if (is_false(cur)) continue;
            if (is_true(cur)) return p_true();
        }
        flat.push_back(cur);
    }
    if (flat.empty()) return conj ? p_true() : p_false();
    std::vector<std::pair<std::string, PredPtr>> keyed;
    keyed.reserve(flat.size());
    for (auto& f : flat) keyed.emplace_back(to_text(*f), f);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<PredPtr> out;
    for (std::size_t i = 0; i < keyed.size(); ++i)
        if (i == 0 || keyed[i].first != keyed[i - 1].first) out.push_back(keyed[i].second);
    return conj ? p_and_all(std::move(out)) : p_or_all(std::move(out));
}

struct NormTermV {
        const TermPtr& self;

        TermPtr operator()(const Term::CellRef& n) const {
            TermPtr idx = norm_t(n.index);
            if (idx == n.index) return self;
            return t_cell(n.name, n.side, idx, n.slot);
        }
        TermPtr operator()(const Term::NeedCellRef& n) const {
            TermPtr idx = norm_t(n.index);
            if (idx == n.index) return self;
            return t_need_cell(n.name, n.side, idx, n.slot);
        }
        TermPtr operator()(const Term::Arith& n) const {
            TermPtr l = norm_t(n.lhs);
            TermPtr r = norm_t(n.rhs);
            const long long* li = int_of(l);
            const long long* ri = int_of(r);
            if (li && ri) {
                try {
                    switch (n.op) {
                        case ArithOp::Add: return t_int(checked_add(*li, *ri));
                        case ArithOp::Sub: return t_int(checked_sub(*li, *ri));
                        case ArithOp::Mul: return t_int(checked_mul(*li, *ri));
                        case ArithOp::Div:
                            if (*ri != 0 && *li % *ri == 0) return t_int(*li / *ri);
                            break;
                    }
                } catch (const Error&) {
                    // overflow: keep symbolic
                }
            }
            switch (n.op) {
                case ArithOp::Add:
                    if (ri && *ri == 0) return l;
                    if (li && *li == 0) return r;
                    if (li && !ri) return norm_t(t_arith(ArithOp::Add, r, l));  // literal to the right
                    if (ri) {
                        // (X + a) + b = X + (a+b);  (X - a) + b = X + (b-a)
                        if (const auto* inner = std::get_if<Term::Arith>(&l->node);
                            inner && (inner->op == ArithOp::Add || inner->op == ArithOp::Sub)) {
                            if (const long long* a = int_of(inner->rhs)) {
                                try {
                                    long long lit = inner->op == ArithOp::Add
                                                        ? checked_add(*a, *ri)
                                                        : checked_sub(*ri, *a);
                                    return norm_t(lit >= 0
                                                      ? t_arith(ArithOp::Add, inner->lhs, t_int(lit))
                                                      : t_arith(ArithOp::Sub, inner->lhs,
                                                                t_int(checked_sub(0, lit))));
                                } catch (const Error&) {
                                }
                            }
                        }
                    }
                    break;
                case ArithOp::Sub:
                    if (ri && *ri == 0) return l;
                    if (ri) {
                        // (X + a) - b = X + (a-b);  (X - a) - b = X - (a+b)
                        if (const auto* inner = std::get_if<Term::Arith>(&l->node);
                            inner && (inner->op == ArithOp::Add || inner->op == ArithOp::Sub)) {
                            if (const long long* a = int_of(inner->rhs)) {
                                try {
                                    long long lit = inner->op == ArithOp::Add
                                                        ? checked_sub(*a, *ri)
                                                        : checked_sub(0, checked_add(*a, *ri));
                                    return norm_t(lit >= 0
                                                      ? t_arith(ArithOp::Add, inner->lhs, t_int(lit))
                                                      : t_arith(ArithOp::Sub, inner->lhs,
                                                                t_int(checked_sub(0, lit))));
                                } catch (const Error&) {
                                }
                            }
                        }
                    }
                    break;
                case ArithOp::Mul:
                    if (li && *li == 1) return r;
                    if (ri && *ri == 1) return l;
                    if ((li && *li == 0) || (ri && *ri == 0)) return t_int(0);
                    if (ri && !li) return norm_t(t_arith(ArithOp::Mul, r, l));  // literal to the left
                    break;
                case ArithOp::Div:
                    if (ri && *ri == 1) return l;
                    break;
            }
            if (l == n.lhs && r == n.rhs) return self;
            return t_arith(n.op, l, r);
        }
        TermPtr operator()(const Term::Neg& n) const {
            TermPtr a = norm_t(n.arg);
            if (const long long* v = int_of(a)) {
                try {
                    return t_int(checked_sub(0, *v));
                } catch (const Error&) {
                }
            }
            if (const auto* inner = std::get_if<Term::Neg>(&a->node)) return inner->arg;
            if (a == n.arg) return self;
            return t_neg(a);
        }
        TermPtr operator()(const Term::Fact& n) const {
            TermPtr a = norm_t(n.arg);
            if (a == n.arg) return self;
            return t_fact(a);
        }
        TermPtr operator()(const Term::IfTerm& n) const {
            PredPtr c = norm_p(n.cond);
            TermPtr th = norm_t(n.then_term);
            TermPtr el = norm_t(n.else_term);
            if (is_true(c)) return th;
            if (is_false(c)) return el;
            if (term_equal(*th, *el)) return th;
            // straighten  if c then (if p then A else B fi) else (if q then A else B fi) fi
            // into        if c /\ p then A else (if ~c /\ q then A else B fi) fi
            const auto* ti = std::get_if<Term::IfTerm>(&th->node);
            const auto* ei = std::get_if<Term::IfTerm>(&el->node);
            if (ti && ei && term_equal(*ti->then_term, *ei->then_term) &&
                term_equal(*ti->else_term, *ei->else_term)) {
                PredPtr outer = norm_p(p_and(c, ti->cond));
                PredPtr inner = norm_p(p_and(not_norm(c), ei->cond));
                return t_if(outer, ti->then_term, t_if(inner, ei->then_term, ei->else_term));
            }
            if (c == n.cond && th == n.then_term && el == n.else_term) return self;
            return t_if(c, th, el);
        }
        TermPtr operator()(const Term::MaxTerm& n) const {
            Range r{n.range.lo ? norm_t(n.range.lo) : nullptr, n.range.hi ? norm_t(n.range.hi) : nullptr};
            PredPtr g = n.guard ? norm_p(n.guard) : nullptr;
            TermPtr b = norm_t(n.body);
            if (r.lo == n.range.lo && r.hi == n.range.hi && g == n.guard && b == n.body) return self;
            return t_max(n.var, r, g, b);
        }
        template <typename Leaf>
        TermPtr operator()(const Leaf&) const { return self; }
};

TermPtr norm_t(const TermPtr& t) { return std::visit(NormTermV{t}, t->node); }

PredPtr norm_p(const PredPtr& p) {
    struct V {
        const PredPtr& self;

        PredPtr operator()(const Predicate::BoolTerm& n) const {
            TermPtr t = norm_t(n.term);
            if (const auto* it = std::get_if<Term::IfTerm>(&t->node)) {
                const auto* tb = std::get_if<Term::BoolLit>(&it->then_term->node);
                const auto* eb = std::get_if<Term::BoolLit>(&it->else_term->node);
                if (tb && eb && tb->value && !eb->value) return it->cond;
                if (tb && eb && !tb->value && eb->value) return not_norm(it->cond);
            }
            if (t == n.term) return self;
            return p_bool_term(t);
        }
        PredPtr operator()(const Predicate::Cmp& n) const {
            TermPtr l = norm_t(n.lhs);
            TermPtr r = norm_t(n.rhs);
            const long long* li = int_of(l);
            const long long* ri = int_of(r);
            if (li && ri) {
                bool v = false;
                switch (n.op) {
                    case CmpOp::Eq: v = *li == *ri; break;
                    case CmpOp::Ne: v = *li != *ri; break;
                    case CmpOp::Lt: v = *li < *ri; break;
                    case CmpOp::Le: v = *li <= *ri; break;
                    case CmpOp::Gt: v = *li > *ri; break;
                    case CmpOp::Ge: v = *li >= *ri; break;
                }
                return v ? p_true() : p_false();
            }
            if (l == n.lhs && r == n.rhs) return self;
            return p_cmp(n.op, l, r);
        }
        PredPtr operator()(const Predicate::Not& n) const { return not_norm(norm_p(n.arg)); }
        PredPtr operator()(const Predicate::And& n) const {
            return assemble_junction({norm_p(n.lhs), norm_p(n.rhs)}, true);
        }
        PredPtr operator()(const Predicate::Or& n) const {
            return assemble_junction({norm_p(n.lhs), norm_p(n.rhs)}, false);
        }
        PredPtr operator()(const Predicate::Implies& n) const {
            PredPtr l = norm_p(n.lhs);
            PredPtr r = norm_p(n.rhs);
            if (is_false(l) || is_true(r)) return p_true();
            if (is_true(l)) return r;
            if (is_false(r)) return not_norm(l);
            if (pred_equal(*l, *r)) return p_true();
            if (l == n.lhs && r == n.rhs) return self;
            return p_implies(l, r);
        }
        PredPtr operator()(const Predicate::Equiv& n) const {
            PredPtr l = norm_p(n.lhs);
            PredPtr r = norm_p(n.rhs);
            if (is_true(l)) return r;
            if (is_true(r)) return l;
            if (is_false(l)) return not_norm(r);
            if (is_false(r)) return not_norm(l);
            if (pred_equal(*l, *r)) return p_true();
            if (l == n.lhs && r == n.rhs) return self;
            return p_equiv(l, r);
        }
        PredPtr operator()(const Predicate::IfFi& n) const {
            PredPtr c = norm_p(n.cond);
            PredPtr t = norm_p(n.then_pred);
            PredPtr e = norm_p(n.else_pred);
            if (is_true(c)) return t;
            if (is_false(c)) return e;
            if (pred_equal(*t, *e)) return t;
            if (is_true(t) && is_false(e)) return c;
            if (is_false(t) && is_true(e)) return not_norm(c);
            if (c == n.cond && t == n.then_pred && e == n.else_pred) return self;
            return p_if(c, t, e);
        }
        PredPtr operator()(const Predicate::Forall& n) const {
            Range r{n.range.lo ? norm_t(n.range.lo) : nullptr,
                    n.range.hi ? norm_t(n.range.hi) : nullptr};
            PredPtr b = norm_p(n.body);
            if (is_true(b)) return p_true();
            if (r.lo == n.range.lo && r.hi == n.range.hi && b == n.body) return self;
            return p_forall(n.var, r, b);
        }
        PredPtr operator()(const Predicate::Exists& n) const {
            Range r{n.range.lo ? norm_t(n.range.lo) : nullptr,
                    n.range.hi ? norm_t(n.range.hi) : nullptr};
            PredPtr b = norm_p(n.body);
            if (is_false(b)) return p_false();
            if (r.lo == n.range.lo && r.hi == n.range.hi && b == n.body) return self;
            return p_exists(n.var, r, b);
        }
        PredPtr operator()(const Predicate::Compose& n) const {
            PredPtr a = norm_p(n.first);
            PredPtr b = norm_p(n.second);
            if (a == n.first && b == n.second) return self;
            return p_compose(a, b);
        }
    };
    return std::visit(V{p}, p->node);
}

}  // namespace

PredPtr normalize(const PredPtr& p) {
    PredPtr cur = p;
    for (int i = 0; i < 4; ++i) {
        PredPtr next = norm_p(cur);
        if (next == cur || pred_equal(*next, *cur)) return next;
        cur = next;
    }
    return cur;
}

TermPtr normalize_term(const TermPtr& t) {
    TermPtr cur = t;
    for (int i = 0; i < 4; ++i) {
        TermPtr next = norm_t(cur);
        if (next == cur || term_equal(*next, *cur)) return next;
        cur = next;
    }
    return cur;
}

}  // namespace lazytime
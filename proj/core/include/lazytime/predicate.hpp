#pragma once

// Predicates over (pre store, post store, pre needs, post needs, time, time')
// bindings: the specification language. Includes evaluation over bounded
// domains, sequential composition (enumerating and one-point forms),
// normalization, and structural equality.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lazytime/ast.hpp"

namespace lazytime {

struct Term;
struct Predicate;
using TermPtr = std::shared_ptr<const Term>;
using PredPtr = std::shared_ptr<const Predicate>;

// Unprimed (before) or primed (after) occurrence of a state variable.
enum class Side { Pre, Post };

enum class ArithOp { Add, Sub, Mul, Div };
enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

// Inclusive index range with optional bounds; evaluation clamps to [0, N).
// A missing lower bound means 0, a missing upper bound means N-1.
struct Range {
    TermPtr lo;
    TermPtr hi;
};

struct Term {
    struct IntLit { long long value = 0; };
    struct BoolLit { bool value = false; };
    struct InfLit {};
    struct TimeRef { Side side = Side::Pre; };
    struct ScalarRef { std::string name; int slot = -1; Side side = Side::Pre; };
    struct CellRef { std::string name; int slot = -1; Side side = Side::Pre; TermPtr index; };
    struct NeedScalarRef { std::string name; int slot = -1; Side side = Side::Pre; };
    struct NeedCellRef { std::string name; int slot = -1; Side side = Side::Pre; TermPtr index; };
    struct ObsRef { int index = 0; };          // print observable
    struct BoundRef { std::string name; };     // quantifier-bound index variable
    struct Arith { ArithOp op; TermPtr lhs; TermPtr rhs; };
    struct Neg { TermPtr arg; };
    struct Fact { TermPtr arg; };
    struct IfTerm { PredPtr cond; TermPtr then_term; TermPtr else_term; };
    // max var: range | guard . body — errors with UndefinedMax when no index satisfies the guard
    struct MaxTerm { std::string var; Range range; PredPtr guard; TermPtr body; };

    std::variant<IntLit, BoolLit, InfLit, TimeRef, ScalarRef, CellRef, NeedScalarRef,
                 NeedCellRef, ObsRef, BoundRef, Arith, Neg, Fact, IfTerm, MaxTerm>
        node;
    SourceSpan span;
};

struct Predicate {
    struct BoolTerm { TermPtr term; };  // a boolean-valued term used as an atom
    struct Cmp { CmpOp op; TermPtr lhs; TermPtr rhs; };
    struct Not { PredPtr arg; };
    struct And { PredPtr lhs; PredPtr rhs; };
    struct Or { PredPtr lhs; PredPtr rhs; };
    struct Implies { PredPtr lhs; PredPtr rhs; };
    struct Equiv { PredPtr lhs; PredPtr rhs; };
    struct IfFi { PredPtr cond; PredPtr then_pred; PredPtr else_pred; };
    struct Forall { std::string var; Range range; PredPtr body; };
    struct Exists { std::string var; Range range; PredPtr body; };
    // Sequential composition: exists an intermediate (state, needs, time) pair.
    struct Compose { PredPtr first; PredPtr second; };

    std::variant<BoolTerm, Cmp, Not, And, Or, Implies, Equiv, IfFi, Forall, Exists, Compose> node;
    SourceSpan span;
};

// --- builders ---------------------------------------------------------------

TermPtr t_int(long long v);
TermPtr t_bool(bool v);
TermPtr t_inf();
TermPtr t_time(Side side);
TermPtr t_scalar(std::string name, Side side, int slot = -1);
TermPtr t_cell(std::string name, Side side, TermPtr index, int slot = -1);
TermPtr t_need_scalar(std::string name, Side side, int slot = -1);
TermPtr t_need_cell(std::string name, Side side, TermPtr index, int slot = -1);
TermPtr t_obs(int index);
TermPtr t_bound(std::string name);
TermPtr t_arith(ArithOp op, TermPtr l, TermPtr r);
TermPtr t_neg(TermPtr a);
TermPtr t_fact(TermPtr a);
TermPtr t_if(PredPtr c, TermPtr t, TermPtr e);
TermPtr t_max(std::string var, Range range, PredPtr guard, TermPtr body);

PredPtr p_bool_term(TermPtr t);
PredPtr p_true();
PredPtr p_false();
PredPtr p_cmp(CmpOp op, TermPtr l, TermPtr r);
PredPtr p_not(PredPtr p);
PredPtr p_and(PredPtr l, PredPtr r);
PredPtr p_and_all(std::vector<PredPtr> ps);  // empty => true
PredPtr p_or(PredPtr l, PredPtr r);
PredPtr p_or_all(std::vector<PredPtr> ps);  // empty => false
PredPtr p_implies(PredPtr l, PredPtr r);
PredPtr p_equiv(PredPtr l, PredPtr r);
PredPtr p_if(PredPtr c, PredPtr t, PredPtr e);
PredPtr p_forall(std::string var, Range range, PredPtr body);
PredPtr p_exists(std::string var, Range range, PredPtr body);
PredPtr p_compose(PredPtr a, PredPtr b);

// --- bindings and domains -----------------------------------------------------

// A full binding: pre/post stores (time lives inside the store), pre/post
// need states, and values of the print observables.
struct Binding {
    State pre;
    State post;
    NeedState pre_need;
    NeedState post_need;
    std::vector<long long> obs;
};

Binding zero_binding(const Universe& u);

// Finite evaluation domain for bounded checking.
struct Domain {
    std::size_t array_bound = 8;
    std::vector<long long> scalar_values = {-1, 0, 1, 2, 3, 5};
    std::vector<ExtNat> time_samples = {ExtNat::fin(0), ExtNat::fin(1), ExtNat::fin(5), ExtNat::inf()};
    std::uint64_t compose_budget = 1u << 20;
};

// --- operations ----------------------------------------------------------------

// Resolves variable names in a parsed predicate against a universe, filling
// slots. Unknown names raise UniverseMismatch; obs indices are checked
// against the universe's print count.
PredPtr link(const PredPtr& p, const Universe& u);

// Evaluates a linked predicate at a binding. Quantifier ranges clamp to
// [0, d.array_bound). Compose nodes enumerate intermediates over d and raise
// DomainTooLarge past d.compose_budget.
bool eval_pred(const Predicate& p, const Binding& b, const Domain& d);
Value eval_term(const Term& t, const Binding& b, const Domain& d);

// Same, with bound index variables pre-assigned (innermost last).
using IndexEnv = std::vector<std::pair<std::string, long long>>;
bool eval_pred_env(const Predicate& p, const Binding& b, const Domain& d, const IndexEnv& env);
Value eval_term_env(const Term& t, const Binding& b, const Domain& d, const IndexEnv& env);

// Sequential composition as an explicit enumeration node.
PredPtr compose(PredPtr a, PredPtr b);

// Eliminates the intermediate state of `a ; b` by substitution when every
// intermediate coordinate is resolvable (forward from a's result equations,
// backward through b's frame conjuncts, needs backward through b's need
// equations). Returns nullopt when not applicable.
std::optional<PredPtr> one_point_compose(const PredPtr& a, const PredPtr& b, const Universe& u);

// Recursively replaces Compose nodes by their one-point form where possible.
PredPtr flatten(const PredPtr& p, const Universe& u);

// Semantics-preserving normal form: flattened/sorted conjunctions and
// disjunctions, literal folding, negation pushed into comparisons,
// need-conditional cost chains straightened.
PredPtr normalize(const PredPtr& p);
TermPtr normalize_term(const TermPtr& t);

bool pred_equal(const Predicate& a, const Predicate& b);
bool term_equal(const Term& a, const Term& b);

// Canonical text rendering (also used by the parser module's pretty_print).
std::string to_text(const Predicate& p);
std::string to_text(const Term& t);

std::vector<PredPtr> conjuncts_of(const PredPtr& p);
std::vector<long long> int_literals_of(const PredPtr& p);

// --- definition extraction -----------------------------------------------------

// Defining conjuncts of an annotation-shaped predicate, used both by
// one_point_compose and by the refinement checker's binding completion:
//   post-store:  x' = T,   a'(E) = T,   forall j . [guard =>] a'(j) = T
//   pre-needs:   need v = P, ~need v, need v, and the quantified cell forms
//   time:        t' = T
//   observables: print#k = T
struct CellCase {
    Range range;                 // bound-variable range (point cases: lo = hi = index)
    TermPtr point_index;         // set for single-cell cases
    PredPtr guard;               // extra guard over the bound variable (may be null)
    std::string bound_var;       // quantifier variable name ("" for point cases)
    TermPtr value;               // numeric value (store defs)
    PredPtr bool_value;          // boolean value (need defs)
};

struct ArrayDef {
    std::vector<CellCase> cases;
    bool complete = false;  // cases provably cover [0, N)
};

struct Definitions {
    std::vector<std::optional<TermPtr>> post_scalar;   // by scalar slot
    std::vector<ArrayDef> post_array;                  // by array slot
    std::vector<std::optional<PredPtr>> pre_need_scalar;
    std::vector<ArrayDef> pre_need_array;
    std::optional<TermPtr> post_time;                  // rhs of t' = ...
    std::vector<std::optional<TermPtr>> obs;           // by print index
    std::vector<bool> consumed;                        // per input conjunct: used as a definition
};

Definitions extract_definitions(const std::vector<PredPtr>& conjuncts, const Universe& u);

// Evaluates an array definition at a concrete index against a binding;
// nullopt when no case applies to that index.
std::optional<Value> array_def_value_at(const ArrayDef& def, long long index, const Binding& b,
                                        const Domain& d);
std::optional<bool> array_def_bool_value_at(const ArrayDef& def, long long index, const Binding& b,
                                            const Domain& d);

// Substitutes a replacement term for every occurrence of a bound index
// variable. Used when instantiating quantified definition cases.
TermPtr subst_bound(const TermPtr& t, const std::string& var, const TermPtr& replacement);
PredPtr subst_bound(const PredPtr& p, const std::string& var, const TermPtr& replacement);

}  // namespace lazytime

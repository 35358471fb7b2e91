#pragma once

// Bounded refinement checking. A refinement "lhs <== rhs" holds when every
// binding satisfying rhs satisfies lhs. The checker enumerates bindings:
// sampled (or exhaustively enumerated) pre stores, the domain's time samples,
// and every assignment of the need variables that either side mentions. The
// remaining coordinates (post store, pre needs, final time, observations) are
// completed from the rhs's own defining equations, the completed binding is
// re-verified against the full rhs, and only then is the lhs judged. A
// binding the rhs cannot evaluate on (an index outside the modeled prefix,
// say) is counted as vacuous rather than silently dropped.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lazytime/annotator.hpp"
#include "lazytime/ast.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/predicate.hpp"

namespace lazytime {

struct CheckConfig {
    Domain domain;
    std::size_t samples = 10000;  // random pre stores (ignored when exhaustive)
    std::uint64_t seed = 1;
    std::size_t jobs = 0;  // worker threads; 0 picks the hardware count
    bool exhaustive_stores = false;
    bool shrink = true;               // reduce a found counterexample
    std::size_t max_completions = 4096;  // cap on underdetermined-coordinate combos
};

struct Counterexample {
    Binding binding;
    std::string text;  // human rendering of the binding
};

struct RefineReport {
    std::string name = "claim";
    bool holds = false;
    std::uint64_t bindings_checked = 0;  // bindings satisfying the rhs and judged
    std::uint64_t rhs_unsat = 0;         // completed bindings the rhs rejected
    std::uint64_t vacuous = 0;           // bindings the rhs could not evaluate on
    std::uint64_t lhs_errors = 0;        // bindings the lhs could not evaluate on
    std::optional<Counterexample> counterexample;
    std::uint64_t seed = 0;
};

RefineReport check_refinement(const PredPtr& lhs, const PredPtr& rhs, const Universe& u,
                              const CheckConfig& cfg, std::string name = "claim");

// Checks every loop obligation the annotator recorded.
std::vector<RefineReport> check_obligations(const Annotation& ann, const Universe& u,
                                            const CheckConfig& cfg);

// Checks claim <== (the whole program's annotation).
RefineReport check_claim(const PredPtr& claim, const Annotation& ann, const Universe& u,
                         const CheckConfig& cfg, std::string name = "claim");

// Checks strong => weak, the weakening step that drops conjuncts of a proved
// predicate. Same machinery as check_refinement with the sides swapped.
RefineReport specialize_check(const PredPtr& strong, const PredPtr& weak, const Universe& u,
                              const CheckConfig& cfg, std::string name = "specialize");

std::string render_binding(const Binding& b, const Universe& u);

// Cross-validation of the two lazy-time accounts: runs the program, builds
// the binding its trace induces, and sweeps the final time over a window to
// find every value the program's annotation accepts. The accounts agree when
// that set is exactly the operational lazy time.
struct CrosscheckReport {
    bool agree = false;
    std::size_t lazy_time = 0;
    std::vector<ExtNat> satisfying_times;
    Stability stability = Stability::Exact;
    std::string detail;
};

CrosscheckReport crosscheck(const StmtPtr& program, const Universe& u,
                            const std::map<std::string, PredPtr>& specs, const RunConfig& rc,
                            const Domain& dom);

}  // namespace lazytime
#pragma once

// Turns programs into timed predicates. The lazy form carries need variables
// (one per location) and charges each assignment only when its written
// location is demanded; the eager form charges every assignment and print
// one tick. Loops are replaced by their named specification, yielding one
// refinement obligation per loop.

#include <map>
#include <string>
#include <vector>

#include "lazytime/ast.hpp"
#include "lazytime/predicate.hpp"

namespace lazytime {

struct RefinementObligation {
    std::string name;  // loop spec name
    PredPtr lhs;       // the spec itself (linked)
    PredPtr rhs;       // annotated body composed with the spec
};

struct Annotation {
    PredPtr pred;
    std::vector<RefinementObligation> obligations;
};

// Lazy-timed semantics. Specs may be unlinked; they are linked against u.
// Errors: UnknownSpecName when a loop names a spec that is not provided.
Annotation annotate(const StmtPtr& program, const std::map<std::string, PredPtr>& specs,
                    const Universe& u);

// Eager-timed semantics: no need bookkeeping, unit cost per assignment/print.
Annotation annotate_eager(const StmtPtr& program, const std::map<std::string, PredPtr>& specs,
                          const Universe& u);

// Backward liveness: which initial locations are read, given which final
// locations are demanded. Requires a loop-free program (NotLoopFree) with
// constant array indices (NonStaticIndex). A trailing stop clears demand;
// prints demand their reads unconditionally; both branches of a conditional
// count, as do the condition's reads.
NeedState syntactic_needs(const StmtPtr& program, const Universe& u, const NeedState& post_need);

}  // namespace lazytime
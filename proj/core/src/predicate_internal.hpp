#pragma once

// Shared rewriting machinery for the predicate module's translation units.

#include <functional>

#include "lazytime/predicate.hpp"

namespace lazytime::detail {

// Pre-order rewriting: hooks may return a replacement (used as-is, no further
// recursion) or null to recurse into children. Unchanged subtrees are shared.
using TermHook = std::function<TermPtr(const TermPtr&)>;
using PredHook = std::function<PredPtr(const PredPtr&)>;

TermPtr rewrite_term(const TermPtr& t, const TermHook& th, const PredHook& ph);
PredPtr rewrite_pred(const PredPtr& p, const TermHook& th, const PredHook& ph);

bool term_mentions_side_store(const Term& t, Side side);
bool pred_mentions_side_store(const Predicate& p, Side side);
bool term_mentions_needs(const Term& t);
bool pred_mentions_needs(const Predicate& p);

}  // namespace lazytime::detail

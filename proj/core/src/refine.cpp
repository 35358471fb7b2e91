#include "lazytime/refine.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "predicate_internal.hpp"

namespace lazytime {

namespace {

// ---------------------------------------------------------------------------
// Occurrence analysis: which binding coordinates either side mentions. A
// coordinate absent from both sides can be pinned arbitrarily; one the rhs
// does not define but some side mentions must be enumerated.
// ---------------------------------------------------------------------------

struct Occurrence {
    std::vector<char> post_scalar, pre_need_scalar, post_need_scalar;
    std::vector<char> post_array, pre_need_array, post_need_array;
    std::vector<char> obs;
    bool post_time = false;

    explicit Occurrence(const Universe& u)
        : post_scalar(u.scalars.size(), 0),
          pre_need_scalar(u.scalars.size(), 0),
          post_need_scalar(u.scalars.size(), 0),
          post_array(u.arrays.size(), 0),
          pre_need_array(u.arrays.size(), 0),
          post_need_array(u.arrays.size(), 0),
          obs(u.print_count, 0) {}

    void scan(const PredPtr& p) {
        auto th = [this](const TermPtr& t) -> TermPtr {
            if (const auto* n = std::get_if<Term::TimeRef>(&t->node)) {
                if (n->side == Side::Post) post_time = true;
            } else if (const auto* sr = std::get_if<Term::ScalarRef>(&t->node)) {
                if (sr->side == Side::Post && sr->slot >= 0) post_scalar.at(sr->slot) = 1;
            } else if (const auto* cr = std::get_if<Term::CellRef>(&t->node)) {
                if (cr->side == Side::Post && cr->slot >= 0) post_array.at(cr->slot) = 1;
            } else if (const auto* ns = std::get_if<Term::NeedScalarRef>(&t->node)) {
                if (ns->slot >= 0)
                    (ns->side == Side::Pre ? pre_need_scalar : post_need_scalar).at(ns->slot) = 1;
            } else if (const auto* nc = std::get_if<Term::NeedCellRef>(&t->node)) {
                if (nc->slot >= 0)
                    (nc->side == Side::Pre ? pre_need_array : post_need_array).at(nc->slot) = 1;
            } else if (const auto* ob = std::get_if<Term::ObsRef>(&t->node)) {
                if (ob->index >= 0 && static_cast<std::size_t>(ob->index) < obs.size())
                    obs[ob->index] = 1;
            }
            return nullptr;
        };
        detail::rewrite_pred(p, th, nullptr);
    }
};

struct NeedBit {
    bool cell = false;
    std::size_t slot = 0;
    long long index = 0;
};

// Coordinates the rhs leaves open; each is probed over a small candidate set.
struct FreeCoord {
    enum class Kind { PostScalar, PostCell, NeedScalar, NeedCell, Time, Obs };
    Kind kind;
    std::size_t slot = 0;
    long long index = 0;
    std::size_t arity = 0;  // candidate count
};

constexpr std::size_t kMaxNeedBits = 22;

struct Plan {
    const Universe& u;
    Domain dom;
    PredPtr lhs, rhs;
    Definitions defs;
    Occurrence occ;       // union of both sides
    Occurrence occ_lhs;   // what the lhs alone can see
    std::vector<NeedBit> nv_bits;     // enumerated post-need coordinates
    std::vector<FreeCoord> free_coords;
    std::vector<long long> int_candidates;  // 0 plus both sides' literals
    std::size_t completions = 1;            // product of free-coord arities

    Plan(const PredPtr& l, const PredPtr& r, const Universe& universe, const Domain& d)
        : u(universe), dom(d), lhs(normalize(link(l, universe))),
          rhs(normalize(link(r, universe))), occ(universe), occ_lhs(universe) {
        occ_lhs.scan(lhs);
        occ.scan(lhs);
        occ.scan(rhs);
        defs = extract_definitions(conjuncts_of(rhs), u);

        for (std::size_t s = 0; s < u.scalars.size(); ++s)
            if (occ.post_need_scalar[s]) nv_bits.push_back({false, s, 0});
        for (std::size_t a = 0; a < u.arrays.size(); ++a)
            if (occ.post_need_array[a])
                for (std::size_t j = 0; j < u.array_bound; ++j)
                    nv_bits.push_back({true, a, static_cast<long long>(j)});
        if (nv_bits.size() > kMaxNeedBits)
            throw Error(ErrorKind::DomainTooLarge,
                        "too many need variables to enumerate (" + std::to_string(nv_bits.size()) +
                            "); lower the array bound");

        std::set<long long> lits{0};
        for (long long v : int_literals_of(lhs)) lits.insert(v);
        for (long long v : int_literals_of(rhs)) lits.insert(v);
        for (long long v : lits)
            if (int_candidates.size() < 8) int_candidates.push_back(v);

        // An open coordinate the lhs cannot see gets one probe value: any
        // counterexample found with it is genuine (the rhs is re-verified),
        // and the lhs cannot distinguish further probes. Coordinates the lhs
        // mentions are probed over the whole candidate set.
        std::size_t store_arity = 1 + int_candidates.size();  // pre value first
        for (std::size_t s = 0; s < u.scalars.size(); ++s)
            if (occ.post_scalar[s] && !defs.post_scalar[s])
                free_coords.push_back({FreeCoord::Kind::PostScalar, s, 0,
                                       occ_lhs.post_scalar[s] ? store_arity : 1});
        for (std::size_t a = 0; a < u.arrays.size(); ++a) {
            if (occ.post_array[a] && defs.post_array[a].cases.empty())
                for (std::size_t j = 0; j < u.array_bound; ++j)
                    free_coords.push_back({FreeCoord::Kind::PostCell, a, static_cast<long long>(j),
                                           occ_lhs.post_array[a] ? store_arity : 1});
        }
        for (std::size_t s = 0; s < u.scalars.size(); ++s)
            if (occ.pre_need_scalar[s] && !defs.pre_need_scalar[s])
                free_coords.push_back({FreeCoord::Kind::NeedScalar, s, 0,
                                       occ_lhs.pre_need_scalar[s] ? 2u : 1u});
        for (std::size_t a = 0; a < u.arrays.size(); ++a) {
            if (occ.pre_need_array[a] && defs.pre_need_array[a].cases.empty())
                for (std::size_t j = 0; j < u.array_bound; ++j)
                    free_coords.push_back({FreeCoord::Kind::NeedCell, a, static_cast<long long>(j),
                                           occ_lhs.pre_need_array[a] ? 2u : 1u});
        }
        if (occ.post_time && !defs.post_time)
            free_coords.push_back(
                {FreeCoord::Kind::Time, 0, 0, occ_lhs.post_time ? 4u : 1u});  // t, t+1, t+2, inf
        for (std::size_t k = 0; k < occ.obs.size(); ++k)
            if (occ.obs[k] && !defs.obs[k])
                free_coords.push_back({FreeCoord::Kind::Obs, k, 0,
                                       occ_lhs.obs[k] ? int_candidates.size() : 1});

        for (const FreeCoord& fc : free_coords) {
            completions *= fc.arity;
            if (completions > 1u << 20) break;
        }
    }
};

// Outcome of judging one completed binding.
enum class Judged { Holds, RhsUnsat, Vacuous, LhsError, Fails };

bool structural_error(ErrorKind k) {
    return k == ErrorKind::UniverseMismatch || k == ErrorKind::UnboundVariable ||
           k == ErrorKind::DomainTooLarge || k == ErrorKind::UnknownSpecName;
}

struct Checker {
    const Plan& plan;

    void set_need(NeedState& nv, const NeedBit& bit, bool v) const {
        if (bit.cell)
            nv.set_cell(bit.slot, bit.index, v);
        else
            nv.set_scalar(bit.slot, v);
    }

    void apply_free(Binding& b, std::size_t odo) const {
        for (const FreeCoord& fc : plan.free_coords) {
            std::size_t pick = odo % fc.arity;
            odo /= fc.arity;
            switch (fc.kind) {
                case FreeCoord::Kind::PostScalar:
                    if (pick > 0) b.post.scalars[fc.slot] = plan.int_candidates[pick - 1];
                    break;  // pick 0 keeps the pre value already copied in
                case FreeCoord::Kind::PostCell:
                    if (pick > 0) b.post.arrays[fc.slot][fc.index] = plan.int_candidates[pick - 1];
                    break;
                case FreeCoord::Kind::NeedScalar:
                    b.pre_need.set_scalar(fc.slot, pick != 0);
                    break;
                case FreeCoord::Kind::NeedCell:
                    b.pre_need.set_cell(fc.slot, fc.index, pick != 0);
                    break;
                case FreeCoord::Kind::Time:
                    if (pick == 3)
                        b.post.time = ExtNat::inf();
                    else if (b.pre.time.is_inf())
                        b.post.time = ExtNat::inf();
                    else
                        b.post.time = ExtNat::fin(b.pre.time.finite() + pick);
                    break;
                case FreeCoord::Kind::Obs:
                    b.obs[fc.slot] = plan.int_candidates[pick];
                    break;
            }
        }
    }

    // Completes a binding whose pre store, pre time and post needs are set,
    // then judges the refinement on it.
    Judged judge(Binding& b, std::size_t odo) const {
        const Universe& u = plan.u;
        const Definitions& defs = plan.defs;
        b.post.scalars = b.pre.scalars;
        b.post.arrays = b.pre.arrays;
        b.post.time = b.pre.time;
        b.pre_need = NeedState::all(u, false);
        b.obs.assign(u.print_count, 0);
        apply_free(b, odo);

        try {
            for (std::size_t s = 0; s < u.scalars.size(); ++s)
                if (defs.post_scalar[s])
                    b.post.scalars[s] = eval_term(**defs.post_scalar[s], b, plan.dom).as_int();
            for (std::size_t a = 0; a < u.arrays.size(); ++a) {
                const ArrayDef& def = defs.post_array[a];
                if (def.cases.empty()) continue;
                for (std::size_t j = 0; j < u.array_bound; ++j) {
                    auto v = array_def_value_at(def, static_cast<long long>(j), b, plan.dom);
                    if (v)
                        b.post.arrays[a][j] = v->as_int();
                    else if (def.complete)
                        return Judged::Vacuous;  // coverage holds, so this is an eval gap
                }
            }
            for (std::size_t s = 0; s < u.scalars.size(); ++s)
                if (defs.pre_need_scalar[s])
                    b.pre_need.set_scalar(s, eval_pred(**defs.pre_need_scalar[s], b, plan.dom));
            for (std::size_t a = 0; a < u.arrays.size(); ++a) {
                const ArrayDef& def = defs.pre_need_array[a];
                if (def.cases.empty()) continue;
                for (std::size_t j = 0; j < u.array_bound; ++j) {
                    auto v = array_def_bool_value_at(def, static_cast<long long>(j), b, plan.dom);
                    if (v)
                        b.pre_need.set_cell(a, j, *v);
                    else if (def.complete)
                        return Judged::Vacuous;
                }
            }
            if (defs.post_time) b.post.time = eval_term(**defs.post_time, b, plan.dom).as_time();
            for (std::size_t k = 0; k < defs.obs.size(); ++k)
                if (defs.obs[k]) b.obs[k] = eval_term(**defs.obs[k], b, plan.dom).as_int();

            if (!eval_pred(*plan.rhs, b, plan.dom)) return Judged::RhsUnsat;
        } catch (const Error& err) {
            if (structural_error(err.kind())) throw;
            return Judged::Vacuous;
        }

        try {
            return eval_pred(*plan.lhs, b, plan.dom) ? Judged::Holds : Judged::Fails;
        } catch (const Error& err) {
            if (structural_error(err.kind())) throw;
            return Judged::LhsError;
        }
    }
};

// ---------------------------------------------------------------------------
// Pre-store generation. The first stores sweep every combination of scalar
// values over the candidate pool (so small scalar ranges are covered
// exhaustively); arrays rotate through shapes the specifications care about:
// scaled factorial tables, a factorial table with one cell nudged, uniform
// pool values, and 0/1 noise.
// ---------------------------------------------------------------------------

std::vector<long long> scalar_pool(const Universe& u, const Domain& dom) {
    std::set<long long> pool(dom.scalar_values.begin(), dom.scalar_values.end());
    for (std::size_t j = 0; j < u.array_bound; ++j) pool.insert(static_cast<long long>(j));
    return {pool.begin(), pool.end()};
}

std::vector<State> generate_stores(const Universe& u, const CheckConfig& cfg) {
    std::vector<long long> pool = scalar_pool(u, cfg.domain);
    std::mt19937_64 rng(cfg.seed);
    std::vector<State> out;

    auto fact = [](long long j) {
        long long f = 1;
        for (long long k = 2; k <= j; ++k) f *= k;
        return f;
    };

    if (cfg.exhaustive_stores) {
        std::size_t coords = u.scalars.size() + u.arrays.size() * u.array_bound;
        double total = 1;
        for (std::size_t c = 0; c < coords; ++c) total *= static_cast<double>(pool.size());
        if (total > 2e6)
            throw Error(ErrorKind::DomainTooLarge,
                        "exhaustive store enumeration is too large; use sampling");
        std::vector<std::size_t> odo(coords, 0);
        while (true) {
            State s = State::zeros(u);
            std::size_t c = 0;
            for (std::size_t i = 0; i < u.scalars.size(); ++i) s.scalars[i] = pool[odo[c++]];
            for (std::size_t a = 0; a < u.arrays.size(); ++a)
                for (std::size_t j = 0; j < u.array_bound; ++j) s.arrays[a][j] = pool[odo[c++]];
            out.push_back(std::move(s));
            std::size_t i = 0;
            while (i < coords && ++odo[i] == pool.size()) odo[i++] = 0;
            if (i == coords) break;
        }
        return out;
    }

    // how many leading samples enumerate the scalars exhaustively
    std::size_t scalar_combos = 1;
    for (std::size_t s = 0; s < u.scalars.size(); ++s) {
        if (scalar_combos > cfg.samples) break;
        scalar_combos *= pool.size();
    }

    out.reserve(cfg.samples);
    for (std::size_t k = 0; k < cfg.samples; ++k) {
        State s = State::zeros(u);
        if (k < scalar_combos && scalar_combos <= cfg.samples) {
            std::size_t odo = k;
            for (std::size_t i = 0; i < u.scalars.size(); ++i) {
                s.scalars[i] = pool[odo % pool.size()];
                odo /= pool.size();
            }
        } else {
            for (std::size_t i = 0; i < u.scalars.size(); ++i)
                s.scalars[i] = pool[rng() % pool.size()];
        }
        for (std::size_t a = 0; a < u.arrays.size(); ++a) {
            switch (k % 4) {
                case 0: {
                    long long c = 1 + static_cast<long long>(rng() % 3);
                    for (std::size_t j = 0; j < u.array_bound; ++j)
                        s.arrays[a][j] = c * fact(static_cast<long long>(j));
                    break;
                }
                case 1: {
                    for (std::size_t j = 0; j < u.array_bound; ++j)
                        s.arrays[a][j] = fact(static_cast<long long>(j));
                    s.arrays[a][rng() % u.array_bound] += 1;
                    break;
                }
                case 2:
                    for (std::size_t j = 0; j < u.array_bound; ++j)
                        s.arrays[a][j] = pool[rng() % pool.size()];
                    break;
                default:
                    for (std::size_t j = 0; j < u.array_bound; ++j)
                        s.arrays[a][j] = static_cast<long long>(rng() % 2);
                    break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct WorkerTally {
    std::uint64_t checked = 0, unsat = 0, vacuous = 0, lhs_errors = 0;
    bool found = false;
    std::size_t store_idx = 0;
    Binding ce;
};

}  // namespace

std::string render_binding(const Binding& b, const Universe& u) {
    std::ostringstream os;
    auto store = [&](const State& s) {
        bool first = true;
        for (std::size_t i = 0; i < u.scalars.size(); ++i) {
            if (!first) os << " ";
            first = false;
            os << u.scalars[i] << "=" << s.scalars[i];
        }
        for (std::size_t a = 0; a < u.arrays.size(); ++a) {
            if (!first) os << " ";
            first = false;
            os << u.arrays[a] << "=[";
            for (std::size_t j = 0; j < s.arrays[a].size(); ++j)
                os << (j ? "," : "") << s.arrays[a][j];
            os << "]";
        }
    };
    auto needs = [&](const NeedState& n, const char* mark) {
        bool any = false;
        for (std::size_t i = 0; i < u.scalars.size(); ++i)
            if (n.scalar(i)) {
                os << (any ? ", " : "") << "need " << u.scalars[i] << mark;
                any = true;
            }
        for (std::size_t a = 0; a < u.arrays.size(); ++a)
            for (std::size_t j = 0; j < u.array_bound; ++j)
                if (n.cell(a, j)) {
                    os << (any ? ", " : "") << "need " << u.arrays[a] << mark << "(" << j << ")";
                    any = true;
                }
        if (!any) os << "none";
    };
    os << "pre: ";
    store(b.pre);
    os << " t=" << to_string(b.pre.time) << "\npost: ";
    store(b.post);
    os << " t'=" << to_string(b.post.time) << "\ndemanded after: ";
    needs(b.post_need, "'");
    os << "\ndemanded before: ";
    needs(b.pre_need, "");
    if (!b.obs.empty()) {
        os << "\nprinted:";
        for (std::size_t k = 0; k < b.obs.size(); ++k) os << " print#" << k << "=" << b.obs[k];
    }
    return os.str();
}

RefineReport check_refinement(const PredPtr& lhs, const PredPtr& rhs, const Universe& u,
                              const CheckConfig& cfg, std::string name) {
    Plan plan(lhs, rhs, u, cfg.domain);
    if (plan.completions > cfg.max_completions)
        throw Error(ErrorKind::DomainTooLarge,
                    "the right-hand side leaves too many coordinates unconstrained (" +
                        std::to_string(plan.free_coords.size()) + " free)");

    std::vector<State> stores = generate_stores(u, cfg);

    RefineReport rep;
    rep.name = std::move(name);
    rep.seed = cfg.seed;

    std::size_t jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, std::max<std::size_t>(1, stores.size()));

    std::atomic<std::size_t> best_idx(stores.size());
    std::atomic<std::size_t> next(0);
    std::vector<WorkerTally> tallies(jobs);
    std::mutex err_mu;
    std::exception_ptr first_error;

    auto worker = [&](std::size_t wid) {
        Checker checker{plan};
        WorkerTally& tally = tallies[wid];
        Binding b;
        b.pre_need = NeedState::all(u, false);
        b.post_need = NeedState::all(u, false);
        try {
            while (true) {
                std::size_t si = next.fetch_add(1);
                if (si >= stores.size()) break;
                if (si > best_idx.load(std::memory_order_relaxed)) continue;
                bool found_here = false;
                for (std::size_t ti = 0; ti < plan.dom.time_samples.size() && !found_here; ++ti) {
                    for (std::uint64_t mask = 0;
                         mask < (1ull << plan.nv_bits.size()) && !found_here; ++mask) {
                        for (std::size_t odo = 0; odo < plan.completions && !found_here; ++odo) {
                            b.pre = stores[si];
                            b.pre.time = plan.dom.time_samples[ti];
                            b.post_need = NeedState::all(u, false);
                            for (std::size_t bit = 0; bit < plan.nv_bits.size(); ++bit)
                                checker.set_need(b.post_need, plan.nv_bits[bit],
                                                 (mask >> bit) & 1);
                            switch (checker.judge(b, odo)) {
                                case Judged::Holds: ++tally.checked; break;
                                case Judged::RhsUnsat: ++tally.unsat; break;
                                case Judged::Vacuous: ++tally.vacuous; break;
                                case Judged::LhsError: ++tally.lhs_errors; break;
                                case Judged::Fails: {
                                    ++tally.checked;
                                    tally.found = true;
                                    tally.store_idx = si;
                                    tally.ce = b;
                                    found_here = true;
                                    // only smaller store indices can beat this
                                    std::size_t prev = best_idx.load();
                                    while (si < prev && !best_idx.compare_exchange_weak(prev, si)) {
                                    }
                                    break;
                                }
                            }
                        }
                    }
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!first_error) first_error = std::current_exception();
        }
    };

    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    const WorkerTally* best = nullptr;
    for (const WorkerTally& t : tallies) {
        rep.bindings_checked += t.checked;
        rep.rhs_unsat += t.unsat;
        rep.vacuous += t.vacuous;
        rep.lhs_errors += t.lhs_errors;
        if (t.found && (!best || t.store_idx < best->store_idx)) best = &t;
    }
    rep.holds = best == nullptr;
    if (best) {
        Binding ce = best->ce;
        if (cfg.shrink) {
            Checker checker{plan};
            // A mutation is kept when the completion from the mutated prefix
            // still satisfies the rhs and fails the lhs.
            auto refails = [&](Binding& probe) {
                for (std::size_t odo = 0; odo < plan.completions; ++odo)
                    if (checker.judge(probe, odo) == Judged::Fails) return true;
                return false;
            };
            auto try_mutation = [&](auto&& mutate) {
                Binding probe;
                probe.pre = ce.pre;
                probe.post_need = ce.post_need;
                mutate(probe);
                if (refails(probe)) {
                    ce = probe;
                    return true;
                }
                return false;
            };
            // clear demanded-after bits
            for (std::size_t s = 0; s < u.scalars.size(); ++s)
                if (ce.post_need.scalar(s))
                    try_mutation([&](Binding& p) { p.post_need.set_scalar(s, false); });
            for (std::size_t a = 0; a < u.arrays.size(); ++a)
                for (std::size_t j = 0; j < u.array_bound; ++j)
                    if (ce.post_need.cell(a, j))
                        try_mutation([&](Binding& p) { p.post_need.set_cell(a, j, false); });
            // zero store coordinates
            for (std::size_t s = 0; s < u.scalars.size(); ++s)
                if (ce.pre.scalars[s] != 0)
                    try_mutation([&](Binding& p) { p.pre.scalars[s] = 0; });
            for (std::size_t a = 0; a < u.arrays.size(); ++a)
                for (std::size_t j = 0; j < u.array_bound; ++j)
                    if (ce.pre.arrays[a][j] != 0)
                        try_mutation([&](Binding& p) { p.pre.arrays[a][j] = 0; });
            if (!(ce.pre.time == ExtNat::fin(0)))
                try_mutation([&](Binding& p) { p.pre.time = ExtNat::fin(0); });
        }
        rep.counterexample = Counterexample{ce, render_binding(ce, u)};
    }
    return rep;
}

std::vector<RefineReport> check_obligations(const Annotation& ann, const Universe& u,
                                            const CheckConfig& cfg) {
    std::vector<RefineReport> out;
    for (const RefinementObligation& ob : ann.obligations)
        out.push_back(check_refinement(ob.lhs, ob.rhs, u, cfg, ob.name));
    return out;
}

RefineReport check_claim(const PredPtr& claim, const Annotation& ann, const Universe& u,
                         const CheckConfig& cfg, std::string name) {
    return check_refinement(claim, ann.pred, u, cfg, std::move(name));
}

RefineReport specialize_check(const PredPtr& strong, const PredPtr& weak, const Universe& u,
                              const CheckConfig& cfg, std::string name) {
    return check_refinement(weak, strong, u, cfg, std::move(name));
}

CrosscheckReport crosscheck(const StmtPtr& program, const Universe& u,
                            const std::map<std::string, PredPtr>& specs, const RunConfig& rc,
                            const Domain& dom) {
    CrosscheckReport out;
    LazyReport lr = run_lazy(program, u, rc);
    out.lazy_time = lr.lazy_time;
    out.stability = lr.stability;
    if (lr.stability == Stability::Unstable) {
        out.agree = false;
        out.detail = "the lazy run is unstable: " + lr.instability;
        return out;
    }

    Annotation ann = annotate(program, specs, u);

    Binding b;
    b.pre = rc.initial ? *rc.initial : State::zeros(u);
    b.pre.time = ExtNat::fin(0);
    b.post = lr.final_clamped;
    b.pre_need = lr.pre_need;
    b.post_need = NeedState::all(u, false);
    b.obs.assign(u.print_count, 0);
    for (const TraceEvent& ev : lr.trace)
        if (ev.kind == EventKind::Print && ev.obs_index >= 0 &&
            static_cast<std::size_t>(ev.obs_index) < b.obs.size())
            b.obs[ev.obs_index] = ev.value;

    if (lr.stability == Stability::FuelStable) {
        // The truncated store is meaningless, so only the time account can be
        // compared: evaluate the annotation's own t' definition.
        auto defs = extract_definitions(conjuncts_of(ann.pred), u);
        if (!defs.post_time) {
            out.agree = false;
            out.detail = "the annotation does not define the final time";
            return out;
        }
        try {
            ExtNat t = eval_term(**defs.post_time, b, dom).as_time();
            out.satisfying_times = {t};
            out.agree = t == ExtNat::fin(lr.lazy_time);
            if (!out.agree)
                out.detail = "annotation time " + to_string(t) + " vs lazy run " +
                             std::to_string(lr.lazy_time);
        } catch (const Error& err) {
            out.agree = false;
            out.detail = std::string("could not evaluate the time account: ") + err.what();
        }
        return out;
    }

    std::vector<ExtNat> candidates;
    for (std::size_t k = 0; k <= lr.trace.size() + 2; ++k) candidates.push_back(ExtNat::fin(k));
    candidates.push_back(ExtNat::inf());
    for (ExtNat cand : candidates) {
        b.post.time = cand;
        try {
            if (eval_pred(*ann.pred, b, dom)) out.satisfying_times.push_back(cand);
        } catch (const Error& err) {
            if (structural_error(err.kind())) throw;
        }
    }
    out.agree = out.satisfying_times.size() == 1 &&
                out.satisfying_times[0] == ExtNat::fin(lr.lazy_time);
    if (!out.agree) {
        std::ostringstream os;
        os << "annotation accepts {";
        for (std::size_t i = 0; i < out.satisfying_times.size(); ++i)
            os << (i ? ", " : "") << to_string(out.satisfying_times[i]);
        os << "} vs lazy run " << lr.lazy_time;
        out.detail = os.str();
    }
    return out;
}

}  // namespace lazytime
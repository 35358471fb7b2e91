#include "lazytime/exec.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace lazytime {

namespace {

constexpr long long kMaxIndex = 1'000'000;

// Growable slot-indexed store. Every read is logged: the writer event when
// one exists, the initial location otherwise. Logs are mutable because the
// shared expression evaluator takes the store by const reference.
struct TrackedStore {
    const Universe* u = nullptr;
    std::vector<long long> scalars;
    std::vector<std::vector<long long>> arrays;
    std::vector<std::optional<std::size_t>> scalar_writer;
    std::vector<std::vector<std::optional<std::size_t>>> cell_writer;
    std::set<ExecLocation> poisoned;  // locations holding unrepresentable values

    mutable std::vector<std::size_t> dep_log;
    mutable std::vector<ExecLocation> init_log;
    mutable std::vector<ExecLocation> loc_log;

    void reset(const Universe& universe, const State& initial) {
        u = &universe;
        scalars = initial.scalars;
        arrays = initial.arrays;
        scalar_writer.assign(scalars.size(), std::nullopt);
        cell_writer.clear();
        for (const auto& a : arrays) cell_writer.emplace_back(a.size(), std::nullopt);
        poisoned.clear();
    }

    bool any_read_poisoned() const {
        for (const ExecLocation& loc : loc_log)
            if (poisoned.count(loc)) return true;
        return false;
    }

    void clear_logs() const {
        dep_log.clear();
        init_log.clear();
        loc_log.clear();
    }

    long long read_scalar(const std::string& name, SourceSpan sp) const {
        auto slot = u->scalar_slot(name);
        if (!slot) throw Error(ErrorKind::UniverseMismatch, "unknown scalar '" + name + "'", sp);
        ExecLocation loc{false, static_cast<int>(*slot), 0};
        loc_log.push_back(loc);
        if (scalar_writer[*slot])
            dep_log.push_back(*scalar_writer[*slot]);
        else
            init_log.push_back(loc);
        return scalars[*slot];
    }

    long long read_cell(const std::string& name, long long idx, SourceSpan sp) const {
        auto slot = u->array_slot(name);
        if (!slot) throw Error(ErrorKind::UniverseMismatch, "unknown array '" + name + "'", sp);
        if (idx < 0) throw Error(ErrorKind::IndexOutOfRange, "negative array index", sp);
        if (idx > kMaxIndex) throw Error(ErrorKind::DomainTooLarge, "array index too large", sp);
        ExecLocation loc{true, static_cast<int>(*slot), idx};
        loc_log.push_back(loc);
        const auto& cells = arrays[*slot];
        if (idx >= static_cast<long long>(cells.size())) {
            init_log.push_back(loc);  // untouched cells hold 0
            return 0;
        }
        if (cell_writer[*slot][idx])
            dep_log.push_back(*cell_writer[*slot][idx]);
        else
            init_log.push_back(loc);
        return cells[idx];
    }

    void write_scalar(std::size_t slot, long long v, std::size_t event, bool poison) {
        scalars[slot] = v;
        scalar_writer[slot] = event;
        ExecLocation loc{false, static_cast<int>(slot), 0};
        if (poison)
            poisoned.insert(loc);
        else
            poisoned.erase(loc);
    }

    void write_cell(std::size_t slot, long long idx, long long v, std::size_t event, bool poison,
                    SourceSpan sp) {
        if (idx < 0) throw Error(ErrorKind::IndexOutOfRange, "negative array index", sp);
        if (idx > kMaxIndex) throw Error(ErrorKind::DomainTooLarge, "array index too large", sp);
        auto& cells = arrays[slot];
        if (idx >= static_cast<long long>(cells.size())) {
            cells.resize(idx + 1, 0);
            cell_writer[slot].resize(idx + 1, std::nullopt);
        }
        cells[idx] = v;
        cell_writer[slot][idx] = event;
        ExecLocation loc{true, static_cast<int>(slot), idx};
        if (poison)
            poisoned.insert(loc);
        else
            poisoned.erase(loc);
    }
};

// Arithmetic failures that poison a stored value rather than abort the run.
bool is_value_error(ErrorKind k) {
    return k == ErrorKind::Overflow || k == ErrorKind::InexactDivision ||
           k == ErrorKind::NegativeFactorial;
}

struct FuelExhausted {};

// One evaluated condition: the reads it performed.
struct Frame {
    std::vector<std::size_t> deps;
    std::vector<ExecLocation> inits;
    std::vector<ExecLocation> locs;
};

// Syntactic write set of a skipped loop body: exact cells for literal
// indices, the whole array otherwise.
struct WriteSet {
    std::set<ExecLocation> exact;
    std::set<int> whole_arrays;
    bool has_print = false;

    bool covers(const ExecLocation& loc) const {
        if (loc.is_cell && whole_arrays.count(loc.slot)) return true;
        return exact.count(loc) > 0;
    }
};

void collect_writes(const Stmt& s, const Universe& u, WriteSet& out) {
    if (std::get_if<Stmt::Ok>(&s.node) || std::get_if<Stmt::Stop>(&s.node)) return;
    if (const auto* a = std::get_if<Stmt::Assign>(&s.node)) {
        if (!a->target.index) {
            auto slot = u.scalar_slot(a->target.name);
            if (slot) out.exact.insert({false, static_cast<int>(*slot), 0});
            return;
        }
        auto slot = u.array_slot(a->target.name);
        if (!slot) return;
        if (const auto* lit = std::get_if<Expr::IntLit>(&a->target.index->node)) {
            out.exact.insert({true, static_cast<int>(*slot), lit->value});
        } else {
            out.whole_arrays.insert(static_cast<int>(*slot));
        }
        return;
    }
    if (const auto* i = std::get_if<Stmt::If>(&s.node)) {
        collect_writes(*i->then_branch, u, out);
        collect_writes(*i->else_branch, u, out);
        return;
    }
    if (const auto* w = std::get_if<Stmt::While>(&s.node)) {
        collect_writes(*w->body, u, out);
        return;
    }
    if (const auto* q = std::get_if<Stmt::Seq>(&s.node)) {
        collect_writes(*q->first, u, out);
        collect_writes(*q->second, u, out);
        return;
    }
    if (std::get_if<Stmt::Print>(&s.node)) {
        out.has_print = true;
        return;
    }
}

void flatten_seq(const StmtPtr& s, std::vector<StmtPtr>& out) {
    if (const auto* q = std::get_if<Stmt::Seq>(&s->node)) {
        flatten_seq(q->first, out);
        flatten_seq(q->second, out);
        return;
    }
    out.push_back(s);
}

struct Runner {
    const Universe& u;
    std::size_t fuel;
    bool eager;

    TrackedStore store;
    std::vector<TraceEvent> trace;
    bool consumer_mode = false;

    std::vector<Frame> scoped;      // enclosing if conditions
    std::vector<Frame> persistent;  // every loop condition evaluated so far

    std::vector<WriteSet> skipped;  // write sets of loops skipped after truncation
    SourceSpan skipped_print_span;

    Runner(const Universe& universe, std::size_t f, bool eager_mode, const State& initial)
        : u(universe), fuel(f), eager(eager_mode) {
        store.reset(universe, initial);
    }

    struct Evaled {
        Value val = Value::of_int(0);
        bool poisoned = false;
    };

    // Evaluates without forcing: an unrepresentable result (or one computed
    // from a poisoned location) yields a poisoned placeholder.
    Evaled eval_lazy(const ExprPtr& e) {
        store.clear_logs();
        try {
            Value v = detail::eval_expr_on(*e, store);
            return {v, store.any_read_poisoned()};
        } catch (const Error& err) {
            if (!is_value_error(err.kind())) throw;
            return {Value::of_int(0), true};
        }
    }

    // Evaluates at an observation point: a poisoned result is an error here.
    Evaled eval_forced(const ExprPtr& e, const char* what) {
        Evaled out = eval_lazy(e);
        if (out.poisoned)
            throw Error(ErrorKind::Overflow,
                        std::string(what) + " needs a value the machine cannot represent", e->span);
        return out;
    }

    Frame take_frame() {
        Frame f{store.dep_log, store.init_log, store.loc_log};
        return f;
    }

    TraceEvent& new_event(EventKind k, const Frame& reads) {
        if (!consumer_mode && trace.size() >= fuel) throw FuelExhausted{};
        TraceEvent ev;
        ev.id = trace.size();
        ev.kind = k;
        ev.consumer = consumer_mode;

        std::set<std::size_t> deps(reads.deps.begin(), reads.deps.end());
        std::set<std::size_t> ctrl;
        std::set<ExecLocation> inits(reads.inits.begin(), reads.inits.end());
        std::set<ExecLocation> ctrl_inits;
        std::set<ExecLocation> locs(reads.locs.begin(), reads.locs.end());
        for (const auto* frames : {&scoped, &persistent}) {
            for (const Frame& f : *frames) {
                ctrl.insert(f.deps.begin(), f.deps.end());
                ctrl_inits.insert(f.inits.begin(), f.inits.end());
                locs.insert(f.locs.begin(), f.locs.end());
            }
        }
        ev.data_deps.assign(deps.begin(), deps.end());
        ev.control_deps.assign(ctrl.begin(), ctrl.end());
        ev.initial_reads.assign(inits.begin(), inits.end());
        ev.initial_control_reads.assign(ctrl_inits.begin(), ctrl_inits.end());
        ev.read_locations.assign(locs.begin(), locs.end());
        trace.push_back(std::move(ev));
        return trace.back();
    }

    void exec(const StmtPtr& sp) {
        const Stmt& s = *sp;
        if (std::get_if<Stmt::Ok>(&s.node) || std::get_if<Stmt::Stop>(&s.node)) return;

        if (const auto* a = std::get_if<Stmt::Assign>(&s.node)) {
            if (!a->target.index) {
                Evaled rhs = eval_lazy(a->rhs);
                Frame reads = take_frame();
                auto slot = u.scalar_slot(a->target.name);
                if (!slot)
                    throw Error(ErrorKind::UniverseMismatch, "unknown scalar '" + a->target.name + "'",
                                a->target.span);
                TraceEvent& ev = new_event(EventKind::AssignScalar, reads);
                ev.target = {false, static_cast<int>(*slot), 0};
                ev.value = rhs.val.as_int();
                ev.poisoned = rhs.poisoned;
                store.write_scalar(*slot, ev.value, ev.id, ev.poisoned);
                return;
            }
            long long idx = eval_forced(a->target.index, "an assignment index").val.as_int();
            Frame reads = take_frame();
            Evaled rhs = eval_lazy(a->rhs);
            Frame rhs_reads = take_frame();
            reads.deps.insert(reads.deps.end(), rhs_reads.deps.begin(), rhs_reads.deps.end());
            reads.inits.insert(reads.inits.end(), rhs_reads.inits.begin(), rhs_reads.inits.end());
            reads.locs.insert(reads.locs.end(), rhs_reads.locs.begin(), rhs_reads.locs.end());
            auto slot = u.array_slot(a->target.name);
            if (!slot)
                throw Error(ErrorKind::UniverseMismatch, "unknown array '" + a->target.name + "'",
                            a->target.span);
            TraceEvent& ev = new_event(EventKind::AssignCell, reads);
            ev.target = {true, static_cast<int>(*slot), idx};
            ev.value = rhs.val.as_int();
            ev.poisoned = rhs.poisoned;
            store.write_cell(*slot, idx, ev.value, ev.id, ev.poisoned, a->target.span);
            return;
        }

        if (const auto* i = std::get_if<Stmt::If>(&s.node)) {
            bool c = eval_forced(i->cond, "a condition").val.as_bool();
            scoped.push_back(take_frame());
            exec(c ? i->then_branch : i->else_branch);
            scoped.pop_back();
            return;
        }

        if (const auto* w = std::get_if<Stmt::While>(&s.node)) {
            if (consumer_mode) {
                // A loop after truncation is not run; remember what it could
                // have done so the stability verdict can account for it.
                WriteSet ws;
                collect_writes(*w->body, u, ws);
                if (ws.has_print) skipped_print_span = s.span;
                skipped.push_back(std::move(ws));
                return;
            }
            while (true) {
                bool c = eval_forced(w->cond, "a loop condition").val.as_bool();
                // Everything executed after this point depends on this test:
                // the loop's continuation and its eventual exit both do.
                persistent.push_back(take_frame());
                if (!c) break;
                exec(w->body);
            }
            return;
        }

        if (const auto* q = std::get_if<Stmt::Seq>(&s.node)) {
            exec(q->first);
            exec(q->second);
            return;
        }

        if (const auto* p = std::get_if<Stmt::Print>(&s.node)) {
            long long v = eval_forced(p->arg, "print").val.as_int();
            Frame reads = take_frame();
            TraceEvent& ev = new_event(EventKind::Print, reads);
            ev.obs_index = p->obs_index;
            ev.value = v;
            return;
        }

        throw Error(ErrorKind::Runtime, "unhandled statement", s.span);
    }

    // Runs the program. Returns true when it completed without running out
    // of fuel. In lazy mode a truncated top-level statement is abandoned and
    // the remaining ones run in consumer mode.
    bool run(const StmtPtr& program) {
        std::vector<StmtPtr> elems;
        flatten_seq(program, elems);
        bool truncated = false;
        for (const StmtPtr& elem : elems) {
            try {
                exec(elem);
            } catch (const FuelExhausted&) {
                if (eager) return false;
                truncated = true;
                consumer_mode = true;
                scoped.clear();  // unwound out of any branch context
            }
        }
        return !truncated;
    }

    State clamped_state() const {
        State out = State::zeros(u);
        out.scalars = store.scalars;
        for (std::size_t s = 0; s < store.arrays.size(); ++s) {
            std::size_t n = std::min<std::size_t>(u.array_bound, store.arrays[s].size());
            for (std::size_t j = 0; j < n; ++j) out.arrays[s][j] = store.arrays[s][j];
        }
        return out;
    }
};

std::string describe_location(const ExecLocation& loc, const Universe& u) {
    if (!loc.is_cell) return u.scalars.at(loc.slot);
    return u.arrays.at(loc.slot) + "(" + std::to_string(loc.index) + ")";
}

}  // namespace

std::string ExecLocation::describe(const Universe& u) const { return describe_location(*this, u); }

std::string TraceEvent::describe(const Universe& u) const {
    std::ostringstream os;
    if (kind == EventKind::Print)
        os << "print#" << obs_index << " = " << value;
    else
        os << describe_location(target, u) << " := " << value;
    return os.str();
}

const char* to_string(Stability s) {
    switch (s) {
        case Stability::Exact: return "exact";
        case Stability::FuelStable: return "fuel-stable";
        case Stability::Unstable: return "unstable";
    }
    return "?";
}

EagerReport run_eager(const StmtPtr& program, const Universe& u, const RunConfig& cfg) {
    Runner r(u, cfg.fuel, true, cfg.initial ? *cfg.initial : State::zeros(u));
    EagerReport rep;
    rep.fuel_exceeded = !r.run(program);
    rep.events = r.trace.size();
    for (const TraceEvent& ev : r.trace)
        if (ev.kind == EventKind::Print) rep.printed.push_back(ev.value);
    if (!rep.fuel_exceeded) {
        rep.final_clamped = r.clamped_state();
        rep.final_clamped.time = ExtNat::fin(rep.events);
    }
    return rep;
}

LazyReport run_lazy(const StmtPtr& program, const Universe& u, const RunConfig& cfg) {
    Runner r(u, cfg.fuel, false, cfg.initial ? *cfg.initial : State::zeros(u));
    LazyReport rep;
    rep.diverged = !r.run(program);
    rep.trace = std::move(r.trace);

    // Demand closure from the print events plus any demanded final locations.
    std::set<std::size_t> seen;
    std::deque<std::size_t> work;
    for (const TraceEvent& ev : rep.trace) {
        if (ev.kind == EventKind::Print) {
            rep.printed.push_back(ev.value);
            if (seen.insert(ev.id).second) work.push_back(ev.id);
        }
    }
    std::vector<ExecLocation> unwritten_demands;
    if (cfg.final_demand) {
        auto root_for = [&](const ExecLocation& loc) {
            for (auto it = rep.trace.rbegin(); it != rep.trace.rend(); ++it) {
                if (it->kind != EventKind::Print && it->target == loc) {
                    if (seen.insert(it->id).second) work.push_back(it->id);
                    return;
                }
            }
            unwritten_demands.push_back(loc);
        };
        for (std::size_t s = 0; s < u.scalars.size(); ++s)
            if (cfg.final_demand->scalar(s)) root_for({false, static_cast<int>(s), 0});
        for (std::size_t a = 0; a < u.arrays.size(); ++a)
            for (std::size_t j = 0; j < u.array_bound; ++j)
                if (cfg.final_demand->cell(a, static_cast<long long>(j)))
                    root_for({true, static_cast<int>(a), static_cast<long long>(j)});
    }
    while (!work.empty()) {
        const TraceEvent& ev = rep.trace[work.front()];
        work.pop_front();
        for (const auto* deps : {&ev.data_deps, &ev.control_deps})
            for (std::size_t d : *deps)
                if (seen.insert(d).second) work.push_back(d);
    }
    rep.closure.assign(seen.begin(), seen.end());
    rep.lazy_time = rep.closure.size();

    rep.pre_need = NeedState::all(u, false);
    for (const ExecLocation& loc : unwritten_demands) {
        if (!loc.is_cell)
            rep.pre_need.set_scalar(loc.slot, true);
        else
            rep.pre_need.set_cell(loc.slot, loc.index, true);
    }
    for (std::size_t id : rep.closure) {
        const TraceEvent& ev = rep.trace[id];
        for (const auto* inits : {&ev.initial_reads, &ev.initial_control_reads}) {
            for (const ExecLocation& loc : *inits) {
                if (!loc.is_cell)
                    rep.pre_need.set_scalar(loc.slot, true);
                else if (loc.index >= 0 && loc.index < static_cast<long long>(u.array_bound))
                    rep.pre_need.set_cell(loc.slot, loc.index, true);
            }
        }
    }

    rep.final_clamped = r.clamped_state();
    rep.final_clamped.time = ExtNat::fin(rep.lazy_time);

    if (!rep.diverged) {
        rep.stability = Stability::Exact;
        return rep;
    }

    // The truncated loop ran for `fuel` events; had it kept going, anything
    // derived from its late store could differ. Flag the report unstable when
    // (1) the closure reaches the last quarter of the truncated run,
    // (2) a post-truncation statement read something written there,
    // (3) a post-truncation statement read a location a skipped loop writes,
    // (4) a skipped loop contains a print.
    std::size_t pre_events = 0;
    for (const TraceEvent& ev : rep.trace)
        if (!ev.consumer) ++pre_events;
    std::size_t window = pre_events * cfg.window_percent / 100 + 1;
    std::size_t window_lo = pre_events - std::min(pre_events, window);

    auto in_window = [&](std::size_t id) { return id >= window_lo && id < pre_events; };

    rep.stability = Stability::FuelStable;
    auto unstable = [&](std::string why) {
        rep.stability = Stability::Unstable;
        rep.instability = std::move(why);
    };

    for (std::size_t id : rep.closure) {
        if (in_window(id)) {
            unstable("the demand closure reaches the truncated loop's final events (" +
                     rep.trace[id].describe(u) + ")");
            return rep;
        }
    }
    for (const TraceEvent& ev : rep.trace) {
        if (!ev.consumer) continue;
        for (const auto* deps : {&ev.data_deps, &ev.control_deps}) {
            for (std::size_t d : *deps) {
                if (in_window(d)) {
                    unstable("a statement after the truncated loop read " +
                             rep.trace[d].describe(u) + " from its final events");
                    return rep;
                }
            }
        }
        for (const ExecLocation& loc : ev.read_locations) {
            for (const WriteSet& ws : r.skipped) {
                if (ws.covers(loc)) {
                    unstable("a statement read " + loc.describe(u) +
                             ", which a skipped loop writes");
                    return rep;
                }
            }
        }
    }
    for (const WriteSet& ws : r.skipped) {
        if (ws.has_print) {
            unstable("a loop skipped after truncation contains a print");
            return rep;
        }
    }
    return rep;
}

}  // namespace lazytime
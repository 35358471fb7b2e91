#pragma once

// Operational execution. Eager runs count every assignment and print against
// a fuel budget. Lazy runs build a dependency-tracked trace, then take the
// demand closure of the print events: lazy time is the closure size. A loop
// that exhausts fuel is truncated; the statements after it still run
// (consumer mode) against the store the loop left behind, and the report
// says whether that truncation could have changed the answer.
//
// Integers are conceptually unbounded; the machine uses 64 bits. A value the
// machine cannot represent poisons its location instead of failing the run,
// and the error surfaces only if that value is ever observed (printed, used
// in a condition, or used as an index). Divergent programs can therefore run
// to their fuel bound even though their stores outgrow 64 bits.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lazytime/ast.hpp"

namespace lazytime {

struct ExecLocation {
    bool is_cell = false;
    int slot = 0;
    long long index = 0;

    auto operator<=>(const ExecLocation&) const = default;
    std::string describe(const Universe& u) const;
};

enum class EventKind { AssignScalar, AssignCell, Print };

struct TraceEvent {
    std::size_t id = 0;
    EventKind kind = EventKind::AssignScalar;
    ExecLocation target;  // written location; unused for prints
    int obs_index = -1;
    long long value = 0;
    bool consumer = false;  // created after a loop was truncated
    bool poisoned = false;  // value overflowed 64 bits; errors if ever observed

    std::vector<std::size_t> data_deps;     // events whose writes this one read
    std::vector<std::size_t> control_deps;  // events read by enclosing conditions
    std::vector<ExecLocation> initial_reads;          // initial-store data reads
    std::vector<ExecLocation> initial_control_reads;  // initial-store condition reads
    std::vector<ExecLocation> read_locations;         // every location this event read

    std::string describe(const Universe& u) const;
};

enum class Stability { Exact, FuelStable, Unstable };

const char* to_string(Stability s);

struct LazyReport {
    std::vector<TraceEvent> trace;
    std::vector<std::size_t> closure;  // demanded event ids, ascending
    std::size_t lazy_time = 0;         // closure size
    std::vector<long long> printed;    // print values in event order
    NeedState pre_need;                // demanded initial locations (clamped to N)
    State final_clamped;               // final store clamped to the array bound
    bool diverged = false;
    Stability stability = Stability::Exact;
    std::string instability;  // reason with the offending location, when Unstable
};

struct EagerReport {
    bool fuel_exceeded = false;
    std::size_t events = 0;  // the eager time when the run completed
    std::vector<long long> printed;
    State final_clamped;
};

struct RunConfig {
    std::size_t fuel = 10000;
    std::size_t window_percent = 25;  // stability safety window, % of the truncated trace
    std::optional<State> initial;     // zeros when absent

    // Extra demand-closure roots: final locations whose values are wanted in
    // addition to whatever the program prints. Each demanded location roots
    // its last writer; a demanded location the program never wrote shows up
    // in pre_need instead. Lazy mode only.
    std::optional<NeedState> final_demand;
};

EagerReport run_eager(const StmtPtr& program, const Universe& u, const RunConfig& cfg = {});
LazyReport run_lazy(const StmtPtr& program, const Universe& u, const RunConfig& cfg = {});

}  // namespace lazytime
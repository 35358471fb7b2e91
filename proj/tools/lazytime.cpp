// lazytime: execute, annotate, and check small imperative programs whose
// semantics carry explicit time and need variables.
//
//   run        eager or lazy execution report
//   annotate   the timed predicate of each statement and of the program
//   check      loop obligations plus an optional whole-program claim
//   crosscheck operational lazy time vs the annotation's timing
//
// Exit codes: 0 ok / holds / agree (fuel-stable counts as ok), 1 parse or
// runtime error, 2 unstable run or crosscheck disagreement, 3 eager fuel
// exhaustion, 4 refinement failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lazytime/annotator.hpp"
#include "lazytime/ast.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/parser.hpp"
#include "lazytime/predicate.hpp"
#include "lazytime/refine.hpp"

using json = nlohmann::ordered_json;
using namespace lazytime;

namespace {

struct Options {
    std::string program_path;
    std::string specs_path;
    std::string claim;
    std::size_t array_bound = 8;
    std::size_t fuel = 10000;
    std::uint64_t seed = 1;
    std::uint64_t samples = 10000;
    unsigned jobs = 0;
    bool eager = false;
    bool as_json = false;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Runtime, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ParseResult load_program(const Options& opt) {
    ParseResult pr = parse_program(slurp(opt.program_path), opt.array_bound);
    for (const std::string& w : pr.warnings) std::cerr << "warning: " << w << '\n';
    return pr;
}

std::map<std::string, PredPtr> load_specs(const Options& opt) {
    if (opt.specs_path.empty()) return {};
    return parse_spec(slurp(opt.specs_path));
}

int report_error(const Error& e) {
    std::cerr << "error: " << e.what() << " [" << to_string(e.kind()) << "]";
    if (e.span() && e.span()->line > 0)
        std::cerr << " at " << e.span()->line << ':' << e.span()->column;
    std::cerr << '\n';
    return 1;
}

json time_json(ExtNat t) {
    if (t.is_inf()) return json("inf");
    return json{{"fin", t.finite()}};
}

std::string time_text(ExtNat t) {
    return t.is_inf() ? std::string("inf") : std::to_string(t.finite());
}

// ----- run ------------------------------------------------------------

int cmd_run(const Options& opt) {
    ParseResult pr = load_program(opt);
    RunConfig rc;
    rc.fuel = opt.fuel;

    json out;
    int code = 0;
    if (opt.eager) {
        EagerReport rep = run_eager(pr.program, pr.universe, rc);
        out["mode"] = "eager";
        if (rep.fuel_exceeded) {
            out["time"] = json{{"fuelExceeded", opt.fuel}};
            code = 3;
        } else {
            out["time"] = json{{"fin", rep.events}};
        }
        out["printed"] = rep.printed;
        out["stability"] = nullptr;
        out["neededEvents"] = nullptr;
        if (!opt.as_json) {
            std::cout << "mode: eager\n";
            if (rep.fuel_exceeded)
                std::cout << "time: fuel exceeded after " << opt.fuel << " events\n";
            else
                std::cout << "time: " << rep.events << '\n';
            std::cout << "printed:";
            for (long long v : rep.printed) std::cout << ' ' << v;
            std::cout << '\n';
        }
    } else {
        LazyReport rep = run_lazy(pr.program, pr.universe, rc);
        out["mode"] = "lazy";
        out["time"] = json{{"fin", rep.lazy_time}};
        out["printed"] = rep.printed;
        out["stability"] = to_string(rep.stability);
        out["neededEvents"] = rep.closure;
        if (rep.stability == Stability::Unstable) code = 2;
        if (!opt.as_json) {
            std::cout << "mode: lazy\n";
            std::cout << "time: " << rep.lazy_time << '\n';
            std::cout << "printed:";
            for (long long v : rep.printed) std::cout << ' ' << v;
            std::cout << '\n';
            std::cout << "stability: " << to_string(rep.stability) << '\n';
            std::cout << "needed events (" << rep.closure.size() << "):";
            if (rep.closure.empty()) std::cout << " none";
            const std::size_t shown = std::min<std::size_t>(rep.closure.size(), 32);
            for (std::size_t k = 0; k < shown; ++k) std::cout << ' ' << rep.closure[k];
            if (shown < rep.closure.size()) std::cout << " ...";
            std::cout << '\n';
            if (rep.stability == Stability::Unstable)
                std::cout << "reason: " << rep.instability << '\n';
        }
    }
    if (opt.as_json) std::cout << out.dump(2) << '\n';
    return code;
}

// ----- annotate -------------------------------------------------------

std::vector<StmtPtr> top_level(const StmtPtr& s) {
    if (const auto* seq = std::get_if<Stmt::Seq>(&s->node)) {
        auto out = top_level(seq->first);
        auto rest = top_level(seq->second);
        out.insert(out.end(), rest.begin(), rest.end());
        return out;
    }
    return {s};
}

int cmd_annotate(const Options& opt) {
    ParseResult pr = load_program(opt);
    auto specs = load_specs(opt);
    auto annotate_fn = opt.eager ? annotate_eager : annotate;

    Annotation whole = annotate_fn(pr.program, specs, pr.universe);
    std::string whole_text = to_text(*normalize(whole.pred));

    auto trimmed = [](std::string s) {
        while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
        return s;
    };

    json stmts = json::array();
    std::ostringstream text;
    for (const StmtPtr& s : top_level(pr.program)) {
        Annotation one = annotate_fn(s, specs, pr.universe);
        std::string src = trimmed(pretty_print(*s));
        std::string pred = to_text(*normalize(one.pred));
        stmts.push_back(json{{"source", src}, {"predicate", pred}});
        text << "-- " << src << '\n' << pred << "\n\n";
    }

    text << "== program\n" << whole_text << '\n';
    json obs = json::array();
    if (!whole.obligations.empty()) {
        text << "\n== obligations\n";
        for (const RefinementObligation& ob : whole.obligations) {
            std::string body = to_text(*normalize(ob.rhs));
            text << ob.name << " <== " << body << '\n';
            obs.push_back(json{{"name", ob.name},
                               {"spec", to_text(*normalize(ob.lhs))},
                               {"body", body}});
        }
    }

    if (opt.as_json) {
        json out;
        out["mode"] = opt.eager ? "eager" : "lazy";
        out["statements"] = stmts;
        out["program"] = whole_text;
        out["obligations"] = obs;
        std::cout << out.dump(2) << '\n';
    } else {
        std::cout << text.str();
    }
    return 0;
}

// ----- check ----------------------------------------------------------

json state_json(const State& st, const Universe& u, bool primed) {
    json out;
    for (std::size_t s = 0; s < u.scalars.size(); ++s)
        out[u.scalars[s] + (primed ? "'" : "")] = st.scalars[s];
    for (std::size_t a = 0; a < u.arrays.size(); ++a)
        out[u.arrays[a] + (primed ? "'" : "")] = st.arrays[a];
    out[primed ? "t'" : "t"] = time_json(st.time);
    return out;
}

json needs_json(const NeedState& n, const Universe& u, bool primed) {
    json out = json::array();
    const char* tick = primed ? "'" : "";
    for (std::size_t s = 0; s < u.scalars.size(); ++s)
        if (n.scalar(s)) out.push_back(u.scalars[s] + tick);
    for (std::size_t a = 0; a < u.arrays.size(); ++a)
        for (std::size_t j = 0; j < u.array_bound; ++j)
            if (n.cell(a, static_cast<long long>(j)))
                out.push_back(u.arrays[a] + tick + "(" + std::to_string(j) + ")");
    return out;
}

json counterexample_json(const Counterexample& ce, const Universe& u) {
    json out;
    out["pre"] = state_json(ce.binding.pre, u, false);
    out["post"] = state_json(ce.binding.post, u, true);
    out["needBefore"] = needs_json(ce.binding.pre_need, u, false);
    out["needAfter"] = needs_json(ce.binding.post_need, u, true);
    out["printed"] = ce.binding.obs;
    return out;
}

json refine_json(const RefineReport& rep, const Universe& u, bool exhaustive) {
    json out;
    out["claim"] = rep.name;
    out["verdict"] =
        rep.holds ? (exhaustive ? "holds(exhaustive)" : "holds(sampled)") : "fails";
    out["bindingsChecked"] = rep.bindings_checked;
    out["counterexample"] =
        rep.counterexample ? counterexample_json(*rep.counterexample, u) : json(nullptr);
    out["seed"] = rep.seed;
    return out;
}

void refine_text(const RefineReport& rep, bool exhaustive) {
    std::cout << rep.name << ": "
              << (rep.holds ? (exhaustive ? "holds (exhaustive)" : "holds (sampled)")
                            : "fails")
              << ", " << rep.bindings_checked << " bindings checked\n";
    if (rep.counterexample) {
        std::istringstream lines(rep.counterexample->text);
        for (std::string line; std::getline(lines, line);) std::cout << "  " << line << '\n';
    }
}

int cmd_check(const Options& opt) {
    ParseResult pr = load_program(opt);
    auto specs = load_specs(opt);
    Annotation ann = opt.eager ? annotate_eager(pr.program, specs, pr.universe)
                               : annotate(pr.program, specs, pr.universe);

    CheckConfig cfg;
    cfg.domain.array_bound = pr.universe.array_bound;
    cfg.samples = opt.samples;
    cfg.seed = opt.seed;
    cfg.jobs = opt.jobs;

    std::vector<RefineReport> reports = check_obligations(ann, pr.universe, cfg);
    if (!opt.claim.empty()) {
        PredPtr claim = parse_predicate(opt.claim);
        reports.push_back(check_claim(claim, ann, pr.universe, cfg, opt.claim));
    }

    bool all_hold = true;
    json out = json::array();
    for (const RefineReport& rep : reports) {
        all_hold = all_hold && rep.holds;
        if (opt.as_json)
            out.push_back(refine_json(rep, pr.universe, false));
        else
            refine_text(rep, false);
    }
    if (opt.as_json) std::cout << out.dump(2) << '\n';
    return all_hold ? 0 : 4;
}

// ----- crosscheck -----------------------------------------------------

int cmd_crosscheck(const Options& opt) {
    ParseResult pr = load_program(opt);
    auto specs = load_specs(opt);
    RunConfig rc;
    rc.fuel = opt.fuel;
    Domain dom;
    dom.array_bound = pr.universe.array_bound;

    CrosscheckReport rep = crosscheck(pr.program, pr.universe, specs, rc, dom);

    if (opt.as_json) {
        json times = json::array();
        for (ExtNat t : rep.satisfying_times) times.push_back(time_json(t));
        json out;
        out["agree"] = rep.agree;
        out["lazyTime"] = rep.lazy_time;
        out["annotationTimes"] = times;
        out["stability"] = to_string(rep.stability);
        out["detail"] = rep.detail;
        std::cout << out.dump(2) << '\n';
    } else {
        std::cout << "lazy time: " << rep.lazy_time << '\n';
        std::cout << "annotation accepts:";
        if (rep.satisfying_times.empty()) std::cout << " nothing";
        for (ExtNat t : rep.satisfying_times) std::cout << ' ' << time_text(t);
        std::cout << '\n';
        std::cout << "stability: " << to_string(rep.stability) << '\n';
        std::cout << (rep.agree ? "agree" : "disagree") << '\n';
        if (!rep.agree && !rep.detail.empty()) std::cout << "detail: " << rep.detail << '\n';
    }
    return rep.agree ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"timed predicate semantics for a small imperative language"};
    app.require_subcommand(1);

    Options opt;
    if (const char* env = std::getenv("LAZYTIME_FUEL")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && *env != '\0')
            opt.fuel = static_cast<std::size_t>(v);
        else
            std::cerr << "warning: ignoring invalid LAZYTIME_FUEL '" << env << "'\n";
    }

    bool lazy_flag = false;  // default; kept so both flags can be rejected

    auto add_common = [&](CLI::App* sub, bool modes, bool fuel) {
        sub->add_option("program", opt.program_path, "program file (.imp)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--array-bound", opt.array_bound, "modeled array prefix length")
            ->capture_default_str();
        sub->add_flag("--json", opt.as_json, "machine-readable output");
        if (modes) {
            auto* e = sub->add_flag("--eager", opt.eager, "eager semantics");
            auto* l = sub->add_flag("--lazy", lazy_flag, "lazy semantics (default)");
            e->excludes(l);
        }
        if (fuel)
            sub->add_option("--fuel", opt.fuel, "event budget before truncation")
                ->capture_default_str();
    };
    auto add_specs = [&](CLI::App* sub) {
        sub->add_option("--specs", opt.specs_path, "spec definitions file (.spec)")
            ->check(CLI::ExistingFile);
    };

    CLI::App* run = app.add_subcommand("run", "execute a program");
    add_common(run, true, true);

    CLI::App* ann = app.add_subcommand("annotate", "print the timed predicate");
    add_common(ann, true, false);
    add_specs(ann);

    CLI::App* chk = app.add_subcommand("check", "check loop obligations and claims");
    add_common(chk, true, false);
    add_specs(chk);
    chk->add_option("--claim", opt.claim, "predicate the whole program must refine");
    chk->add_option("--seed", opt.seed, "sampling seed")->capture_default_str();
    chk->add_option("--samples", opt.samples, "store samples per obligation")
        ->capture_default_str();
    chk->add_option("--jobs", opt.jobs, "worker threads (0 = all cores)");

    CLI::App* xck = app.add_subcommand("crosscheck", "compare lazy run against annotation");
    add_common(xck, false, true);
    add_specs(xck);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(opt);
        if (*ann) return cmd_annotate(opt);
        if (*chk) return cmd_check(opt);
        return cmd_crosscheck(opt);
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

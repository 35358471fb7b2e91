// acceptance gate: eight end-to-end criteria, one verdict line each.
// Exits nonzero if any criterion fails or overruns its time budget.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lazytime/annotator.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/parser.hpp"
#include "lazytime/predicate.hpp"
#include "lazytime/refine.hpp"

using json = nlohmann::json;
using namespace lazytime;

namespace {

std::string fx(const std::string& name) {
    return std::string(LAZYTIME_FIXTURES) + "/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult cli(const std::string& args) {
    std::string cmd = std::string(LAZYTIME_BIN) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {};
    std::string out;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) out += buf;
    int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

int failures = 0;

void criterion(int n, const std::string& label, double budget_s,
               const std::function<bool(std::string&)>& fn) {
    std::string detail;
    auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_s) {
        ok = false;
        if (!detail.empty()) detail += "; ";
        detail += "over budget (" + std::to_string(budget_s) + "s)";
    }
    char line[512];
    std::snprintf(line, sizeof line, "[%s] %d) %s (%.2fs)%s%s", ok ? "PASS" : "FAIL", n,
                  label.c_str(), secs, detail.empty() ? "" : ": ", detail.c_str());
    std::cout << line << std::endl;
    if (!ok) ++failures;
}

// --- 4: annotation goldens ---------------------------------------------

bool golden(const std::string& prog, const std::string& want_text, const Universe& u,
            std::string& detail) {
    auto pr = parse_program(prog, u.array_bound);
    StmtPtr body = pr.program;
    if (auto* q = std::get_if<Stmt::Seq>(&body->node))
        if (std::holds_alternative<Stmt::Stop>(q->second->node)) body = q->first;
    auto mine = normalize(annotate(body, {}, u).pred);
    auto want = normalize(link(parse_predicate(want_text), u));
    if (pred_equal(*mine, *want)) return true;
    detail += "mismatch for '" + prog + "'; ";
    return false;
}

// --- 7: randomized properties -------------------------------------------

struct ProgramGen {
    std::mt19937_64 rng;
    explicit ProgramGen(std::uint64_t seed) : rng(seed) {}

    long long pick(long long lo, long long hi) {
        return lo + static_cast<long long>(rng() % static_cast<unsigned long long>(hi - lo + 1));
    }
    std::string expr(int depth) {
        if (depth == 0 || rng() % 3 == 0) {
            switch (rng() % 4) {
                case 0: return std::to_string(pick(-2, 3));
                case 1: return "x";
                case 2: return "y";
                default: return "a(" + std::to_string(pick(0, 3)) + ")";
            }
        }
        switch (rng() % 3) {
            case 0: return "(" + expr(depth - 1) + " + " + expr(depth - 1) + ")";
            case 1: return "(" + expr(depth - 1) + " - " + expr(depth - 1) + ")";
            default: return "(" + std::to_string(pick(2, 3)) + " * " + expr(depth - 1) + ")";
        }
    }
    std::string statement(bool allow_if) {
        unsigned roll = rng() % 10;
        if (roll < 4)
            return std::string(rng() % 2 ? "x" : "y") + " := " + expr(2);
        if (roll < 7) return "a(" + std::to_string(pick(0, 3)) + ") := " + expr(2);
        if (roll < 9 || !allow_if) return "print " + expr(1);
        std::string cond = expr(1) + (rng() % 2 ? " < " : " = ") + expr(1);
        return "if " + cond + " then " + statement(false) + " else " + statement(false) + " fi";
    }
    std::string program(bool allow_if, int max_len) {
        int n = static_cast<int>(pick(1, max_len));
        std::string out;
        for (int k = 0; k < n; ++k) out += statement(allow_if) + ";\n";
        out += "stop";
        return out;
    }
};

struct Loc {
    bool cell;
    char name;
    long long idx;
    auto operator<=>(const Loc&) const = default;
};

bool oracle_reads(const Expr& e, std::set<Loc>& out) {
    if (const auto* v = std::get_if<Expr::Var>(&e.node)) {
        out.insert({false, v->name[0], 0});
        return true;
    }
    if (const auto* c = std::get_if<Expr::ArrayRef>(&e.node)) {
        const auto* lit = std::get_if<Expr::IntLit>(&c->index->node);
        if (!lit) return false;
        out.insert({true, c->name[0], lit->value});
        return true;
    }
    if (const auto* un = std::get_if<Expr::Unary>(&e.node)) return oracle_reads(*un->arg, out);
    if (const auto* bin = std::get_if<Expr::Binary>(&e.node))
        return oracle_reads(*bin->lhs, out) && oracle_reads(*bin->rhs, out);
    return true;  // literals
}

void flatten_stmts(const StmtPtr& s, std::vector<StmtPtr>& out) {
    if (auto* q = std::get_if<Stmt::Seq>(&s->node)) {
        flatten_stmts(q->first, out);
        flatten_stmts(q->second, out);
        return;
    }
    out.push_back(s);
}

bool prop_lazy_le_eager(std::string& detail) {
    ProgramGen gen(2024);
    for (int round = 0; round < 1000; ++round) {
        auto pr = parse_program(gen.program(true, 8), 4);
        auto eg = run_eager(pr.program, pr.universe);
        auto lz = run_lazy(pr.program, pr.universe);
        if (eg.fuel_exceeded || lz.diverged || lz.lazy_time > eg.events ||
            lz.printed != eg.printed) {
            detail += "(a) fails at round " + std::to_string(round) + "; ";
            return false;
        }
    }
    return true;
}

bool prop_crosscheck(std::string& detail) {
    ProgramGen gen(4711);
    Domain dom;
    dom.array_bound = 4;
    for (int round = 0; round < 1000; ++round) {
        auto pr = parse_program(gen.program(true, 6), 4);
        auto rep = crosscheck(pr.program, pr.universe, {}, {}, dom);
        if (!rep.agree) {
            detail += "(b) disagrees at round " + std::to_string(round) + ": " + rep.detail + "; ";
            return false;
        }
    }
    return true;
}

bool prop_liveness(std::string& detail) {
    ProgramGen gen(90210);
    for (int round = 0; round < 1000; ++round) {
        auto pr = parse_program(gen.program(false, 8), 4);
        StmtPtr body = pr.program;
        if (auto* q = std::get_if<Stmt::Seq>(&body->node))
            if (std::holds_alternative<Stmt::Stop>(q->second->node)) body = q->first;
        std::vector<StmtPtr> stmts;
        flatten_stmts(body, stmts);

        NeedState post = NeedState::all(pr.universe, false);
        std::set<Loc> live;
        for (std::size_t s = 0; s < pr.universe.scalars.size(); ++s)
            if (gen.rng() % 2) {
                post.set_scalar(s, true);
                live.insert({false, pr.universe.scalars[s][0], 0});
            }
        for (std::size_t a = 0; a < pr.universe.arrays.size(); ++a)
            for (long long j = 0; j < 4; ++j)
                if (gen.rng() % 2) {
                    post.set_cell(a, j, true);
                    live.insert({true, pr.universe.arrays[a][0], j});
                }

        // independent backward pass
        for (auto it = stmts.rbegin(); it != stmts.rend(); ++it) {
            const Stmt& s = **it;
            if (const auto* p = std::get_if<Stmt::Print>(&s.node)) {
                oracle_reads(*p->arg, live);
            } else if (const auto* a = std::get_if<Stmt::Assign>(&s.node)) {
                Loc target{false, a->target.name[0], 0};
                if (a->target.index)
                    target = {true, a->target.name[0],
                              std::get<Expr::IntLit>(a->target.index->node).value};
                if (live.erase(target) > 0) oracle_reads(*a->rhs, live);
            }
        }

        NeedState mine = syntactic_needs(body, pr.universe, post);
        bool same = true;
        for (std::size_t s = 0; s < pr.universe.scalars.size(); ++s)
            same = same && mine.scalar(s) ==
                               (live.count({false, pr.universe.scalars[s][0], 0}) > 0);
        for (std::size_t a = 0; a < pr.universe.arrays.size(); ++a)
            for (long long j = 0; j < 4; ++j)
                same = same && mine.cell(a, j) ==
                                   (live.count({true, pr.universe.arrays[a][0], j}) > 0);
        if (!same) {
            detail += "(c) liveness mismatch at round " + std::to_string(round) + "; ";
            return false;
        }
    }
    return true;
}

bool prop_compose(std::string& detail) {
    std::mt19937_64 rng(31337);
    Universe u;
    u.scalars = {"x", "y"};
    u.array_bound = 2;
    u.print_count = 2;

    auto closed_expr = [&]() -> ExprPtr {
        switch (rng() % 6) {
            case 0: return mk_int(0);
            case 1: return mk_int(1);
            case 2: return mk_var("x");
            case 3: return mk_var("y");
            case 4: return mk_binary(BinOp::Mul, mk_var("x"), mk_var("y"));
            default: return mk_binary(BinOp::Mul, mk_var("x"), mk_var("x"));
        }
    };
    auto statement = [&](int obs_index) -> StmtPtr {
        if (rng() % 4 < 3) {
            Lvalue tgt{rng() % 2 ? "x" : "y", nullptr, {}};
            return mk_assign(std::move(tgt), closed_expr());
        }
        return mk_print(closed_expr(), obs_index);
    };

    Domain d;
    d.array_bound = 2;
    d.scalar_values = {0, 1};
    d.time_samples = {ExtNat::fin(0), ExtNat::fin(1), ExtNat::inf()};

    for (int round = 0; round < 20; ++round) {
        auto a = annotate(statement(0), {}, u).pred;
        auto b = annotate(statement(1), {}, u).pred;
        auto one = one_point_compose(a, b, u);
        if (!one) {
            detail += "(d) one-point failed at round " + std::to_string(round) + "; ";
            return false;
        }
        auto enumerated = p_compose(a, b);
        for (int xv = 0; xv <= 1; ++xv)
            for (int yv = 0; yv <= 1; ++yv)
                for (int xp = 0; xp <= 1; ++xp)
                    for (int yp = 0; yp <= 1; ++yp)
                        for (int needs = 0; needs < 16; ++needs)
                            for (ExtNat tpre : d.time_samples)
                                for (ExtNat tpost : d.time_samples)
                                    for (int obs = 0; obs < 4; ++obs) {
                                        Binding bind = zero_binding(u);
                                        bind.pre.scalars = {xv, yv};
                                        bind.post.scalars = {xp, yp};
                                        bind.pre.time = tpre;
                                        bind.post.time = tpost;
                                        bind.pre_need.set_scalar(0, needs & 1);
                                        bind.pre_need.set_scalar(1, needs & 2);
                                        bind.post_need.set_scalar(0, needs & 4);
                                        bind.post_need.set_scalar(1, needs & 8);
                                        bind.obs = {obs & 1, (obs >> 1) & 1};
                                        if (eval_pred(**one, bind, d) !=
                                            eval_pred(*enumerated, bind, d)) {
                                            detail += "(d) disagreement at round " +
                                                      std::to_string(round) + "; ";
                                            return false;
                                        }
                                    }
    }
    return true;
}

}  // namespace

int main() {
    criterion(1, "lazy run reaches past the infinite loop: time 9, prints 6", 1.0,
              [](std::string& d) {
                  auto r = cli("run --lazy " + fx("factorial3.imp") + " --json");
                  if (r.code != 0) {
                      d = "exit " + std::to_string(r.code);
                      return false;
                  }
                  json out = json::parse(r.out, nullptr, false);
                  return out["time"]["fin"] == 9 && out["printed"] == json::array({6});
              });

    criterion(2, "demanding fac(0) skips the loop and the dead assignment", 1.0,
              [](std::string& d) {
                  auto r = cli("run --lazy " + fx("factorial0.imp") + " --json");
                  if (r.code != 0) {
                      d = "exit " + std::to_string(r.code);
                      return false;
                  }
                  json out = json::parse(r.out, nullptr, false);
                  if (out["time"]["fin"] != 2 || out["printed"] != json::array({1})) {
                      d = "time/printed wrong";
                      return false;
                  }
                  for (const auto& id : out["neededEvents"])
                      if (id == 0) {
                          d = "closure kept the first assignment";
                          return false;
                      }
                  return true;
              });

    criterion(3, "eager run exhausts any fuel; eager claim t' = t + inf holds", 10.0,
              [](std::string& d) {
                  for (int fuel : {3, 10, 1000}) {
                      auto r = cli("run --eager --fuel " + std::to_string(fuel) + " " +
                                   fx("factorial3.imp") + " --json");
                      if (r.code != 3) {
                          d = "fuel " + std::to_string(fuel) + " exit " + std::to_string(r.code);
                          return false;
                      }
                      json out = json::parse(r.out, nullptr, false);
                      if (out["time"]["fuelExceeded"] != fuel) {
                          d = "fuel report wrong";
                          return false;
                      }
                  }
                  auto r = cli("check --eager " + fx("factorial3.imp") + " --specs " +
                               fx("loop_eager.spec") + " --claim \"t' = t + inf\" --json");
                  if (r.code != 0) {
                      d = "check exit " + std::to_string(r.code);
                      return false;
                  }
                  json out = json::parse(r.out, nullptr, false);
                  for (const auto& rep : out)
                      if (rep["verdict"] == "fails") {
                          d = rep["claim"].get<std::string>() + " fails";
                          return false;
                      }
                  return true;
              });

    criterion(4, "seven annotation goldens match structurally", 1.0, [](std::string& d) {
        Universe xy;
        xy.scalars = {"x", "y"};
        xy.array_bound = 2;
        Universe ay = xy;
        ay.scalars = {"y"};
        ay.arrays = {"x"};
        bool ok = true;
        ok &= golden("ok", "x' = x /\\ y' = y /\\ t' = t /\\ need x = need x' /\\ need y = need y'",
                     xy, d);
        ok &= golden("x := 3",
                     "x' = 3 /\\ y' = y /\\ t' = t + if need x' then 1 else 0 fi"
                     " /\\ ~ need x /\\ need y = need y'",
                     xy, d);
        ok &= golden("x := x + y",
                     "x' = x + y /\\ y' = y /\\ t' = t + if need x' then 1 else 0 fi"
                     " /\\ need x = need x' /\\ need y = (need x' \\/ need y')",
                     xy, d);
        ok &= golden("x(0) := 2",
                     "x'(0) = 2 /\\ x'(1) = x(1) /\\ y' = y"
                     " /\\ t' = t + if need x'(0) then 1 else 0 fi"
                     " /\\ ~ need x(0) /\\ need x(1) = need x'(1) /\\ need y = need y'",
                     ay, d);
        ok &= golden("x(0) := x(1)",
                     "x'(0) = x(1) /\\ x'(1) = x(1) /\\ y' = y"
                     " /\\ t' = t + if need x'(0) then 1 else 0 fi"
                     " /\\ ~ need x(0) /\\ need x(1) = (need x'(0) \\/ need x'(1))"
                     " /\\ need y = need y'",
                     ay, d);
        ok &= golden("x(0) := y",
                     "x'(0) = y /\\ x'(1) = x(1) /\\ y' = y"
                     " /\\ t' = t + if need x'(0) then 1 else 0 fi"
                     " /\\ ~ need x(0) /\\ need x(1) = need x'(1)"
                     " /\\ need y = (need x'(0) \\/ need y')",
                     ay, d);
        ok &= golden("if x = 0 then y := 0 else x := 0 fi",
                     "x' = if x = 0 then x else 0 fi /\\ y' = if x = 0 then 0 else y fi"
                     " /\\ t' = t + if x = 0 /\\ need y' then 1"
                     "              else if x != 0 /\\ need x' then 1 else 0 fi fi"
                     " /\\ need x = (need x' \\/ need y') /\\ need y = need y'",
                     xy, d);
        return ok;
    });

    criterion(5, "loop body refines its spec; halved cost yields a counterexample", 60.0,
              [](std::string& d) {
                  auto pr = parse_program(slurp(fx("factorial3.imp")), 6);
                  CheckConfig cfg;
                  cfg.domain.array_bound = 6;
                  cfg.samples = 10000;
                  cfg.seed = 1;

                  auto good = annotate(pr.program, parse_spec(slurp(fx("loop.spec"))), pr.universe);
                  auto reports = check_obligations(good, pr.universe, cfg);
                  if (reports.size() != 1 || !reports[0].holds || reports[0].counterexample) {
                      d = "obligation failed";
                      return false;
                  }
                  if (reports[0].bindings_checked < 10000) {
                      d = "only " + std::to_string(reports[0].bindings_checked) + " bindings";
                      return false;
                  }

                  auto bad = annotate(pr.program, parse_spec(slurp(fx("loop_mut.spec"))), pr.universe);
                  auto mutant = check_obligations(bad, pr.universe, cfg);
                  if (mutant.size() != 1 || mutant[0].holds || !mutant[0].counterexample) {
                      d = "mutant not rejected";
                      return false;
                  }
                  return true;
              });

    criterion(6, "whole-program claim t' = t + 9 holds and t' = t + 8 fails", 60.0,
              [](std::string& d) {
                  auto pr = parse_program(slurp(fx("factorial3.imp")), 6);
                  auto ann = annotate(pr.program, parse_spec(slurp(fx("loop.spec"))), pr.universe);
                  CheckConfig cfg;
                  cfg.domain.array_bound = 6;
                  cfg.samples = 10000;
                  cfg.seed = 1;
                  auto nine = check_claim(parse_predicate("t' = t + 9"), ann, pr.universe, cfg);
                  if (!nine.holds) {
                      d = "t' = t + 9 rejected";
                      return false;
                  }
                  auto eight = check_claim(parse_predicate("t' = t + 8"), ann, pr.universe, cfg);
                  if (eight.holds || !eight.counterexample) {
                      d = "t' = t + 8 not refuted";
                      return false;
                  }
                  return true;
              });

    criterion(7, "randomized properties: a, b, c, d", 120.0, [](std::string& d) {
        bool ok = true;
        ok &= prop_lazy_le_eager(d);
        ok &= prop_crosscheck(d);
        ok &= prop_liveness(d);
        ok &= prop_compose(d);
        return ok;
    });

    criterion(8, "fac(4): lazy time 11 equals the hand demand-trace account", 1.0,
              [](std::string& d) {
                  auto r = cli("run --lazy " + fx("factorial4.imp") + " --json");
                  if (r.code != 0) {
                      d = "exit " + std::to_string(r.code);
                      return false;
                  }
                  json out = json::parse(r.out, nullptr, false);
                  // two seed assignments, 2 demanded events per iteration, one print
                  long long hand = 1 + 1 + 2 * 4 + 1;
                  long long per_iteration_account = 2 * (4 - 0);
                  if (hand != 11 || per_iteration_account != 8) {
                      d = "oracle arithmetic";
                      return false;
                  }
                  if (out["time"]["fin"] != hand) {
                      d = "time " + out["time"].dump();
                      return false;
                  }
                  if (out["printed"] != json::array({24})) {
                      d = "printed " + out["printed"].dump();
                      return false;
                  }
                  return true;
              });

    std::cout << (failures == 0 ? "acceptance: all criteria hold"
                                : "acceptance: " + std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}

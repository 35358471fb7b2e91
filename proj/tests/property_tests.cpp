// randomized cross-validation: the two execution modes against each other,
// the annotation against the runs, liveness against an independent oracle,
// and one-point composition against brute enumeration

#include <doctest.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "lazytime/annotator.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/parser.hpp"
#include "lazytime/predicate.hpp"
#include "lazytime/refine.hpp"

using namespace lazytime;

namespace {

// Random loop-free programs over scalars x, y and array a (bound 4). The
// expression grammar keeps values small: multiplication only against a
// literal factor, no division, no factorial, so eager runs cannot overflow.
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
        if (roll < 4) {
            const char* tgt = rng() % 2 ? "x" : "y";
            return std::string(tgt) + " := " + expr(2);
        }
        if (roll < 7) return "a(" + std::to_string(pick(0, 3)) + ") := " + expr(2);
        if (roll < 9 || !allow_if) return "print " + expr(1);
        std::string cond = expr(1) + (rng() % 2 ? " < " : " = ") + expr(1);
        return "if " + cond + " then " + statement(false) + " else " + statement(false) +
               " fi";
    }

    std::string program(bool allow_if, int max_len) {
        int n = static_cast<int>(pick(1, max_len));
        std::string out;
        for (int k = 0; k < n; ++k) out += statement(allow_if) + ";\n";
        out += "stop";
        return out;
    }
};

StmtPtr strip_stop(const StmtPtr& program) {
    if (auto* q = std::get_if<Stmt::Seq>(&program->node))
        if (std::holds_alternative<Stmt::Stop>(q->second->node)) return q->first;
    return program;
}

void flatten_stmts(const StmtPtr& s, std::vector<StmtPtr>& out) {
    if (auto* q = std::get_if<Stmt::Seq>(&s->node)) {
        flatten_stmts(q->first, out);
        flatten_stmts(q->second, out);
        return;
    }
    out.push_back(s);
}

}  // namespace

TEST_SUITE("mode agreement") {
    TEST_CASE("lazy time never exceeds eager time") {
        ProgramGen gen(2024);
        for (int round = 0; round < 1000; ++round) {
            std::string src = gen.program(true, 8);
            CAPTURE(src);
            auto pr = parse_program(src, 4);
            auto eg = run_eager(pr.program, pr.universe);
            auto lz = run_lazy(pr.program, pr.universe);
            REQUIRE(!eg.fuel_exceeded);
            REQUIRE(!lz.diverged);
            CHECK(lz.stability == Stability::Exact);
            CHECK(lz.lazy_time <= eg.events);
            CHECK(lz.printed == eg.printed);
        }
    }

    TEST_CASE("appending a print cannot reduce lazy time") {
        ProgramGen gen(77);
        for (int round = 0; round < 300; ++round) {
            std::string body = gen.program(true, 6);
            std::string more = body;
            more.replace(more.rfind("stop"), 4, "print x;\nstop");
            auto base = parse_program(body, 4);
            auto extended = parse_program(more, 4);
            auto lz0 = run_lazy(base.program, base.universe);
            auto lz1 = run_lazy(extended.program, extended.universe);
            CAPTURE(body);
            CHECK(lz0.lazy_time <= lz1.lazy_time);
        }
    }

    TEST_CASE("annotation timing agrees with the lazy run") {
        ProgramGen gen(4711);
        Domain dom;
        dom.array_bound = 4;
        for (int round = 0; round < 1000; ++round) {
            std::string src = gen.program(true, 6);
            CAPTURE(src);
            auto pr = parse_program(src, 4);
            auto rep = crosscheck(pr.program, pr.universe, {}, {}, dom);
            REQUIRE_MESSAGE(rep.agree, rep.detail);
        }
    }
}

TEST_SUITE("liveness oracle") {
    namespace {
    struct Loc {
        bool cell;
        char name;
        long long idx;
        auto operator<=>(const Loc&) const = default;
    };

    void oracle_reads(const Expr& e, std::set<Loc>& out) {
        if (std::holds_alternative<Expr::IntLit>(e.node)) return;
        if (std::holds_alternative<Expr::BoolLit>(e.node)) return;
        if (const auto* v = std::get_if<Expr::Var>(&e.node)) {
            out.insert({false, v->name[0], 0});
            return;
        }
        if (const auto* c = std::get_if<Expr::ArrayRef>(&e.node)) {
            const auto* lit = std::get_if<Expr::IntLit>(&c->index->node);
            REQUIRE(lit != nullptr);
            out.insert({true, c->name[0], lit->value});
            return;
        }
        if (const auto* un = std::get_if<Expr::Unary>(&e.node)) {
            oracle_reads(*un->arg, out);
            return;
        }
        const auto& bin = std::get<Expr::Binary>(e.node);
        oracle_reads(*bin.lhs, out);
        oracle_reads(*bin.rhs, out);
    }

    // backward pass over a straight-line statement list
    std::set<Loc> oracle_needs(const std::vector<StmtPtr>& stmts, std::set<Loc> live) {
        for (auto it = stmts.rbegin(); it != stmts.rend(); ++it) {
            const Stmt& s = **it;
            if (std::holds_alternative<Stmt::Stop>(s.node)) {
                live.clear();
            } else if (const auto* p = std::get_if<Stmt::Print>(&s.node)) {
                oracle_reads(*p->arg, live);
            } else if (const auto* a = std::get_if<Stmt::Assign>(&s.node)) {
                Loc target{false, a->target.name[0], 0};
                if (a->target.index) {
                    const auto* lit = std::get_if<Expr::IntLit>(&a->target.index->node);
                    REQUIRE(lit != nullptr);
                    target = {true, a->target.name[0], lit->value};
                }
                bool demanded = live.erase(target) > 0;
                if (demanded) oracle_reads(*a->rhs, live);
            }
        }
        return live;
    }
    }  // namespace

    TEST_CASE("syntactic needs equal independent backward liveness") {
        ProgramGen gen(90210);
        for (int round = 0; round < 1000; ++round) {
            std::string src = gen.program(false, 8);
            CAPTURE(src);
            auto pr = parse_program(src, 4);
            StmtPtr body = strip_stop(pr.program);
            std::vector<StmtPtr> stmts;
            flatten_stmts(body, stmts);

            NeedState post = NeedState::all(pr.universe, false);
            std::set<Loc> live;
            for (std::size_t s = 0; s < pr.universe.scalars.size(); ++s) {
                if (gen.rng() % 2) {
                    post.set_scalar(s, true);
                    live.insert({false, pr.universe.scalars[s][0], 0});
                }
            }
            for (std::size_t a = 0; a < pr.universe.arrays.size(); ++a) {
                for (long long j = 0; j < 4; ++j) {
                    if (gen.rng() % 2) {
                        post.set_cell(a, j, true);
                        live.insert({true, pr.universe.arrays[a][0], j});
                    }
                }
            }

            NeedState mine = syntactic_needs(body, pr.universe, post);
            std::set<Loc> want = oracle_needs(stmts, live);

            for (std::size_t s = 0; s < pr.universe.scalars.size(); ++s)
                CHECK(mine.scalar(s) ==
                      (want.count({false, pr.universe.scalars[s][0], 0}) > 0));
            for (std::size_t a = 0; a < pr.universe.arrays.size(); ++a)
                for (long long j = 0; j < 4; ++j)
                    CHECK(mine.cell(a, j) ==
                          (want.count({true, pr.universe.arrays[a][0], j}) > 0));
        }
    }
}

TEST_SUITE("composition agreement") {
    TEST_CASE("one-point equals enumeration on annotated statement pairs") {
        // two scalars, no arrays; every generated term is closed over {0, 1},
        // and every intermediate time a satisfiable binding requires lies in
        // the sample set, so bounded enumeration loses nothing to exactness
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
            unsigned roll = rng() % 4;
            if (roll < 3) {
                Lvalue tgt{rng() % 2 ? "x" : "y", nullptr, {}};
                return mk_assign(std::move(tgt), closed_expr());
            }
            return mk_print(closed_expr(), obs_index);
        };

        Domain d;
        d.array_bound = 2;
        d.scalar_values = {0, 1};
        d.time_samples = {ExtNat::fin(0), ExtNat::fin(1), ExtNat::inf()};

        for (int round = 0; round < 40; ++round) {
            StmtPtr s0 = statement(0);
            StmtPtr s1 = statement(1);
            auto a = annotate(s0, {}, u).pred;
            auto b = annotate(s1, {}, u).pred;
            auto one = one_point_compose(a, b, u);
            REQUIRE(one.has_value());
            auto enumerated = p_compose(a, b);
            CAPTURE(to_text(**one));

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
                                            bool lhs = eval_pred(**one, bind, d);
                                            bool rhs = eval_pred(*enumerated, bind, d);
                                            REQUIRE(lhs == rhs);
                                        }
        }
    }
}

// the annotator's timed predicates and the two execution modes

#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lazytime/annotator.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/parser.hpp"
#include "lazytime/predicate.hpp"

using namespace lazytime;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(LAZYTIME_FIXTURES) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// the statement alone, without the parser's appended stop
StmtPtr body_of(const char* prog, std::size_t bound) {
    auto pr = parse_program(prog, bound);
    StmtPtr body = pr.program;
    if (auto* q = std::get_if<Stmt::Seq>(&body->node))
        if (std::holds_alternative<Stmt::Stop>(q->second->node)) body = q->first;
    return body;
}

void golden(const char* prog, const char* want_text, const Universe& u) {
    CAPTURE(prog);
    auto ann = annotate(body_of(prog, u.array_bound), {}, u);
    auto mine = normalize(ann.pred);
    auto want = normalize(link(parse_predicate(want_text), u));
    CHECK_MESSAGE(pred_equal(*mine, *want), "got: ", to_text(*mine));
}

Universe scalars_xy() {
    Universe u;
    u.scalars = {"x", "y"};
    u.array_bound = 2;
    return u;
}

Universe array_x_scalar_y() {
    Universe u;
    u.scalars = {"y"};
    u.arrays = {"x"};
    u.array_bound = 2;
    return u;
}

}  // namespace

TEST_SUITE("annotation") {
    TEST_CASE("ok keeps store, time, and demand") {
        golden("ok",
               "x' = x /\\ y' = y /\\ t' = t /\\ need x = need x' /\\ need y = need y'",
               scalars_xy());
    }

    TEST_CASE("stop keeps store and kills demand") {
        golden("stop", "x' = x /\\ y' = y /\\ t' = t /\\ ~ need x /\\ ~ need y",
               scalars_xy());
    }

    TEST_CASE("constant assignment charges only when demanded") {
        golden("x := 3",
               "x' = 3 /\\ y' = y /\\ t' = t + if need x' then 1 else 0 fi"
               " /\\ ~ need x /\\ need y = need y'",
               scalars_xy());
    }

    TEST_CASE("reads propagate demand") {
        golden("x := x + y",
               "x' = x + y /\\ y' = y /\\ t' = t + if need x' then 1 else 0 fi"
               " /\\ need x = need x' /\\ need y = (need x' \\/ need y')",
               scalars_xy());
    }

    TEST_CASE("cell write frames its siblings") {
        golden("x(0) := 2",
               "x'(0) = 2 /\\ x'(1) = x(1) /\\ y' = y"
               " /\\ t' = t + if need x'(0) then 1 else 0 fi"
               " /\\ ~ need x(0) /\\ need x(1) = need x'(1) /\\ need y = need y'",
               array_x_scalar_y());
    }

    TEST_CASE("cell to cell copy") {
        golden("x(0) := x(1)",
               "x'(0) = x(1) /\\ x'(1) = x(1) /\\ y' = y"
               " /\\ t' = t + if need x'(0) then 1 else 0 fi"
               " /\\ ~ need x(0) /\\ need x(1) = (need x'(0) \\/ need x'(1))"
               " /\\ need y = need y'",
               array_x_scalar_y());
    }

    TEST_CASE("scalar into cell") {
        golden("x(0) := y",
               "x'(0) = y /\\ x'(1) = x(1) /\\ y' = y"
               " /\\ t' = t + if need x'(0) then 1 else 0 fi"
               " /\\ ~ need x(0) /\\ need x(1) = need x'(1)"
               " /\\ need y = (need x'(0) \\/ need y')",
               array_x_scalar_y());
    }

    TEST_CASE("conditional merges branchwise and reads its test") {
        golden("if x = 0 then y := 0 else x := 0 fi",
               "x' = if x = 0 then x else 0 fi /\\ y' = if x = 0 then 0 else y fi"
               " /\\ t' = t + if x = 0 /\\ need y' then 1"
               "              else if x != 0 /\\ need x' then 1 else 0 fi fi"
               " /\\ need x = (need x' \\/ need y') /\\ need y = need y'",
               scalars_xy());
    }

    TEST_CASE("print demands unconditionally and is observable") {
        Universe u = scalars_xy();
        u.print_count = 1;
        auto ann = annotate(body_of("print y", 2), {}, u);
        auto want = link(parse_predicate("x' = x /\\ y' = y /\\ print#0 = y /\\ t' = t + 1"
                                         " /\\ need x = need x' /\\ need y"),
                         u);
        CHECK(pred_equal(*normalize(ann.pred), *normalize(want)));
    }

    TEST_CASE("eager form charges every statement") {
        Universe u = scalars_xy();
        auto ann = annotate_eager(body_of("x := 3", 2), {}, u);
        auto want = link(parse_predicate("x' = 3 /\\ y' = y /\\ t' = t + 1"), u);
        CHECK(pred_equal(*normalize(ann.pred), *normalize(want)));
    }

    TEST_CASE("loops become their named spec plus an obligation") {
        auto pr = parse_program(fixture("factorial3.imp"), 6);
        auto specs = parse_spec(fixture("loop.spec"));
        auto ann = annotate(pr.program, specs, pr.universe);
        REQUIRE(ann.obligations.size() == 1);
        CHECK(ann.obligations[0].name == "loop");
        CHECK(pred_equal(*normalize(ann.obligations[0].lhs),
                         *normalize(link(specs["loop"], pr.universe))));
        // missing spec is an error
        CHECK_THROWS_AS(annotate(pr.program, {}, pr.universe), Error);
    }

    TEST_CASE("whole factorial program folds to the book answer") {
        auto pr = parse_program(fixture("factorial3.imp"), 6);
        auto specs = parse_spec(fixture("loop.spec"));
        auto ann = annotate(pr.program, specs, pr.universe);
        // the composed predicate must accept exactly t' = t + 9 at the
        // all-defaults binding induced by a run
        Domain d;
        d.array_bound = 6;
        Binding b = zero_binding(pr.universe);
        b.obs = {6};
        for (long long j = 0, f = 1; j < 6; ++j) {
            if (j > 0) f *= j;
            b.post.arrays[0][j] = f;  // j!
        }
        b.post.scalars = {0};  // i' free in the spec branch; the run leaves clamp 0
        bool found = false;
        for (std::uint64_t n = 0; n <= 12; ++n) {
            b.post.time = ExtNat::fin(n);
            if (eval_pred(*ann.pred, b, d)) {
                CHECK(n == 9);
                found = true;
            }
        }
        CHECK(found);
    }
}

TEST_SUITE("backward liveness") {
    TEST_CASE("straight line needs") {
        auto pr = parse_program("x := y; y := 2; print x; stop", 2);
        NeedState post = NeedState::all(pr.universe, false);
        NeedState pre = syntactic_needs(pr.program, pr.universe, post);
        CHECK(pre.scalar(*pr.universe.scalar_slot("y")));
        CHECK(!pre.scalar(*pr.universe.scalar_slot("x")));
    }

    TEST_CASE("both branches count") {
        auto pr = parse_program("if x = 0 then y := u else y := v fi; print y; stop", 2);
        NeedState pre = syntactic_needs(pr.program, pr.universe, NeedState::all(pr.universe, false));
        CHECK(pre.scalar(*pr.universe.scalar_slot("x")));  // the condition
        CHECK(pre.scalar(*pr.universe.scalar_slot("u")));
        CHECK(pre.scalar(*pr.universe.scalar_slot("v")));
    }

    TEST_CASE("trailing demand flows through") {
        auto pr = parse_program("x := y; stop", 2);
        NeedState post = NeedState::all(pr.universe, false);
        post.set_scalar(*pr.universe.scalar_slot("x"), true);
        // stop kills the demand before it reaches x := y
        NeedState pre = syntactic_needs(pr.program, pr.universe, post);
        CHECK(!pre.scalar(*pr.universe.scalar_slot("y")));

        // without the stop the demand survives
        NeedState pre2 = syntactic_needs(body_of("x := y", 2), pr.universe, post);
        CHECK(pre2.scalar(*pr.universe.scalar_slot("y")));
    }

    TEST_CASE("loops are out of scope") {
        auto pr = parse_program("while x < 1 spec w do x := 1 od; stop", 2);
        CHECK_THROWS_AS(
            syntactic_needs(pr.program, pr.universe, NeedState::all(pr.universe, false)),
            Error);
    }
}

TEST_SUITE("execution") {
    TEST_CASE("factorial of three: nine demanded events") {
        auto pr = parse_program(fixture("factorial3.imp"), 6);
        auto rep = run_lazy(pr.program, pr.universe);
        CHECK(rep.lazy_time == 9);
        REQUIRE(rep.printed.size() == 1);
        CHECK(rep.printed[0] == 6);
        CHECK(rep.diverged);
        CHECK(rep.stability == Stability::FuelStable);
    }

    TEST_CASE("factorial of zero skips the index seed") {
        auto pr = parse_program(fixture("factorial0.imp"), 6);
        auto rep = run_lazy(pr.program, pr.universe);
        CHECK(rep.lazy_time == 2);
        REQUIRE(rep.printed.size() == 1);
        CHECK(rep.printed[0] == 1);
        for (std::size_t id : rep.closure)
            CHECK(rep.trace[id].describe(pr.universe) != "i := 0");
    }

    TEST_CASE("factorial of four: the demand trace oracle") {
        auto pr = parse_program(fixture("factorial4.imp"), 6);
        auto rep = run_lazy(pr.program, pr.universe);
        // 1 seed of i, 1 seed of fac(0), 2 events per iteration, 1 print
        CHECK(rep.lazy_time == 1 + 1 + 2 * 4 + 1);
        REQUIRE(rep.printed.size() == 1);
        CHECK(rep.printed[0] == 24);
        CHECK(rep.stability == Stability::FuelStable);
    }

    TEST_CASE("eager factorial exhausts any fuel") {
        auto pr = parse_program(fixture("factorial3.imp"), 6);
        for (std::size_t fuel : {3u, 10u, 1000u}) {
            RunConfig rc;
            rc.fuel = fuel;
            auto rep = run_eager(pr.program, pr.universe, rc);
            CHECK(rep.fuel_exceeded);
            CHECK(rep.events == fuel);
            CHECK(rep.printed.empty());
        }
    }

    TEST_CASE("two assignments and a print") {
        auto pr = parse_program(fixture("two_assign.imp"), 2);
        auto eg = run_eager(pr.program, pr.universe);
        auto lz = run_lazy(pr.program, pr.universe);
        CHECK(!eg.fuel_exceeded);
        CHECK(eg.events == 3);
        CHECK(eg.printed == std::vector<long long>{3});
        CHECK(lz.lazy_time == 2);
        CHECK(lz.printed == eg.printed);
        CHECK(lz.stability == Stability::Exact);
        // nothing initial is demanded
        for (std::uint8_t bit : lz.pre_need.scalars) CHECK(!bit);
    }

    TEST_CASE("stop alone takes no time") {
        auto pr = parse_program("ok; stop", 2);
        auto lz = run_lazy(pr.program, pr.universe);
        CHECK(lz.lazy_time == 0);
        CHECK(lz.printed.empty());
        CHECK(lz.stability == Stability::Exact);
    }

    TEST_CASE("initial reads surface as pre needs") {
        auto pr = parse_program("y := x + 1; print y; stop", 2);
        auto lz = run_lazy(pr.program, pr.universe);
        CHECK(lz.lazy_time == 2);
        CHECK(lz.pre_need.scalar(*pr.universe.scalar_slot("x")));
    }

    TEST_CASE("branch conditions gate their events") {
        auto pr = parse_program("x := 1; if x = 1 then y := 5 else y := 6 fi; print y; stop", 2);
        auto lz = run_lazy(pr.program, pr.universe);
        // print <- y := 5 <- (control) x := 1
        CHECK(lz.lazy_time == 3);
        CHECK(lz.printed == std::vector<long long>{5});
    }

    TEST_CASE("statements after an if do not depend on its condition") {
        auto pr = parse_program("x := 7; if x = 7 then ok else ok fi; y := 1; print y; stop", 2);
        auto lz = run_lazy(pr.program, pr.universe);
        CHECK(lz.lazy_time == 2);  // y := 1 and the print; x := 7 is not pulled in
    }

    TEST_CASE("terminating loop conditions gate everything after") {
        auto pr = parse_program(
            "i := 0; while i < 3 spec w do i := i + 1 od; print i; stop", 4);
        auto lz = run_lazy(pr.program, pr.universe);
        CHECK(!lz.diverged);
        CHECK(lz.stability == Stability::Exact);
        CHECK(lz.printed == std::vector<long long>{3});
        CHECK(lz.lazy_time == 5);  // seed + three increments + print
    }

    TEST_CASE("demanding final locations roots the closure") {
        auto pr = parse_program("x := 2; y := 3; stop", 4);
        RunConfig rc;
        rc.final_demand = NeedState::all(pr.universe, false);
        rc.final_demand->set_scalar(*pr.universe.scalar_slot("x"), true);
        auto lr = run_lazy(pr.program, pr.universe, rc);
        CHECK(lr.lazy_time == 1);
        CHECK(!lr.pre_need.scalar(*pr.universe.scalar_slot("y")));

        // demanding an unwritten location lands in pre needs directly
        auto pr2 = parse_program("x := y; stop", 4);
        rc.final_demand = NeedState::all(pr2.universe, false);
        rc.final_demand->set_scalar(*pr2.universe.scalar_slot("y"), true);
        lr = run_lazy(pr2.program, pr2.universe, rc);
        CHECK(lr.lazy_time == 0);
        CHECK(lr.pre_need.scalar(*pr2.universe.scalar_slot("y")));
    }

    TEST_CASE("overflow poisons a value until something forces it") {
        // the huge product is never printed, so the run succeeds
        auto ok_run = parse_program("x := 20; y := x! * x!; print x; stop", 2);
        auto rep = run_eager(ok_run.program, ok_run.universe);
        CHECK(!rep.fuel_exceeded);
        CHECK(rep.printed == std::vector<long long>{20});

        // printing it forces the error
        auto bad = parse_program("x := 20; y := x! * x!; print y; stop", 2);
        CHECK_THROWS_AS(run_eager(bad.program, bad.universe), Error);

        // poison propagates through reads
        auto chained = parse_program("x := 20; y := x! * x!; z := y + 1; print z; stop", 2);
        CHECK_THROWS_AS(run_eager(chained.program, chained.universe), Error);

        // overwriting clears it
        auto healed = parse_program("x := 20; y := x! * x!; y := 1; print y; stop", 2);
        CHECK(run_eager(healed.program, healed.universe).printed ==
              std::vector<long long>{1});
    }

    TEST_CASE("branching on poison is a forcing point") {
        auto pr = parse_program(
            "x := 20; y := x! * x!; if y > 0 then z := 1 else z := 2 fi; stop", 2);
        CHECK_THROWS_AS(run_eager(pr.program, pr.universe), Error);
    }

    TEST_CASE("unstable verdict when the tail is demanded") {
        auto pr = parse_program("x := 0; while true spec w do x := x + 1 od; print x; stop", 2);
        RunConfig rc;
        rc.fuel = 100;
        auto lz = run_lazy(pr.program, pr.universe, rc);
        CHECK(lz.diverged);
        CHECK(lz.stability == Stability::Unstable);
        CHECK(!lz.instability.empty());
    }

    TEST_CASE("skipped loops that write a later read are unstable") {
        auto pr = parse_program(
            "i := 0;\n"
            "while true spec w do i := i + 1 od;\n"
            "while true spec v do fac(0) := 9 od;\n"
            "print fac(0);\n"
            "stop",
            4);
        RunConfig rc;
        rc.fuel = 50;
        auto lz = run_lazy(pr.program, pr.universe, rc);
        CHECK(lz.stability == Stability::Unstable);
    }

    TEST_CASE("skipped loops containing prints are unstable") {
        auto pr = parse_program(
            "while true spec w do i := i + 1 od;\n"
            "while true spec v do print i od;\n"
            "stop",
            4);
        RunConfig rc;
        rc.fuel = 50;
        auto lz = run_lazy(pr.program, pr.universe, rc);
        CHECK(lz.stability == Stability::Unstable);
    }

    TEST_CASE("trace dependencies reference earlier events only") {
        auto pr = parse_program(fixture("factorial3.imp"), 6);
        RunConfig rc;
        rc.fuel = 200;
        auto lz = run_lazy(pr.program, pr.universe, rc);
        for (const TraceEvent& ev : lz.trace) {
            for (std::size_t d : ev.data_deps) CHECK(d < ev.id);
            for (std::size_t d : ev.control_deps) CHECK(d < ev.id);
        }
    }
}

// bounded refinement checking: claims, loop obligations, weakening,
// crosschecks, and the checker's failure modes

#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lazytime/annotator.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/parser.hpp"
#include "lazytime/predicate.hpp"
#include "lazytime/refine.hpp"

using namespace lazytime;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(LAZYTIME_FIXTURES) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Loaded {
    ParseResult pr;
    std::map<std::string, PredPtr> specs;
    Annotation ann;
};

Loaded factorial3(const std::string& spec_file, std::size_t bound) {
    ParseResult pr = parse_program(fixture("factorial3.imp"), bound);
    auto specs = parse_spec(fixture(spec_file));
    Annotation ann = annotate(pr.program, specs, pr.universe);
    return {std::move(pr), std::move(specs), std::move(ann)};
}

CheckConfig config(std::size_t bound, std::size_t samples, std::uint64_t seed = 1) {
    CheckConfig cfg;
    cfg.domain.array_bound = bound;
    cfg.samples = samples;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_SUITE("claims") {
    TEST_CASE("a postcondition provable from the assignment") {
        auto pr = parse_program("x := y + 1;\nstop", 2);
        Annotation ann = annotate(pr.program, {}, pr.universe);
        CheckConfig cfg = config(2, 0);
        cfg.exhaustive_stores = true;

        auto good = check_claim(link(parse_predicate("x' > y"), pr.universe), ann,
                                pr.universe, cfg);
        CHECK(good.holds);
        CHECK(good.bindings_checked > 0);
        CHECK(!good.counterexample.has_value());

        auto bad = check_claim(link(parse_predicate("x' > y + 1"), pr.universe), ann,
                               pr.universe, cfg);
        CHECK(!bad.holds);
        REQUIRE(bad.counterexample.has_value());
        CHECK(!bad.counterexample->text.empty());
    }

    TEST_CASE("everything refines a tautology, and itself") {
        auto pr = parse_program("x := 2;\nprint x;\nstop", 2);
        Annotation ann = annotate(pr.program, {}, pr.universe);
        CheckConfig cfg = config(2, 50);
        CHECK(check_claim(parse_predicate("0 = 0"), ann, pr.universe, cfg).holds);
        CHECK(check_refinement(ann.pred, ann.pred, pr.universe, cfg).holds);
    }

    TEST_CASE("the factorial program runs in exactly nine ticks") {
        Loaded l = factorial3("loop.spec", 6);
        CheckConfig cfg = config(6, 2000);

        auto nine = check_claim(parse_predicate("t' = t + 9"), l.ann, l.pr.universe, cfg);
        CHECK(nine.holds);
        CHECK(nine.seed == cfg.seed);

        auto eight = check_claim(parse_predicate("t' = t + 8"), l.ann, l.pr.universe, cfg);
        CHECK(!eight.holds);
        REQUIRE(eight.counterexample.has_value());
    }

    TEST_CASE("the eager account diverges") {
        ParseResult pr = parse_program(fixture("factorial3.imp"), 6);
        auto specs = parse_spec(fixture("loop_eager.spec"));
        Annotation ann = annotate_eager(pr.program, specs, pr.universe);
        auto rep = check_claim(parse_predicate("t' = t + inf"), ann, pr.universe,
                               config(6, 2000));
        CHECK(rep.holds);
    }

    TEST_CASE("a failing search is deterministic under its seed") {
        Loaded l = factorial3("loop.spec", 6);
        CheckConfig cfg = config(6, 2000, 42);
        auto first = check_claim(parse_predicate("t' = t + 8"), l.ann, l.pr.universe, cfg);
        auto second = check_claim(parse_predicate("t' = t + 8"), l.ann, l.pr.universe, cfg);
        REQUIRE(first.counterexample.has_value());
        REQUIRE(second.counterexample.has_value());
        CHECK(first.bindings_checked == second.bindings_checked);
        CHECK(first.counterexample->text == second.counterexample->text);
    }

    TEST_CASE("a counterexample satisfies the body and violates the claim") {
        Loaded l = factorial3("loop.spec", 6);
        CheckConfig cfg = config(6, 2000);
        PredPtr claim = normalize(link(parse_predicate("t' = t + 8"), l.pr.universe));
        PredPtr body = normalize(l.ann.pred);

        auto rep = check_claim(claim, l.ann, l.pr.universe, cfg);
        REQUIRE(rep.counterexample.has_value());
        const Binding& ce = rep.counterexample->binding;
        CHECK(eval_pred(*body, ce, cfg.domain));
        CHECK(!eval_pred(*claim, ce, cfg.domain));
    }
}

TEST_SUITE("obligations") {
    TEST_CASE("the factorial loop body refines its specification") {
        Loaded l = factorial3("loop.spec", 6);
        REQUIRE(l.ann.obligations.size() == 1);
        CHECK(l.ann.obligations[0].name == "loop");

        auto reports = check_obligations(l.ann, l.pr.universe, config(6, 300));
        REQUIRE(reports.size() == 1);
        CHECK(reports[0].name == "loop");
        CHECK_MESSAGE(reports[0].holds,
                      (reports[0].counterexample ? reports[0].counterexample->text
                                                 : std::string()));
        CHECK(reports[0].bindings_checked > 0);
        // strata whose index leaves the modeled prefix are counted, not dropped
        CHECK(reports[0].vacuous > 0);
    }

    TEST_CASE("halving the loop cost breaks the obligation") {
        Loaded l = factorial3("loop_mut.spec", 6);
        auto reports = check_obligations(l.ann, l.pr.universe, config(6, 2000));
        REQUIRE(reports.size() == 1);
        CHECK(!reports[0].holds);
        REQUIRE(reports[0].counterexample.has_value());
    }
}

TEST_SUITE("weakening") {
    TEST_CASE("a proved predicate implies its dropped-conjunct forms") {
        auto pr = parse_program("x := 3;\nstop", 2);
        Annotation ann = annotate_eager(pr.program, {}, pr.universe);
        CheckConfig cfg = config(2, 0);
        cfg.exhaustive_stores = true;

        CHECK(specialize_check(ann.pred, link(parse_predicate("x' = 3"), pr.universe),
                               pr.universe, cfg)
                  .holds);
        CHECK(specialize_check(ann.pred, link(parse_predicate("t' = t + 1"), pr.universe),
                               pr.universe, cfg)
                  .holds);
        CHECK(specialize_check(ann.pred, ann.pred, pr.universe, cfg).holds);

        auto wrong = specialize_check(ann.pred, link(parse_predicate("x' = 2"), pr.universe),
                                      pr.universe, cfg);
        CHECK(!wrong.holds);
        CHECK(wrong.counterexample.has_value());
    }
}

TEST_SUITE("crosschecks") {
    TEST_CASE("a dead assignment is absent from both accounts") {
        ParseResult pr = parse_program(fixture("two_assign.imp"), 8);
        auto rep = crosscheck(pr.program, pr.universe, {}, {}, {});
        REQUIRE_MESSAGE(rep.agree, rep.detail);
        CHECK(rep.lazy_time == 2);
        CHECK(rep.stability == Stability::Exact);
        REQUIRE(rep.satisfying_times.size() == 1);
        CHECK(rep.satisfying_times[0] == ExtNat::fin(2));
    }

    TEST_CASE("the divergent factorial agrees through its loop specification") {
        ParseResult pr = parse_program(fixture("factorial3.imp"), 8);
        auto specs = parse_spec(fixture("loop.spec"));
        auto rep = crosscheck(pr.program, pr.universe, specs, {}, {});
        REQUIRE_MESSAGE(rep.agree, rep.detail);
        CHECK(rep.lazy_time == 9);
        CHECK(rep.stability == Stability::FuelStable);
    }

    TEST_CASE("a wrong specification is caught by the operational run") {
        ParseResult pr = parse_program(fixture("factorial3.imp"), 8);
        auto specs = parse_spec(fixture("loop_mut.spec"));
        auto rep = crosscheck(pr.program, pr.universe, specs, {}, {});
        CHECK(!rep.agree);
        CHECK(rep.detail.find("annotation time") != std::string::npos);
    }

    TEST_CASE("an unstable run refuses to certify") {
        auto pr = parse_program(
            "while true spec loop do x := x + 1 od;\nprint x;\nstop", 8);
        RunConfig rc;
        rc.fuel = 100;
        auto rep = crosscheck(pr.program, pr.universe, {}, rc, {});
        CHECK(!rep.agree);
        CHECK(rep.stability == Stability::Unstable);
        CHECK(rep.detail.find("unstable") != std::string::npos);
    }
}

TEST_SUITE("checker failure modes") {
    TEST_CASE("too many need variables to enumerate") {
        auto pr = parse_program(
            "p(0) := 1;\nq(0) := 1;\nr(0) := 1;\nprint p(0);\nstop", 8);
        REQUIRE(pr.universe.need_bit_count() == 24);
        Annotation ann = annotate(pr.program, {}, pr.universe);
        // a claim over all three arrays' demands forces 24 enumerated bits
        PredPtr claim = parse_predicate("need p'(0) \\/ need q'(0) \\/ need r'(0)");
        try {
            check_claim(claim, ann, pr.universe, config(8, 10));
            FAIL("expected DomainTooLarge");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DomainTooLarge);
        }
    }

    TEST_CASE("a loop without its specification cannot be annotated") {
        ParseResult pr = parse_program(fixture("factorial3.imp"), 8);
        try {
            annotate(pr.program, {}, pr.universe);
            FAIL("expected UnknownSpecName");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::UnknownSpecName);
        }
    }
}

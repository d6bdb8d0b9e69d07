#include <doctest.h>

#include "mrsession/calculus/encodings.hpp"
#include "mrsession/calculus/eval.hpp"
#include "mrsession/calculus/sexpr.hpp"
#include "mrsession/calculus/typecheck.hpp"

using namespace mrsession;
using namespace mrsession::calc;

namespace {

Expr E(const char* text) { return parse_expr(text); }
Viewtype T(const char* text) { return parse_type(text); }

Viewtype closed(const char* text, bool unsafe = false) {
  CheckOptions o;
  o.universe = RoleUniverse(2);
  o.allow_unsafe = unsafe;
  return typecheck_closed(E(text), o);
}

Errc reject_code(const char* text, bool unsafe = false) {
  try {
    closed(text, unsafe);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected rejection of " << text);
  return Errc::Io;
}

constexpr const char* kPingPool = R"(
(pool (nrole 2)
  (thread 0
    (letp (c v)
      (recv (chan_create (lam (x (chan {0} "msg(0,1,int):nil")) (close (send x 5)))))
      (close c))))
)";

constexpr const char* kChan2Pool = R"(
(pool (nrole 2)
  (thread 0
    (letp (c1 c2)
      (chan2_create
        (lam (p (tensor (chan {1} "msg(0,1,chan({0},msg(0,1,int):nil)):nil")
                        (chan {1} "msg(0,1,int):nil")))
          (letp (a b) p
            (letp (b2 n) (recv b)
              (letp (a2 d) (recv a)
                (let (u unit) (close b2)
                  (let (w unit) (close a2) (close (send d n)))))))))
      (close (send c1 c2)))))
)";

}  // namespace

TEST_CASE("rho examples") {
  CHECK(rho(E("unit")).empty());
  CHECK(rho(E("(pair ch+1 ch+1)")) == std::vector<ChannelHalf>{{1, true}, {1, true}});
  CHECK(rho(E("(if b ch+1 ch+1)")) == std::vector<ChannelHalf>{{1, true}});
  CHECK(rho(E("(if ch-2 ch+1 unit)")) == std::vector<ChannelHalf>{{1, true}, {2, false}});
  CHECK(rho_ch(E("(pair ch+3 (app f ch-1))")) == ChannelSet{{1, false}, {3, true}});
}

TEST_CASE("typecheck accepts") {
  CHECK(closed("(lam (x unit) x)") == T("(-> unit unit)"));
  CHECK(closed("(iadd 2 2)") == T("(int 4)"));
  CHECK(subtype(closed("(iadd 2 2)"), Viewtype::integer()));
  CHECK(closed("(pair 1 true)") == T("(prod (int 1) bool)"));
  CHECK(closed("(randbit)") == T("bool"));
  CHECK(closed("(if (randbit) 1 2)") == T("int"));
  CHECK(closed("(thread_create (lam (x unit) x))") == T("unit"));
  CHECK(closed("(fix (f (-> int int)) (lam (x int) (app f x)))") == T("(-> int int)"));
  CHECK(closed("(chan_create (lam (x (chan {0} \"msg(0,1,int):nil\")) (close (send x 5))))") ==
        T("(chan {1} \"msg(0,1,int):nil\")"));
  auto t = closed("(lam (c (chan {1} \"msg(0,1,int):nil\")) (recv c))");
  CHECK(t == T("(-> (chan {1} \"msg(0,1,int):nil\") (tensor (chan {1} \"nil\") int))"));
  CHECK(closed("(lam (x (chan {0} \"nil\")) (lam (y unit) (close x)))") ==
        T("(-> (chan {0} \"nil\") (-o unit unit))"));
  CHECK(closed(R"x((lam (x (chan {0} "append(nil,msg(0,1,str):nil)")) (close (send x "hi"))))x") ==
        T(R"((-> (chan {0} "msg(0,1,str):nil") unit))"));
}

TEST_CASE("typecheck rejects") {
  CHECK(reject_code("(if true ch+1 unit)") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0} \"nil\")) unit)") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0} \"nil\")) (pair (close x) (close x)))") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0} \"nil\")) (lam :i (y unit) (close x)))") == Errc::TypeError);
  CHECK(reject_code("(fix (f (-o int int)) (lam (x int) x))") == Errc::TypeError);
  CHECK(reject_code("(fix (f (-> int int)) (app f 1))") == Errc::TypeError);
  CHECK(reject_code("(iadd true 1)") == Errc::TypeError);
  CHECK(reject_code("(app (lam (x int) x) true)") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0} \"msg(0,1,int):nil\")) (close (send x true)))") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0} \"msg(0,1,int):nil\")) (recv x))") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0} \"choose(0,nil,nil)\")) (close x))") == Errc::TypeError);
  CHECK(reject_code("(lam (x (chan {0,1} \"nil\")) (close x))") == Errc::EmptyGroup);
  CHECK(reject_code("y") == Errc::TypeError);
  CHECK(reject_code("(fst (pair ch+1 1))") == Errc::TypeError);
  CHECK(reject_code(R"((chan2_create (lam (p (tensor (chan {1} "nil") (chan {1} "nil")))
                         (letp (a b) p (let (u unit) (close a) (close b))))))") ==
        Errc::UnsafeDisabled);
  CHECK(closed(R"((chan2_create (lam (p (tensor (chan {1} "nil") (chan {1} "nil")))
                    (letp (a b) p (let (u unit) (close a) (close b))))))",
               true) == T(R"((tensor (chan {0} "nil") (chan {0} "nil")))"));
}

TEST_CASE("values, purity and canonical forms") {
  CheckOptions o;
  CHECK(check_value_purity(E("(pair 1 true)"), o));
  CHECK(canonical_form(E("(pair 1 true)"), T("(prod int bool)")));
  CHECK(canonical_form(E("(lam (x int) x)"), T("(-> int int)")));
  CHECK_FALSE(canonical_form(E("1"), T("bool")));
  CHECK(is_value(E("(fix (f (-> int int)) (lam (x int) x))")) == false);
  CHECK(is_value(E("(lam (x int) (iadd x 1))")));
  CHECK_FALSE(is_value(E("(fix (f (-> int int)) (lam (x int) (app f x)))")));
  std::map<ChannelHalf, Viewtype> sigma{{{1, true}, T("(chan {0} \"nil\")")}};
  o.sigma = &sigma;
  CHECK(check_value_purity(E("ch+1"), o));
}

TEST_CASE("step_expr examples") {
  CHECK(step_expr(E("(fst (pair 1 2))")) == E("1"));
  CHECK(step_expr(E("(app (lam (x int) x) 5)")) == E("5"));
  CHECK(step_expr(E("(fix (f (-> int int)) (lam (x int) (app f x)))")) ==
        E("(lam (x int) (app (fix (f (-> int int)) (lam (x int) (app f x))) x))"));
  CHECK(step_expr(E("(iadd (iadd 1 2) 3)")) == E("(iadd 3 3)"));
  CHECK(step_expr(E("(if (randbit) 1 2)"), true) == E("(if true 1 2)"));
  CHECK(step_expr(E("(if (randbit) 1 2)"), false) == E("(if false 1 2)"));
  CHECK(step_expr(E("(letp (a b) (pair 1 2) (iadd a b))")) == E("(iadd 1 2)"));
  CHECK_THROWS_AS(step_expr(E("unit")), Error);
  CHECK_THROWS_AS(step_expr(E("(send ch+1 5)")), Error);
}

TEST_CASE("blocked examples") {
  auto p = blocked(E("(close (send ch+1 (iadd 1 1)))"));
  CHECK_FALSE(p.has_value());
  auto s = blocked(E("(close (send ch+1 2))"));
  REQUIRE(s);
  CHECK(s->op == PrimOp::Send);
  CHECK(s->half == ChannelHalf{1, true});
  CHECK(*s->payload == E("2"));
  CHECK_FALSE(blocked(E("unit")));
  auto c = blocked(E("(letp (a b) (pair 1 2) (close ch-2))"));
  CHECK_FALSE(c);
  auto d = blocked(E("(pair 1 (close ch-2))"));
  REQUIRE(d);
  CHECK(d->op == PrimOp::Close);
  CHECK(d->half == ChannelHalf{2, false});
}

TEST_CASE("pool rules") {
  Pool p = parse_pool(R"((pool (nrole 2) (thread 0 (thread_create (lam (x unit) x))) (thread 3 unit)))");
  CHECK(typecheck_pool(p) == T("unit"));
  auto ch = enabled_choices(p);
  CHECK(std::count(ch.begin(), ch.end(), ScheduleChoice{Rule::PR2, 3, 0, std::nullopt}) == 1);
  Pool q = step_pool(p, {Rule::PR2, 3, 0, std::nullopt});
  CHECK(q.threads.count(3) == 0);
  CHECK_THROWS_AS(step_pool(p, {Rule::PR2, 0, 0, std::nullopt}), Error);
  Pool r = step_pool(q, {Rule::PR1, 0, 0, std::nullopt});
  CHECK(r.threads.at(0) == E("unit"));
  REQUIRE(r.threads.size() == 2);
  CHECK(r.threads.rbegin()->second == E("(app (lam (x unit) x) unit)"));

  Pool single = parse_pool("(pool (thread 0 5))");
  CHECK(is_final(single));
  CHECK(enabled_choices(single).empty());

  Pool pure = parse_pool("(pool (thread 0 (iadd 1 2)))");
  auto pc = enabled_choices(pure);
  REQUIRE(pc.size() == 1);
  CHECK(pc[0].rule == Rule::PR0);
}

TEST_CASE("PR3 and PR4 on the ping pool") {
  Pool p = parse_pool(kPingPool);
  CHECK(typecheck_pool(p) == T("unit"));
  CHECK(is_df_reducible(p.snapshot()));
  auto ch = enabled_choices(p);
  REQUIRE(ch.size() == 1);
  CHECK(ch[0].rule == Rule::PR3);
  StepInfo info;
  Pool q = step_pool(p, ch[0], &info);
  CHECK(info.chan_id == 1u);
  CHECK(rho_ch(q.threads.at(0)) == ChannelSet{{1, false}});
  CHECK(q.threads.at(1) ==
        E("(app (lam (x (chan {0} \"msg(0,1,int):nil\")) (close (send x 5))) ch+1)"));
  CHECK(q.sigma.at({1, true}) == T("(chan {0} \"msg(0,1,int):nil\")"));
  CHECK(q.sigma.at({1, false}) == T("(chan {1} \"msg(0,1,int):nil\")"));
  CHECK(typecheck_pool(q) == T("unit"));
  auto snap = q.snapshot();
  CHECK(df_reduce(snap, {1, true}) == parse_collection("[{}]"));

  Pool r = step_pool(q, enabled_choices(q).at(0));  // beta in thread 1
  auto c2 = enabled_choices(r);
  REQUIRE(c2.size() == 1);
  CHECK(c2[0] == ScheduleChoice{Rule::PR4Send, 1, 0, std::nullopt});
  Pool s = step_pool(r, c2[0], &info);
  CHECK(s.threads.at(1) == E("(close ch+1)"));
  CHECK(s.threads.at(0) == E("(letp (c v) (pair ch-1 5) (close c))"));
  CHECK(s.sigma.at({1, true}) == T("(chan {0} \"nil\")"));
  CHECK(typecheck_pool(s) == T("unit"));

  RunResult run = run_pool(p, 7, 100);
  CHECK(run.status == RunStatus::Final);
  CHECK(run.final_pool.threads.size() == 1);
  CHECK(run.final_pool.threads.at(0) == E("unit"));
  CHECK(run.final_pool.sigma.empty());
  CHECK(run.trace.front().rule == "init");
  CHECK(check_trace_preservation(trace_snapshots(run.trace)).clean());
  RunResult again = run_pool(p, 7, 100);
  CHECK(again.trace == run.trace);
}

TEST_CASE("chan2_create pool deadlocks with a cyclic snapshot") {
  Pool p = parse_pool(kChan2Pool);
  CHECK_THROWS_AS(typecheck_pool(p), Error);
  CHECK(typecheck_pool(p, true) == T("unit"));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RunResult run = run_pool(p, seed, 1000);
    REQUIRE(run.status == RunStatus::Deadlock);
    REQUIRE(run.deadlock_snapshot);
    CHECK(format_collection(*run.deadlock_snapshot) == "[{1-,2-},{1+,2+}]");
    CHECK_FALSE(is_df_reducible(*run.deadlock_snapshot));
    auto report = check_trace_preservation(trace_snapshots(run.trace));
    REQUIRE_FALSE(report.clean());
    CHECK(run.trace[*report.first_violation].rule == "PR3x2");
  }
}

TEST_CASE("sexpr round trip") {
  for (const char* text : {kPingPool, kChan2Pool}) {
    Pool p = parse_pool(text);
    std::string out = format_pool(p);
    Pool back = parse_pool(out);
    CHECK(format_pool(back) == out);
    CHECK(back.threads.at(0) == p.threads.at(0));
  }
  CHECK(format_expr(E("(fix (g (-> int int)) (lam :i (x int) (app g x)))")) ==
        "(fix (g (-> int int)) (lam :i (x int) (app g x)))");
  CHECK(format_expr(E(R"("a\"b\n")")) == R"("a\"b\n")");
  CHECK_THROWS_AS(E("(pair 1)"), SyntaxError);
  CHECK_THROWS_AS(E("(send ch+1)"), SyntaxError);
  CHECK_THROWS_AS(T("(chan {0} \"msg(0,1\")"), SyntaxError);
  CHECK_THROWS_AS(parse_pool("(pool (thread 0 1) (thread 0 2))"), SyntaxError);
}

TEST_CASE("two-buyer pool through an unrolled three-way link") {
  Pool p = two_buyer_pool("tapl", 100, 60);
  CHECK(typecheck_pool(p) == T("str"));
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RunResult run = run_pool(p, seed, 100000);
    REQUIRE(run.status == RunStatus::Final);
    CHECK(run.final_pool.threads.at(0) == E("\"receipt:tapl\""));
    CHECK(check_trace_preservation(trace_snapshots(run.trace)).clean());
    int sends = 0;
    for (const auto& r : run.trace) sends += r.rule == "PR4-send" || r.rule == "PR4-recv";
    // Six messages, each crossing two channels (party to link, link to party).
    CHECK(sends == 12);
  }
}

TEST_CASE("chan2 control pool runs to completion") {
  Pool p = chan2_control_pool();
  CHECK(typecheck_pool(p) == T("unit"));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RunResult run = run_pool(p, seed, 1000);
    CHECK(run.status == RunStatus::Final);
    CHECK(check_trace_preservation(trace_snapshots(run.trace)).clean());
  }
  CHECK(format_pool(chan2_deadlock_pool()) == format_pool(parse_pool(kChan2Pool)));
}

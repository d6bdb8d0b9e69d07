#include <doctest.h>

#include <set>

#include "gen_session.hpp"
#include "mrsession/session_type.hpp"

using namespace mrsession;

namespace {

using Trace = std::vector<std::string>;

std::string msg_token(Role i, Role j, const PayloadSort& s) {
  return "m" + std::to_string(i) + ">" + std::to_string(j) + ":" + format_sort(s);
}

// Oracle: complete runs by structural recursion, never calling unfold.
std::set<Trace> denote(const SessionType& s, int repeat_budget) {
  return std::visit(
      [&](const auto& n) -> std::set<Trace> {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, st::Nil>) {
          return {Trace{}};
        } else if constexpr (std::is_same_v<T, st::Msg>) {
          std::set<Trace> out;
          for (auto t : denote(n.rest, repeat_budget)) {
            t.insert(t.begin(), msg_token(n.from, n.to, n.sort));
            out.insert(t);
          }
          return out;
        } else if constexpr (std::is_same_v<T, st::Choose>) {
          std::set<Trace> out;
          std::string c = "c" + std::to_string(n.decider);
          for (auto t : denote(n.left, repeat_budget)) {
            t.insert(t.begin(), c + "L");
            out.insert(t);
          }
          for (auto t : denote(n.right, repeat_budget)) {
            t.insert(t.begin(), c + "R");
            out.insert(t);
          }
          return out;
        } else if constexpr (std::is_same_v<T, st::Append>) {
          std::set<Trace> out;
          auto b = denote(n.second, repeat_budget);
          for (const auto& x : denote(n.first, repeat_budget)) {
            for (const auto& y : b) {
              Trace t = x;
              t.insert(t.end(), y.begin(), y.end());
              out.insert(t);
            }
          }
          return out;
        } else {
          // repeat(i,B): stop (L) or run B then loop (R), up to the budget.
          std::set<Trace> out;
          std::string c = "c" + std::to_string(n.decider);
          out.insert(Trace{c + "L"});
          if (repeat_budget == 0) return out;
          auto rest = denote(s, repeat_budget - 1);
          for (const auto& x : denote(n.body, repeat_budget - 1)) {
            for (const auto& y : rest) {
              Trace t{c + "R"};
              t.insert(t.end(), x.begin(), x.end());
              t.insert(t.end(), y.begin(), y.end());
              out.insert(t);
            }
          }
          return out;
        }
      },
      s.node().v);
}

// Implementation side: walk normalize_head.
void walk(const SessionType& s, Trace& prefix, std::set<Trace>& out, int fuel) {
  SessionType n = normalize_head(s);
  if (n.is_nil()) {
    out.insert(prefix);
    return;
  }
  if (fuel == 0) return;
  if (auto* m = std::get_if<st::Msg>(&n.node().v)) {
    prefix.push_back(msg_token(m->from, m->to, m->sort));
    walk(m->rest, prefix, out, fuel - 1);
    prefix.pop_back();
    return;
  }
  const auto& c = std::get<st::Choose>(n.node().v);
  std::string tag = "c" + std::to_string(c.decider);
  prefix.push_back(tag + "L");
  walk(c.left, prefix, out, fuel - 1);
  prefix.back() = tag + "R";
  walk(c.right, prefix, out, fuel - 1);
  prefix.pop_back();
}

std::set<Trace> walk(const SessionType& s) {
  std::set<Trace> out;
  Trace prefix;
  walk(s, prefix, out, 1000);
  return out;
}

SessionType P(const char* text) { return parse_session(text); }

}  // namespace

TEST_CASE("classify: four scenarios") {
  RoleUniverse u2(2), u3(3);
  CHECK(classify(Group(u2, {0}), 0, 1) == MsgAction::SendTo);
  CHECK(classify(Group(u2, {1}), 0, 1) == MsgAction::RecvFrom);
  CHECK(classify(Group(u3, {0, 1}), 0, 1) == MsgAction::Internal);
  CHECK(classify(Group(u3, {2}), 0, 1) == MsgAction::External);
  try {
    classify(Group(u3, {0}), 1, 1);
    FAIL("expected self-message error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SelfMessage);
  }
  CHECK_THROWS_AS(classify(Group(u2, {0}), 0, 2), Error);
}

TEST_CASE("classify duality under complement") {
  for (int n = 2; n <= 5; ++n) {
    RoleUniverse u(n);
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
      Group g(u, RoleSet::from_bits(bits));
      for (Role i = 0; i < n; ++i) {
        for (Role j = 0; j < n; ++j) {
          if (i == j) continue;
          MsgAction a = classify(g, i, j), b = classify(g.complement(), i, j);
          MsgAction want = a == MsgAction::SendTo     ? MsgAction::RecvFrom
                           : a == MsgAction::RecvFrom ? MsgAction::SendTo
                           : a == MsgAction::Internal ? MsgAction::External
                                                      : MsgAction::Internal;
          CHECK(b == want);
        }
      }
    }
  }
}

TEST_CASE("well_formed examples") {
  CHECK(well_formed(P("msg(0,1):nil"), RoleUniverse(2)));
  CHECK_FALSE(well_formed(P("msg(0,2):nil"), RoleUniverse(2)));
  CHECK_FALSE(well_formed(P("msg(1,1):nil"), RoleUniverse(3)));
  CHECK_FALSE(well_formed(P("choose(3,nil,nil)"), RoleUniverse(3)));
  CHECK(well_formed(P("repeat(2,msg(2,0,chan({1},msg(0,1,int):nil)):nil)"), RoleUniverse(3)));
  CHECK_FALSE(well_formed(P("msg(0,1,chan({3},nil)):nil"), RoleUniverse(3)));
}

TEST_CASE("unfold examples") {
  CHECK(unfold(SessionType::append(SessionType::nil(), P("msg(0,1):nil"))) == P("msg(0,1):nil"));
  SessionType r = P("repeat(0,msg(0,1):nil)");
  CHECK(unfold(r) == SessionType::choose(0, SessionType::nil(),
                                         SessionType::append(P("msg(0,1):nil"), r)));
  SessionType a = P("append(msg(0,1):nil,msg(1,0):nil)");
  SessionType want = SessionType::msg(0, 1, SessionType::append(SessionType::nil(), P("msg(1,0):nil")));
  CHECK(unfold(a) == want);
  CHECK(walk(a) == walk(want));
  CHECK(walk(a) == denote(a, 0));
  CHECK(unfold(P("msg(0,1):nil")) == P("msg(0,1):nil"));
  CHECK(unfold(P("append(choose(1,nil,msg(0,1):nil),msg(2,0):nil)")) ==
        P("choose(1,append(nil,msg(2,0):nil),append(msg(0,1):nil,msg(2,0):nil))"));
  CHECK(unfold(P("append(append(msg(0,1):nil,nil),nil)")) ==
        P("append(msg(0,1):nil,append(nil,nil))"));
}

TEST_CASE("head_action examples") {
  RoleUniverse u3(3);
  CHECK(std::holds_alternative<head::Close>(head_action(Group(u3, {0}), SessionType::nil())));
  auto h = head_action(Group(u3, {1, 2}), P("msg(0,1):msg(1,2):nil"));
  REQUIRE(std::holds_alternative<head::Recv>(h));
  CHECK(std::get<head::Recv>(h).cont == P("msg(1,2):nil"));
  auto c = head_action(Group(u3, {0}), P("choose(0,msg(0,1):nil,nil)"));
  REQUIRE(std::holds_alternative<head::ChooseSend>(c));
  CHECK(std::get<head::ChooseSend>(c).left == P("msg(0,1):nil"));
  CHECK(std::get<head::ChooseSend>(c).right == SessionType::nil());
  CHECK(std::holds_alternative<head::ChooseRecv>(head_action(Group(u3, {1}), P("choose(0,nil,nil)"))));
  auto sk = head_action(Group(u3, {2}), P("msg(0,1,int):nil"));
  REQUIRE(std::holds_alternative<head::Skip>(sk));
  CHECK_FALSE(std::get<head::Skip>(sk).internal);
  CHECK(describe(head_action(Group(u3, {0}), P("msg(0,1,int):nil"))) == "send(0,1,int)");
  // through repeat and append
  auto rh = head_action(Group(u3, {1}), P("repeat(1,msg(0,1):nil)"));
  CHECK(std::holds_alternative<head::ChooseSend>(rh));
}

TEST_CASE("parse and format examples") {
  CHECK(parse_session("msg(0,1,int):nil") ==
        SessionType::msg(0, 1, PayloadSort::integer(), SessionType::nil()));
  CHECK(parse_session("choose(2, msg(2,0,str):nil, nil)") ==
        SessionType::choose(2, SessionType::msg(2, 0, PayloadSort::str(), SessionType::nil()),
                            SessionType::nil()));
  CHECK(parse_session(" msg ( 0 , 1 ) :: nil ") == P("msg(0,1,unit):nil"));
  CHECK(format_session(P("choose(2, msg(2,0,str):nil, nil)")) == "choose(2,msg(2,0,str):nil,nil)");
  CHECK(format_sort(parse_sort("(int, chan({0,2}, nil), bool)")) == "(int,chan({0,2},nil),bool)");
  try {
    parse_session("msg(0,1,int):nol");
    FAIL("expected syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.position() == 13);
  }
  CHECK_THROWS_AS(parse_session("msg(0,1,int)"), SyntaxError);
  CHECK_THROWS_AS(parse_session("nil nil"), SyntaxError);
  CHECK_THROWS_AS(parse_sort("(int)"), SyntaxError);
  CHECK_THROWS_AS(parse_session("repeat(99,nil)"), SyntaxError);
}

TEST_CASE("parse/format round trip on generated types") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 1500; ++k) {
    testgen::SessionGen gen{rng};
    gen.nrole = 2 + k % 3;
    gen.allow_repeat = k % 2 == 0;
    gen.allow_chan = k % 3 == 0;
    SessionType s = gen.session(1 + k % 7);
    std::string text = format_session(s);
    SessionType back = parse_session(text);
    REQUIRE(back == s);
    CHECK(format_session(back) == text);
    CHECK(well_formed(s, RoleUniverse(gen.nrole)));
  }
}

TEST_CASE("action streams agree with the structural oracle") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 400; ++k) {
    testgen::SessionGen gen{rng};
    gen.nrole = 2 + k % 3;
    SessionType s = gen.session(1 + k % 6);
    CHECK(walk(s) == denote(s, 0));
    CHECK(walk(unfold(s)) == denote(s, 0));
    CHECK_FALSE(contains_repeat(s));
  }
}

TEST_CASE("repeat-free streams end in Close; unfold preserves head_action") {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 400; ++k) {
    testgen::SessionGen gen{rng};
    gen.nrole = 2 + k % 3;
    gen.allow_repeat = k % 2 == 1;
    SessionType s = gen.session(1 + k % 6);
    RoleUniverse u(gen.nrole);
    Group g(u, gen.proper_group());
    auto a = head_action(g, s);
    auto b = head_action(g, unfold(s));
    CHECK(describe(a) == describe(b));
    CHECK(a.index() == b.index());
    CHECK(equivalent(s, unfold(s)));
    if (!gen.allow_repeat) {
      // follow the left-most path to the end
      SessionType cur = s;
      for (int step = 0; step < 200; ++step) {
        auto h = head_action(g, cur);
        if (std::holds_alternative<head::Close>(h)) break;
        std::visit(
            [&](const auto& x) {
              using T = std::decay_t<decltype(x)>;
              if constexpr (std::is_same_v<T, head::ChooseSend> || std::is_same_v<T, head::ChooseRecv>) {
                cur = x.left;
              } else if constexpr (!std::is_same_v<T, head::Close>) {
                cur = x.cont;
              }
            },
            h);
        REQUIRE(step < 199);
      }
    }
  }
}

TEST_CASE("repeat unfolds through Append and stays equivalent") {
  SessionType r = P("repeat(0,msg(0,1,int):nil)");
  std::set<Trace> traces = denote(r, 2);
  CHECK(traces.count(Trace{"c0L"}));
  CHECK(traces.count(Trace{"c0R", "m0>1:int", "c0L"}));
  CHECK(equivalent(r, unfold(r)));
  SessionType again = std::get<st::Choose>(unfold(r).node().v).right;
  CHECK(equivalent(std::get<st::Msg>(unfold(again).node().v).rest, r));
  CHECK_FALSE(equivalent(r, P("repeat(1,msg(0,1,int):nil)")));
  CHECK_FALSE(equivalent(r, P("repeat(0,msg(0,1,str):nil)")));
  CHECK(equivalent(P("append(repeat(1,msg(0,1):nil),nil)"), P("repeat(1,msg(0,1):nil)")));
}

TEST_CASE("labeled choice") {
  std::vector<SessionType> branches{P("nil"), P("msg(1,0,int):nil"), P("msg(0,1,int):nil")};
  SessionType c = choose_labeled(1, branches);
  CHECK(format_session(c) == "choose(1,nil,choose(1,msg(1,0,int):nil,msg(0,1,int):nil))");
  for (std::size_t k = 0; k < branches.size(); ++k) {
    SessionType cur = c;
    for (bool right : label_path(k, branches.size())) {
      const auto& ch = std::get<st::Choose>(cur.node().v);
      cur = right ? ch.right : ch.left;
    }
    CHECK(cur == branches[k]);
  }
  CHECK(label_path(0, 1).empty());
  CHECK_THROWS_AS(label_path(3, 3), Error);
}

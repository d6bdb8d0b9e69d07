#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "gen_session.hpp"
#include "scripted.hpp"

using namespace mrsession;
using namespace mrsession::rt;

namespace {

RoleUniverse U(int n) { return RoleUniverse(n); }
SessionType S(const char* text) { return parse_session(text); }

std::optional<Errc> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// A payload that does not fit `s`.
DynValue misfit(const PayloadSort& s) {
  if (std::holds_alternative<sort::Int>(s.node().v)) return DynValue::str("x");
  return DynValue::integer(1);
}

// Every operation other than the licensed one, applied to a live handle; each
// must raise ProtocolViolation and leave the handle usable.
void check_deviations(const Endpoint& ep, int nrole, int& tried) {
  HeadAction h = next_action(ep);
  std::vector<std::function<void()>> wrong;
  const auto* snd = std::get_if<head::Send>(&h);
  const auto* rcv = std::get_if<head::Recv>(&h);
  for (Role i = 0; i < nrole; ++i) {
    for (Role j = 0; j < nrole; ++j) {
      if (i == j) continue;
      bool licensed_send = snd && snd->from == i && snd->to == j;
      bool licensed_recv = rcv && rcv->from == i && rcv->to == j;
      if (!licensed_send) wrong.push_back([&ep, i, j] { send(ep, i, j, DynValue::unit()); });
      if (!licensed_recv) wrong.push_back([&ep, i, j] { recv(ep, i, j); });
    }
  }
  if (snd) wrong.push_back([&ep, snd] { send(ep, snd->from, snd->to, misfit(snd->sort)); });
  if (!std::holds_alternative<head::Skip>(h)) wrong.push_back([&ep] { skip(ep); });
  if (!std::holds_alternative<head::Close>(h)) wrong.push_back([&ep] { close(ep); });
  if (!std::holds_alternative<head::ChooseSend>(h)) {
    wrong.push_back([&ep] { choose_l(ep); });
    wrong.push_back([&ep] { choose_r(ep); });
  }
  if (!std::holds_alternative<head::ChooseRecv>(h)) wrong.push_back([&ep] { choose_tag(ep); });
  for (auto& f : wrong) {
    auto c = code_of(f);
    REQUIRE(c.has_value());
    CHECK(*c == Errc::ProtocolViolation);
    CHECK(ep.valid());
    ++tried;
  }
}

// drive() with every deviation probed before each step and stale handles
// poked after it.
std::vector<std::string> drive_probing(Endpoint ep, std::uint64_t seed, int nrole, int& deviations, int& stale) {
  std::vector<std::string> log;
  std::uint64_t k = 0;
  for (;;) {
    check_deviations(ep, nrole, deviations);
    Endpoint old = ep;
    HeadAction h = next_action(ep);
    if (std::holds_alternative<head::Close>(h)) {
      close(std::move(ep));
      CHECK(code_of([&] { skip(old); }) == Errc::UseAfterConsume);
      ++stale;
      return log;
    }
    ++k;
    if (const auto* s = std::get_if<head::Send>(&h)) {
      DynValue v = scripted::payload_for(s->sort, seed, k);
      log.push_back(scripted::msg_text(s->from, s->to, format_value(v)));
      ep = send(std::move(ep), s->from, s->to, std::move(v));
    } else if (const auto* r = std::get_if<head::Recv>(&h)) {
      auto [v, next] = recv(std::move(ep), r->from, r->to);
      log.push_back(scripted::msg_text(r->from, r->to, format_value(v)));
      ep = std::move(next);
    } else if (std::holds_alternative<head::Skip>(h)) {
      ep = skip(std::move(ep));
    } else if (const auto* c = std::get_if<head::ChooseSend>(&h)) {
      CTag t = scripted::choice_for(seed, k);
      log.push_back(scripted::choice_text(c->decider, t));
      ep = choose(std::move(ep), t);
    } else {
      Role d = std::get<head::ChooseRecv>(h).decider;
      auto [t, next] = choose_tag(std::move(ep));
      log.push_back(scripted::choice_text(d, t));
      ep = std::move(next);
    }
    // Any reuse of the previous handle is rejected, whatever the operation.
    auto c1 = code_of([&] { skip(old); });
    auto c2 = code_of([&] { close(old); });
    auto c3 = code_of([&] { send(old, 0, 1, DynValue::unit()); });
    CHECK(c1 == Errc::UseAfterConsume);
    CHECK(c2 == Errc::UseAfterConsume);
    CHECK(c3 == Errc::UseAfterConsume);
    CHECK_FALSE(old.valid());
    stale += 3;
  }
}

}  // namespace

TEST_CASE("the monitor licenses exactly the head action") {
  std::mt19937_64 rng(99);
  int deviations = 0, stale = 0;
  for (int round = 0; round < 60; ++round) {
    int nrole = 2 + round % 3;
    testgen::SessionGen gen{rng, nrole};
    gen.allow_repeat = round % 2 == 0;
    SessionType s = gen.session(1 + round % 5);
    RoleSet g = gen.proper_group();
    std::uint64_t seed = rng();
    CAPTURE(format_session(s));
    Runtime rt(RuntimeOptions{U(nrole)});
    std::vector<std::string> child_log;
    int child_dev = 0, child_stale = 0;
    // repeat loops end once the scripted choices pick the exit branch
    Endpoint mine = rt.chan_create(Group(U(nrole), g), s, [&](Endpoint e) {
      child_log = drive_probing(std::move(e), seed, nrole, child_dev, child_stale);
    });
    auto log = drive_probing(std::move(mine), seed, nrole, deviations, stale);
    rt.join_all();
    deviations += child_dev;
    stale += child_stale;
    if (!contains_repeat(s)) {
      CHECK(log == scripted::expected(s, Group(U(nrole), g).complement().members(), seed));
      CHECK(child_log == scripted::expected(s, g, seed));
    }
  }
  CHECK(deviations > 1000);
  CHECK(stale > 200);
}

TEST_CASE("random misuse never silently reuses a handle") {
  // Copies of every handle ever issued are kept and replayed at random.
  std::mt19937_64 rng(4242);
  int rejected = 0;
  for (int round = 0; round < 80; ++round) {
    testgen::SessionGen gen{rng, 2};
    SessionType s = gen.session(6);
    std::uint64_t seed = rng();
    Runtime rt(RuntimeOptions{U(2)});
    Endpoint e = rt.chan_create(Group(U(2), {1}), s, [seed](Endpoint x) { scripted::drive(std::move(x), seed); });
    std::vector<Endpoint> history{e};
    std::uint64_t k = 0;
    for (;;) {
      for (int poke = 0; poke < 3 && history.size() > 1; ++poke) {
        const Endpoint& old = history[rng() % (history.size() - 1)];
        auto c = code_of([&] { skip(old); });
        REQUIRE(c.has_value());
        CHECK(*c == Errc::UseAfterConsume);
        ++rejected;
      }
      HeadAction h = next_action(e);
      if (std::holds_alternative<head::Close>(h)) {
        close(e);
        break;
      }
      ++k;
      if (const auto* sd = std::get_if<head::Send>(&h)) {
        e = send(e, sd->from, sd->to, scripted::payload_for(sd->sort, seed, k));
      } else if (const auto* r = std::get_if<head::Recv>(&h)) {
        e = recv(e, r->from, r->to).second;
      } else if (std::holds_alternative<head::Skip>(h)) {
        e = skip(e);
      } else if (std::holds_alternative<head::ChooseSend>(h)) {
        e = choose(e, scripted::choice_for(seed, k));
      } else {
        e = choose_tag(e).second;
      }
      history.push_back(e);
    }
    for (const auto& old : history) CHECK_FALSE(old.valid());
    rt.join_all();
  }
  CHECK(rejected > 300);
}

TEST_CASE("services hand out independent sessions") {
  RoleUniverse u = U(2);
  Runtime rt(RuntimeOptions{u});
  SessionType proto = S("msg(1,0,int):msg(0,1,int):nil");
  Service svc = service_create(
      [](Endpoint e) {
        auto [v, rest] = recv(std::move(e), 1, 0);
        close(send(std::move(rest), 0, 1, DynValue::integer(std::get<std::int64_t>(v.v) * 10)));
      },
      Group(u, {0}), proto);
  CHECK(rt.agents_spawned() == 0);
  std::vector<Endpoint> clients;
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 3; ++i) {
    clients.push_back(service_request(rt, svc));
    CHECK(rt.agents_spawned() == static_cast<std::size_t>(i + 1));
    CHECK(clients.back().group() == Group(u, {1}));
    ids.push_back(clients.back().chan_id());
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  for (int i = 2; i >= 0; --i) {
    Endpoint c = send(std::move(clients[static_cast<std::size_t>(i)]), 1, 0, DynValue::integer(i + 1));
    auto [v, rest] = recv(std::move(c), 0, 1);
    CHECK(std::get<std::int64_t>(v.v) == (i + 1) * 10);
    close(std::move(rest));
  }
  rt.join_all();
  CHECK(code_of([&] { service_create([](Endpoint) {}, Group(u, {0}), S("msg(0,3,int):nil")); }) ==
        Errc::IllFormedSession);
}

TEST_CASE("every created pair has exactly one positive side") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 100; ++round) {
    int nrole = 2 + round % 5;
    testgen::SessionGen gen{rng, nrole};
    RoleSet g = gen.proper_group();
    Runtime rt(RuntimeOptions{U(nrole)});
    bool child_pos = false;
    Endpoint mine = rt.chan_create(Group(U(nrole), g), S("nil"), [&](Endpoint e) {
      child_pos = e.positive();
      close(std::move(e));
    });
    bool mine_pos = mine.positive();
    close(std::move(mine));
    rt.join_all();
    CHECK(child_pos != mine_pos);
    CHECK(child_pos == g.contains(0));
  }
}

TEST_CASE("each completed send is matched by a recv of the same triple") {
  std::mt19937_64 rng(31);
  for (int round = 0; round < 60; ++round) {
    int nrole = 2 + round % 3;
    testgen::SessionGen gen{rng, nrole};
    SessionType s = gen.session(6);
    RoleSet g = gen.proper_group();
    auto w = round % 3 == 0 ? scripted::Wiring::Direct
             : round % 3 == 1 ? scripted::Wiring::Chan2Link
                              : scripted::Wiring::Splice;
    auto out = scripted::run_pair(U(nrole), g, s, rng(), w);
    std::map<std::string, int> balance;
    for (const auto& e : out.events) {
      if (e.rule != "send" && e.rule != "recv") continue;
      std::string key = std::to_string(*e.chan_id) + "|" + std::to_string(*e.from) + ">" + std::to_string(*e.to) +
                        "|" + e.payload->dump();
      balance[key] += e.rule == "send" ? 1 : -1;
    }
    for (const auto& [key, n] : balance) {
      CAPTURE(key);
      CHECK(n == 0);
    }
  }
}

TEST_CASE("delegation keeps runtime snapshots deadlock-free") {
  // A chain of hand-offs: each agent receives an endpoint and passes it on.
  std::string inner = "msg(1,0,int):nil";
  std::string outer = "msg(0,1,chan({0}," + inner + ")):nil";
  SessionType so = S(outer.c_str());
  Runtime rt(RuntimeOptions{U(2)});
  std::int64_t got = 0;
  Endpoint far = rt.chan_create(Group(U(2), {1}), S(inner.c_str()), [](Endpoint e) {
    close(send(std::move(e), 1, 0, DynValue::integer(64)));
  });
  Endpoint hop2 = rt.chan_create(Group(U(2), {1}), so, [&](Endpoint e) {
    auto [v, rest] = recv(std::move(e), 0, 1);
    close(std::move(rest));
    auto [n, fin] = recv(std::get<Endpoint>(v.v), 1, 0);
    got = std::get<std::int64_t>(n.v);
    close(std::move(fin));
  });
  Endpoint hop1 = rt.chan_create_with(Group(U(2), {1}), so, {std::move(hop2)}, [](Endpoint e, std::vector<Endpoint> moved) {
    auto [v, rest] = recv(std::move(e), 0, 1);
    close(std::move(rest));
    close(send(std::move(moved[0]), 0, 1, std::move(v)));
  });
  close(send(std::move(hop1), 0, 1, DynValue::endpoint(std::move(far))));
  rt.join_all();
  CHECK(got == 64);
  auto report = check_trace_preservation(trace_snapshots(rt.events()));
  CHECK(report.clean());
  CHECK(report.checked == rt.events().size());
}

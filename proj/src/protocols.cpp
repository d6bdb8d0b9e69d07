#include "mrsession/protocols.hpp"

#include <chrono>
#include <deque>
#include <random>
#include <sstream>
#include <thread>

namespace mrsession::proto {

using namespace rt;

namespace {

constexpr Role kS0 = 0;
constexpr Role kB1 = 1;
constexpr Role kB2 = 2;

RuntimeOptions runtime_options(RoleUniverse u, bool unsafe, const RunOptions& o) {
  RuntimeOptions r;
  r.universe = u;
  r.allow_unsafe = unsafe;
  r.watchdog_ms = o.watchdog_ms;
  r.record_snapshots = o.record_snapshots;
  return r;
}

std::int64_t int_of(const DynValue& v) { return std::get<std::int64_t>(v.v); }
const std::string& str_of(const DynValue& v) { return std::get<std::string>(v.v); }

// Labeled choices are right-nested binary choices; see choose_labeled.
Endpoint choose_label(Endpoint e, std::size_t label, std::size_t count) {
  for (bool right : label_path(label, count)) e = right ? choose_r(std::move(e)) : choose_l(std::move(e));
  return e;
}

std::pair<std::size_t, Endpoint> recv_label(Endpoint e, std::size_t count) {
  for (std::size_t label = 0; label + 1 < count; ++label) {
    auto [t, next] = choose_tag(std::move(e));
    e = std::move(next);
    if (t == CTag::Left) return {label, std::move(e)};
  }
  return {count - 1, std::move(e)};
}

// Agents spawned by `parent`'s chan_create calls, in order.
std::vector<std::uint64_t> children_of(const std::vector<TraceRecord>& events, std::uint64_t parent) {
  std::vector<std::uint64_t> out;
  for (const auto& e : events) {
    if (e.rule == "chan_create" && e.tids.size() == 2 && e.tids[0] == parent) out.push_back(e.tids[1]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// two buyers

SessionType two_buyer_session() {
  static const SessionType s = parse_session(
      "msg(1,0,str):msg(0,1,int):msg(0,2,int):msg(1,2,int):"
      "choose(2,msg(2,0,str):msg(0,2,str):nil,nil)");
  return s;
}

TwoBuyerOutcome run_two_buyer(const std::string& title, std::int64_t price, std::int64_t contribution,
                              std::int64_t b2_budget, RunOptions opts) {
  if (price < 0 || contribution < 0) throw Error(Errc::PreconditionViolated, "amounts must be non-negative");
  RoleUniverse u(3);
  SessionType s = two_buyer_session();
  TwoBuyerOutcome out;
  Runtime rt(runtime_options(u, false, opts));

  Service seller = service_create(
      [price](Endpoint e) {
        auto [t, e1] = recv(std::move(e), kB1, kS0);
        e1 = send(std::move(e1), kS0, kB1, DynValue::integer(price));
        e1 = send(std::move(e1), kS0, kB2, DynValue::integer(price));
        e1 = skip(std::move(e1));
        auto [tag, e2] = choose_tag(std::move(e1));
        if (tag == CTag::Left) {
          auto [proof, e3] = recv(std::move(e2), kB2, kS0);
          e2 = send(std::move(e3), kS0, kB2, DynValue::str("receipt:" + str_of(t)));
        }
        close(std::move(e2));
      },
      Group(u, {kS0}), s);

  Service buyer1 = service_create(
      [title, contribution](Endpoint e) {
        e = send(std::move(e), kB1, kS0, DynValue::str(title));
        auto [p, e1] = recv(std::move(e), kS0, kB1);
        e1 = skip(std::move(e1));
        e1 = send(std::move(e1), kB1, kB2, DynValue::integer(contribution));
        auto [tag, e2] = choose_tag(std::move(e1));
        if (tag == CTag::Left) e2 = skip(skip(std::move(e2)));
        close(std::move(e2));
      },
      Group(u, {kB1}), s);

  std::optional<std::string> receipt;
  rt.spawn({}, [&](std::vector<Endpoint>) {
    Endpoint c0 = service_request(rt, seller);  // {1,2}
    Endpoint c1 = service_request(rt, buyer1);  // {0,2}
    Endpoint b2 = chan2_link_create(std::move(c0), std::move(c1));
    b2 = skip(skip(std::move(b2)));
    auto [p, e1] = recv(std::move(b2), kS0, kB2);
    auto [c, e2] = recv(std::move(e1), kB1, kB2);
    std::int64_t remaining = int_of(p) - int_of(c);
    if (remaining <= b2_budget) {
      e2 = send(choose_l(std::move(e2)), kB2, kS0, DynValue::str("proof:" + std::to_string(remaining)));
      auto [r, e3] = recv(std::move(e2), kS0, kB2);
      receipt = str_of(r);
      close(std::move(e3));
    } else {
      close(choose_r(std::move(e2)));
    }
  });
  rt.join_all();

  out.receipt = receipt;
  out.branch = receipt ? TwoBuyerOutcome::Branch::Success : TwoBuyerOutcome::Branch::Failure;
  out.events = rt.events();
  out.live_endpoints_after = rt.live_endpoints();
  // B2 is agent 1; its third chan_create started the link, which relays every message.
  auto kids = children_of(out.events, 1);
  if (kids.size() == 3) {
    for (const auto& e : out.events) {
      if (e.rule == "recv" && e.tids == std::vector<std::uint64_t>{kids[2]}) {
        out.messages.push_back({*e.from, *e.to, e.payload->dump()});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// queue

QueueScript parse_queue_script(const std::string& text) {
  QueueScript out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string who, op;
    if (!(words >> who)) continue;
    auto bad = [&](const std::string& why) {
      return Error(Errc::Syntax, "queue script line " + std::to_string(lineno) + ": " + why);
    };
    if (who == "1" || who == "C1") {
      who = "1";
    } else if (who == "2" || who == "C2") {
      who = "2";
    } else {
      throw bad("client must be 1 or 2");
    }
    if (!(words >> op)) throw bad("missing operation");
    QueueOp q;
    q.client = who == "1" ? 1 : 2;
    if (op == "nil") {
      q.kind = QueueOp::Kind::Nil;
    } else if (op == "deq") {
      q.kind = QueueOp::Kind::Deq;
    } else if (op == "enq") {
      q.kind = QueueOp::Kind::Enq;
      if (!(words >> q.value)) throw bad("enq needs an integer");
    } else {
      throw bad("unknown operation '" + op + "'");
    }
    std::string extra;
    if (words >> extra) throw bad("trailing text");
    out.push_back(q);
  }
  return out;
}

std::string format_queue_script(const QueueScript& script) {
  std::string out;
  for (const auto& q : script) {
    out += "C" + std::to_string(q.client);
    switch (q.kind) {
      case QueueOp::Kind::Nil: out += " nil"; break;
      case QueueOp::Kind::Deq: out += " deq"; break;
      case QueueOp::Kind::Enq: out += " enq " + std::to_string(q.value); break;
    }
    out += '\n';
  }
  return out;
}

void validate_queue_script(const QueueScript& script) {
  std::size_t size = 0;
  for (std::size_t k = 0; k < script.size(); ++k) {
    const auto& q = script[k];
    auto bad = [&](const std::string& why) {
      return Error(Errc::ScriptViolation, "round " + std::to_string(k + 1) + ": " + why);
    };
    if (q.client != 1 && q.client != 2) throw bad("client must be 1 or 2");
    switch (q.kind) {
      case QueueOp::Kind::Enq: ++size; break;
      case QueueOp::Kind::Deq:
        if (size == 0) throw bad("deq on an empty queue");
        --size;
        break;
      case QueueOp::Kind::Nil:
        if (size != 0) throw bad("nil with " + std::to_string(size) + " queued");
        if (k + 1 != script.size()) throw bad("nil must be the last operation");
        return;
    }
  }
  throw Error(Errc::ScriptViolation, "script must end with nil");
}

SessionType queue_session(std::size_t rounds) {
  SessionType q = SessionType::nil();
  auto pi = PayloadSort::integer();
  for (std::size_t r = 0; r < rounds; ++r) {
    auto client = [&](Role i) {
      return choose_labeled(i, {SessionType::nil(), SessionType::msg(i, kS0, pi, q), SessionType::msg(kS0, i, pi, q)});
    };
    q = SessionType::choose(kS0, client(1), client(2));
  }
  return q;
}

namespace {

std::size_t label_of(QueueOp::Kind k) {
  switch (k) {
    case QueueOp::Kind::Nil: return 0;
    case QueueOp::Kind::Enq: return 1;
    case QueueOp::Kind::Deq: return 2;
  }
  return 0;
}

void require_size(bool ok, const char* who, std::size_t round, const char* what) {
  if (!ok) {
    throw Error(Errc::ScriptViolation,
                std::string(who) + " saw " + what + " in round " + std::to_string(round + 1));
  }
}

// C1 or C2: plays its own script lines, follows the other client's choices.
void queue_client(Endpoint e, Role me, const QueueScript& script, std::vector<std::size_t>& sizes) {
  const char* who = me == 1 ? "C1" : "C2";
  std::size_t n = 0;
  for (std::size_t round = 0;; ++round) {
    auto [t, e1] = choose_tag(std::move(e));
    e = std::move(e1);
    Role served = t == CTag::Left ? 1 : 2;
    std::size_t label;
    if (served == me) {
      const QueueOp& op = script.at(round);
      label = label_of(op.kind);
      e = choose_label(std::move(e), label, 3);
      if (op.kind == QueueOp::Kind::Enq) {
        e = send(std::move(e), me, kS0, DynValue::integer(op.value));
      } else if (op.kind == QueueOp::Kind::Deq) {
        e = recv(std::move(e), kS0, me).second;
      }
    } else {
      auto [l, e2] = recv_label(std::move(e), 3);
      label = l;
      e = std::move(e2);
      if (label != 0) e = skip(std::move(e));
    }
    if (label == 0) {
      require_size(n == 0, who, round, "nil on a non-empty queue");
      sizes.push_back(n);
      close(std::move(e));
      return;
    }
    if (label == 1) {
      ++n;
    } else {
      require_size(n > 0, who, round, "deq on an empty queue");
      --n;
    }
    sizes.push_back(n);
  }
}

}  // namespace

QueueOutcome run_queue_session(const QueueScript& script, RunOptions opts) {
  validate_queue_script(script);
  RoleUniverse u(3);
  SessionType s = queue_session(script.size());
  QueueOutcome out;
  Runtime rt(runtime_options(u, false, opts));

  Service server = service_create(
      [&script, &out](Endpoint e) {
        std::deque<std::int64_t> q;
        for (std::size_t round = 0;; ++round) {
          Role client = script.at(round).client;
          e = client == 1 ? choose_l(std::move(e)) : choose_r(std::move(e));
          auto [label, e1] = recv_label(std::move(e), 3);
          e = std::move(e1);
          if (label == 0) {
            require_size(q.empty(), "S0", round, "nil on a non-empty queue");
            out.sizes_s0.push_back(0);
            close(std::move(e));
            return;
          }
          if (label == 1) {
            auto [v, e2] = recv(std::move(e), client, kS0);
            q.push_back(int_of(v));
            e = std::move(e2);
          } else {
            require_size(!q.empty(), "S0", round, "deq on an empty queue");
            std::int64_t v = q.front();
            q.pop_front();
            out.dequeued.push_back(v);
            e = send(std::move(e), kS0, client, DynValue::integer(v));
          }
          out.sizes_s0.push_back(q.size());
        }
      },
      Group(u, {kS0}), s);

  Service c1 = service_create([&script, &out](Endpoint e) { queue_client(std::move(e), 1, script, out.sizes_c1); },
                              Group(u, {1}), s);

  rt.spawn({}, [&](std::vector<Endpoint>) {
    Endpoint to_server = service_request(rt, server);  // {1,2}
    Endpoint to_c1 = service_request(rt, c1);          // {0,2}
    Endpoint mine = chan2_link_create(std::move(to_server), std::move(to_c1));
    queue_client(std::move(mine), 2, script, out.sizes_c2);
  });
  rt.join_all();
  out.events = rt.events();
  out.live_endpoints_after = rt.live_endpoints();
  return out;
}

// ---------------------------------------------------------------------------
// list and colist

SessionType list_session() { return parse_session("repeat(0,msg(0,1,int):nil)"); }
SessionType colist_session() { return parse_session("repeat(1,msg(0,1,int):nil)"); }

namespace {

std::int64_t nth_value(std::size_t k) { return static_cast<std::int64_t>(k * k + 1); }

ListOutcome run_stream(std::size_t n, bool client_decides, const RunOptions& opts) {
  RoleUniverse u(2);
  SessionType s = client_decides ? colist_session() : list_session();
  ListOutcome out;
  Runtime rt(runtime_options(u, false, opts));
  // The decider continues with R and stops with L.
  auto server = [n, client_decides](Endpoint e) {
    for (std::size_t k = 0;; ++k) {
      if (client_decides) {
        auto [t, next] = choose_tag(std::move(e));
        e = std::move(next);
        if (t == CTag::Left) break;
      } else {
        if (k == n) {
          e = choose_l(std::move(e));
          break;
        }
        e = choose_r(std::move(e));
      }
      e = send(std::move(e), 0, 1, DynValue::integer(nth_value(k)));
    }
    close(std::move(e));
  };
  rt.spawn({}, [&](std::vector<Endpoint>) {
    Endpoint e = rt.chan_create(Group(u, {0}), s, server);
    for (std::size_t k = 0;; ++k) {
      if (client_decides) {
        if (k == n) {
          e = choose_l(std::move(e));
          break;
        }
        e = choose_r(std::move(e));
      } else {
        auto [t, next] = choose_tag(std::move(e));
        e = std::move(next);
        if (t == CTag::Left) break;
      }
      auto [v, next] = recv(std::move(e), 0, 1);
      out.values.push_back(int_of(v));
      e = std::move(next);
    }
    close(std::move(e));
  });
  rt.join_all();
  out.events = rt.events();
  out.live_endpoints_after = rt.live_endpoints();
  return out;
}

}  // namespace

ListOutcome run_list_session(std::size_t n, RunOptions opts) { return run_stream(n, false, opts); }
ListOutcome run_colist_session(std::size_t n, RunOptions opts) { return run_stream(n, true, opts); }

// ---------------------------------------------------------------------------
// deadlock demo

namespace {

// Sleeps 0..199 µs, drawn from (seed, k); no-op for seed 0.
void jitter(std::uint64_t seed, std::uint64_t k) {
  if (seed == 0) return;
  std::mt19937_64 g(seed * 0x9e3779b97f4a7c15ULL + k);
  std::this_thread::sleep_for(std::chrono::microseconds(g() % 200));
}

SessionType demo_inner() { return parse_session("msg(0,1,int):nil"); }
SessionType demo_outer() { return parse_session("msg(0,1,chan({0},msg(0,1,int):nil)):nil"); }

}  // namespace

DeadlockDiagnostic demo_chan2_create_deadlock(bool unsafe, RunOptions opts) {
  RoleUniverse u(2);
  DeadlockDiagnostic d;
  Runtime rt(runtime_options(u, unsafe, opts));
  // The child waits on the second channel before looking at the first; the
  // parent hands the second channel over the first. Nobody can move.
  std::uint64_t seed = opts.schedule_seed;
  auto [ch1, ch2] = rt.chan2_create(Group(u, {1}), demo_outer(), Group(u, {1}), demo_inner(), [seed](Endpoint x1, Endpoint x2) {
    jitter(seed, 1);
    auto [v, r2] = recv(std::move(x2), 0, 1);
    close(std::move(r2));
    auto [c, r1] = recv(std::move(x1), 0, 1);
    close(std::move(r1));
    close(send(std::get<Endpoint>(c.v), 0, 1, DynValue::integer(0)));
  });
  try {
    jitter(seed, 0);
    close(send(std::move(ch1), 0, 1, DynValue::endpoint(std::move(ch2))));
    rt.join_all();
  } catch (const Error& e) {
    if (e.code() != Errc::DeadlockDetected) throw;
    d.message = e.what();
    try {
      rt.join_all();
    } catch (const Error& again) {
      if (again.code() != Errc::DeadlockDetected) throw;
    }
  }
  d.deadlocked = rt.deadlocked();
  d.snapshot = rt.deadlock_snapshot();
  if (d.snapshot) d.snapshot_df_reducible = is_df_reducible(*d.snapshot);
  d.events = rt.events();
  return d;
}

DeadlockDiagnostic demo_chan2_create_control(RunOptions opts) {
  RoleUniverse u(2);
  DeadlockDiagnostic d;
  Runtime rt(runtime_options(u, false, opts));
  std::uint64_t seed = opts.schedule_seed;
  Endpoint ch2 = rt.chan_create(Group(u, {1}), demo_inner(), [seed](Endpoint x2) {
    jitter(seed, 1);
    auto [v, r2] = recv(std::move(x2), 0, 1);
    close(std::move(r2));
  });
  Endpoint ch1 = rt.chan_create(Group(u, {1}), demo_outer(), [](Endpoint x1) {
    auto [c, r1] = recv(std::move(x1), 0, 1);
    close(std::move(r1));
    close(send(std::get<Endpoint>(c.v), 0, 1, DynValue::integer(0)));
  });
  jitter(seed, 0);
  close(send(std::move(ch1), 0, 1, DynValue::endpoint(std::move(ch2))));
  rt.join_all();
  d.deadlocked = rt.deadlocked();
  d.events = rt.events();
  return d;
}

}  // namespace mrsession::proto

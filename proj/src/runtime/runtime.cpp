#include "mrsession/runtime/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <deque>

#include "../overloaded.hpp"

namespace mrsession::rt {

struct Transfer {
  DynValue value;
  bool done = false;
};

// A unidirectional rendezvous cell. After a splice the old conduit forwards to
// its replacement so that agents already waiting on it follow along.
struct Conduit {
  std::uint64_t id = 0;
  std::deque<std::shared_ptr<Transfer>> queue;
  std::shared_ptr<Conduit> redirect;
};

namespace {

std::shared_ptr<Conduit> resolve(std::shared_ptr<Conduit> c) {
  while (c->redirect) c = c->redirect;
  return c;
}

thread_local Runtime* tl_runtime = nullptr;
thread_local AgentId tl_agent = 0;

int env_watchdog_ms() {
  if (const char* v = std::getenv("MRSESSION_WATCHDOG_MS")) {
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (end != v && n >= 0) return static_cast<int>(n);
  }
  return 2000;
}

}  // namespace

struct ChannelCore {
  std::uint64_t id = 0;
  int nrole = 0;
  // cells[i*nrole+j] carries msg(i,j); present iff i and j are on opposite sides
  std::vector<std::shared_ptr<Conduit>> cells;
  std::weak_ptr<EndpointState> ends[2];  // [positive, negative]

  std::shared_ptr<Conduit>& cell(Role i, Role j) { return cells[static_cast<std::size_t>(i * nrole + j)]; }
};

struct EndpointState {
  Runtime* rt = nullptr;
  std::uint64_t chan_id = 0;
  // The id reported in snapshots; a splice renames the far peer to its new partner's id.
  std::atomic<std::uint64_t> report_id = 0;
  Group group;
  SessionType cursor;
  std::shared_ptr<ChannelCore> core;
  std::uint64_t version = 0;
  bool closed = false;
  bool closing = false;
  int segment_depth = 0;
  AgentId holder = 0;

  EndpointState(Runtime* r, std::uint64_t id, Group g, SessionType s, std::shared_ptr<ChannelCore> c,
                AgentId h)
      : rt(r), chan_id(id), report_id(id), group(std::move(g)), cursor(std::move(s)), core(std::move(c)), holder(h) {}

  bool positive() const { return group.contains(0); }
  ChannelHalf half() const { return {report_id, positive()}; }
  std::shared_ptr<EndpointState> peer() const { return core->ends[positive() ? 1 : 0].lock(); }
};

// ---------------------------------------------------------------------------
// values

nlohmann::json to_json(const DynValue& v) {
  return std::visit(overloaded{
                        [](const DynValue::Unit&) { return nlohmann::json(nullptr); },
                        [](std::int64_t n) { return nlohmann::json(n); },
                        [](bool b) { return nlohmann::json(b); },
                        [](const std::string& s) { return nlohmann::json(s); },
                        [](const Endpoint& e) {
                          nlohmann::json j;
                          j["chan"] = e.chan_id();
                          j["group"] = e.group().to_string();
                          return j;
                        },
                        [](const DynValue::Tuple& t) {
                          nlohmann::json j = nlohmann::json::array();
                          for (const auto& p : t) j.push_back(to_json(p));
                          return j;
                        },
                        [](CTag t) { return nlohmann::json(t == CTag::Left ? "L" : "R"); },
                    },
                    v.v);
}

std::string format_value(const DynValue& v) {
  return std::visit(overloaded{
                        [](const DynValue::Unit&) { return std::string("()"); },
                        [](std::int64_t n) { return std::to_string(n); },
                        [](bool b) { return std::string(b ? "true" : "false"); },
                        [](const std::string& s) { return nlohmann::json(s).dump(); },
                        [](const Endpoint& e) {
                          return "chan#" + std::to_string(e.chan_id()) + e.group().to_string();
                        },
                        [](const DynValue::Tuple& t) {
                          std::string out = "(";
                          for (std::size_t i = 0; i < t.size(); ++i) {
                            if (i) out += ',';
                            out += format_value(t[i]);
                          }
                          return out + ")";
                        },
                        [](CTag t) { return std::string(t == CTag::Left ? "L" : "R"); },
                    },
                    v.v);
}

// ---------------------------------------------------------------------------
// Endpoint

const EndpointState& Endpoint::state() const {
  if (!st_) throw Error(Errc::UseAfterConsume, "empty endpoint handle");
  return *st_;
}

std::uint64_t Endpoint::chan_id() const {
  return state().report_id;
}

const Group& Endpoint::group() const { return state().group; }

SessionType Endpoint::cursor() const {
  const auto& s = state();
  std::lock_guard lk(s.rt->mu_);
  return s.cursor;
}

bool Endpoint::valid() const {
  if (!st_) return false;
  std::lock_guard lk(st_->rt->mu_);
  return !st_->closed && st_->version == version_;
}

Runtime& Endpoint::runtime() const { return *state().rt; }

// ---------------------------------------------------------------------------
// Runtime

namespace {
struct TlsSave {
  Runtime* rt;
  AgentId agent;
};
thread_local std::vector<TlsSave> tl_saved;
}  // namespace

Runtime::Runtime(RuntimeOptions opts)
    : opts_(opts), watchdog_ms_(opts.watchdog_ms >= 0 ? opts.watchdog_ms : env_watchdog_ms()) {
  tl_saved.push_back({tl_runtime, tl_agent});
  tl_runtime = this;
  tl_agent = 0;
  agents_[0];
  next_agent_ = 1;
  if (opts_.record_events) {
    TraceRecord r;
    r.step = 0;
    r.rule = "init";
    r.tids = {0};
    if (opts_.record_snapshots) r.rho_ch = snapshot_locked();
    events_.push_back(std::move(r));
  }
  if (watchdog_ms_ > 0) watchdog_ = std::thread([this] { watchdog_loop(); });
}

Runtime::~Runtime() {
  {
    Lock lk(mu_);
    shutdown_ = true;
    cv_.notify_all();
  }
  if (watchdog_.joinable()) watchdog_.join();
  for (auto& [id, a] : agents_) {
    if (a.thread.joinable()) a.thread.join();
  }
  if (tl_runtime == this && !tl_saved.empty()) {
    tl_runtime = tl_saved.back().rt;
    tl_agent = tl_saved.back().agent;
    tl_saved.pop_back();
  }
}

AgentId Runtime::self_locked() const {
  if (tl_runtime != this) {
    throw Error(Errc::PreconditionViolated, "runtime used from a thread that is not one of its agents");
  }
  return tl_agent;
}

std::shared_ptr<EndpointState> Runtime::take_locked(const Endpoint& ep, const char* op) {
  if (!ep.st_) throw Error(Errc::UseAfterConsume, std::string(op) + " on an empty endpoint handle");
  if (ep.st_->rt != this) throw Error(Errc::PreconditionViolated, std::string(op) + " on a foreign endpoint");
  const auto& st = ep.st_;
  if (st->closed || ep.version_ != st->version) {
    throw Error(Errc::UseAfterConsume,
                std::string(op) + " on a consumed handle of channel " + std::to_string(st->report_id));
  }
  AgentId me = self_locked();
  if (st->holder != me) {
    throw Error(Errc::PreconditionViolated, std::string(op) + ": channel " + std::to_string(st->report_id) +
                                                " is held by agent " + std::to_string(st->holder));
  }
  return st;
}

Endpoint Runtime::reissue_locked(const std::shared_ptr<EndpointState>& st) {
  ++st->version;
  return Endpoint(st, st->version);
}

// Both halves closing: the rendezvous completes and the channel leaves the pool.
void Runtime::finish_close_locked(const std::shared_ptr<EndpointState>& st) {
  auto peer = st->peer();
  if (!st->closing || !peer || !peer->closing) return;
  for (auto* s : {st.get(), peer.get()}) {
    s->closed = true;
    registry_.erase(s);
  }
  ++progress_;
  cv_.notify_all();
}

std::pair<std::shared_ptr<EndpointState>, std::shared_ptr<EndpointState>> Runtime::make_channel_locked(
    const Group& g, const SessionType& s, AgentId child, AgentId parent) {
  auto core = std::make_shared<ChannelCore>();
  core->id = next_chan_++;
  core->nrole = opts_.universe.nrole();
  core->cells.resize(static_cast<std::size_t>(core->nrole * core->nrole));
  for (Role i = 0; i < core->nrole; ++i) {
    for (Role j = 0; j < core->nrole; ++j) {
      if (g.contains(i) != g.contains(j)) {
        auto c = std::make_shared<Conduit>();
        c->id = next_conduit_++;
        core->cell(i, j) = c;
      }
    }
  }
  auto cst = std::make_shared<EndpointState>(this, core->id, g, s, core, child);
  auto pst = std::make_shared<EndpointState>(this, core->id, g.complement(), s, core, parent);
  core->ends[cst->positive() ? 0 : 1] = cst;
  core->ends[pst->positive() ? 0 : 1] = pst;
  registry_[cst.get()] = cst;
  registry_[pst.get()] = pst;
  return {cst, pst};
}

AgentId Runtime::new_agent_locked() {
  AgentId id = next_agent_++;
  agents_[id];
  return id;
}

void Runtime::start_agent_locked(AgentId id, std::function<void()> fn) {
  agents_.at(id).thread = std::thread([this, id, fn = std::move(fn)]() mutable {
    tl_runtime = this;
    tl_agent = id;
    std::exception_ptr err;
    try {
      fn();
    } catch (...) {
      err = std::current_exception();
    }
    fn = nullptr;  // drop captured handles before reporting completion
    Lock lk(mu_);
    auto& a = agents_.at(id);
    a.error = err;
    a.state = Agent::State::Done;
    ++progress_;
    check_deadlock_locked();
    cv_.notify_all();
  });
}

namespace {
void validate_channel(RoleUniverse u, const Group& g, const SessionType& s) {
  if (g.universe() != u) throw Error(Errc::UniverseMismatch, "group " + g.to_string() + " is from another universe");
  if (!g.is_proper()) throw Error(Errc::EmptyGroup, "group " + g.to_string() + " or its complement is empty");
  if (!well_formed(s, u)) throw Error(Errc::IllFormedSession, format_session(s));
}
}  // namespace

Endpoint Runtime::chan_create_with(const Group& g, const SessionType& s, std::vector<Endpoint> moved,
                                   std::function<void(Endpoint, std::vector<Endpoint>)> body) {
  validate_channel(opts_.universe, g, s);
  Lock lk(mu_);
  AgentId parent = self_locked();
  std::vector<std::shared_ptr<EndpointState>> taken;
  for (const auto& m : moved) {
    auto st = take_locked(m, "chan_create");
    for (const auto& t : taken) {
      if (t == st) throw Error(Errc::PreconditionViolated, "endpoint moved twice");
    }
    taken.push_back(st);
  }
  AgentId child = new_agent_locked();
  auto [cst, pst] = make_channel_locked(g, s, child, parent);
  std::vector<Endpoint> handed;
  for (const auto& st : taken) {
    st->holder = child;
    handed.push_back(reissue_locked(st));
  }
  record_locked("chan_create", {parent, child}, cst->chan_id);
  Endpoint mine(cst, cst->version);
  start_agent_locked(child, [body = std::move(body), mine, handed]() mutable {
    body(std::move(mine), std::move(handed));
  });
  return Endpoint(pst, pst->version);
}

Endpoint Runtime::chan_create(const Group& g, const SessionType& s, std::function<void(Endpoint)> body) {
  return chan_create_with(g, s, {}, [body = std::move(body)](Endpoint e, std::vector<Endpoint>) {
    body(std::move(e));
  });
}

std::pair<Endpoint, Endpoint> Runtime::chan2_create(const Group& g1, const SessionType& s1, const Group& g2,
                                                    const SessionType& s2,
                                                    std::function<void(Endpoint, Endpoint)> body) {
  if (!opts_.allow_unsafe) throw Error(Errc::UnsafeDisabled, "chan2_create needs the unsafe switch");
  validate_channel(opts_.universe, g1, s1);
  validate_channel(opts_.universe, g2, s2);
  Lock lk(mu_);
  AgentId parent = self_locked();
  AgentId child = new_agent_locked();
  auto [c1, p1] = make_channel_locked(g1, s1, child, parent);
  auto [c2, p2] = make_channel_locked(g2, s2, child, parent);
  nlohmann::json chans = nlohmann::json::array({c1->chan_id, c2->chan_id});
  record_locked("chan2_create", {parent, child}, c1->chan_id, chans);
  Endpoint a(c1, c1->version), b(c2, c2->version);
  start_agent_locked(child, [body = std::move(body), a, b]() mutable { body(std::move(a), std::move(b)); });
  return {Endpoint(p1, p1->version), Endpoint(p2, p2->version)};
}

void Runtime::spawn(std::vector<Endpoint> moved, std::function<void(std::vector<Endpoint>)> body) {
  Lock lk(mu_);
  AgentId parent = self_locked();
  std::vector<std::shared_ptr<EndpointState>> taken;
  for (const auto& m : moved) {
    auto st = take_locked(m, "thread_create");
    for (const auto& t : taken) {
      if (t == st) throw Error(Errc::PreconditionViolated, "endpoint moved twice");
    }
    taken.push_back(st);
  }
  AgentId child = new_agent_locked();
  std::vector<Endpoint> handed;
  for (const auto& st : taken) {
    st->holder = child;
    handed.push_back(reissue_locked(st));
  }
  record_locked("thread_create", {parent, child}, std::nullopt);
  start_agent_locked(child, [body = std::move(body), handed]() mutable { body(std::move(handed)); });
}

void Runtime::join_all() {
  Lock lk(mu_);
  AgentId me = self_locked();
  if (me != 0) throw Error(Errc::PreconditionViolated, "join_all is reserved for agent 0");
  auto others_done = [this] {
    for (const auto& [id, a] : agents_) {
      if (id != 0 && a.state != Agent::State::Done) return false;
    }
    return true;
  };
  try {
    block(lk, others_done, "join");
  } catch (const Error& e) {
    if (e.code() != Errc::DeadlockDetected) throw;
    cv_.wait(lk, others_done);
  }
  std::vector<std::thread> threads;
  for (auto& [id, a] : agents_) {
    if (a.thread.joinable()) threads.push_back(std::move(a.thread));
  }
  lk.unlock();
  for (auto& t : threads) t.join();
  lk.lock();
  std::exception_ptr first;
  std::exception_ptr deadlock;
  for (auto& [id, a] : agents_) {
    if (!a.error) continue;
    try {
      std::rethrow_exception(a.error);
    } catch (const Error& e) {
      if (e.code() == Errc::DeadlockDetected) {
        if (!deadlock) deadlock = a.error;
      } else if (!first) {
        first = a.error;
      }
    } catch (...) {
      if (!first) first = a.error;
    }
    a.error = nullptr;
  }
  if (first) std::rethrow_exception(first);
  if (deadlock) std::rethrow_exception(deadlock);
  if (deadlock_) throw Error(Errc::DeadlockDetected, deadlock_reason_);
}

void Runtime::block(Lock& lk, std::function<bool()> ready, std::string what) {
  if (ready()) return;
  auto& a = agents_.at(self_locked());
  a.state = Agent::State::Blocked;
  a.ready = ready;
  a.waiting_on = std::move(what);
  check_deadlock_locked();
  while (!ready()) {
    if (deadlock_ || shutdown_) {
      a.state = Agent::State::Running;
      a.ready = nullptr;
      throw Error(Errc::DeadlockDetected, deadlock_ ? deadlock_reason_ : "runtime shut down");
    }
    cv_.wait(lk);
  }
  a.state = Agent::State::Running;
  a.ready = nullptr;
}

void Runtime::check_deadlock_locked() {
  if (deadlock_) return;
  bool blocked = false;
  for (const auto& [id, a] : agents_) {
    switch (a.state) {
      case Agent::State::Running:
        return;
      case Agent::State::Blocked:
        if (a.ready && a.ready()) return;
        blocked = true;
        break;
      case Agent::State::Done:
        break;
    }
  }
  if (blocked) declare_deadlock_locked("every live agent is blocked");
}

void Runtime::declare_deadlock_locked(const std::string& why) {
  deadlock_ = true;
  std::string detail = why;
  std::vector<AgentId> waiting;
  for (const auto& [id, a] : agents_) {
    if (a.state == Agent::State::Blocked) {
      detail += "; agent " + std::to_string(id) + " waits on " + a.waiting_on;
      waiting.push_back(id);
    }
  }
  deadlock_reason_ = detail;
  deadlock_snapshot_ = snapshot_locked();
  record_locked("deadlock", waiting, std::nullopt);
  cv_.notify_all();
}

void Runtime::watchdog_loop() {
  using clock = std::chrono::steady_clock;
  const auto window = std::chrono::milliseconds(watchdog_ms_);
  const auto tick = std::chrono::milliseconds(std::clamp(watchdog_ms_ / 4, 5, 100));
  Lock lk(mu_);
  std::uint64_t seen = progress_;
  auto since = clock::now();
  while (!shutdown_) {
    cv_.wait_for(lk, tick);
    if (shutdown_) break;
    if (progress_ != seen) {
      seen = progress_;
      since = clock::now();
      continue;
    }
    bool stuck = false;
    for (const auto& [id, a] : agents_) {
      if (a.state == Agent::State::Blocked && !(a.ready && a.ready())) stuck = true;
    }
    if (!stuck) {
      since = clock::now();
      continue;
    }
    if (!deadlock_ && clock::now() - since >= window) {
      declare_deadlock_locked("no progress for " + std::to_string(watchdog_ms_) + " ms");
    }
  }
}

void Runtime::record_locked(std::string rule, std::vector<AgentId> tids, std::optional<std::uint64_t> chan,
                            std::optional<nlohmann::json> payload, std::optional<int> from,
                            std::optional<int> to) {
  ++progress_;
  if (!opts_.record_events) return;
  TraceRecord r;
  r.step = events_.size();
  r.rule = std::move(rule);
  r.tids.assign(tids.begin(), tids.end());
  r.chan_id = chan;
  r.payload = std::move(payload);
  r.from = from;
  r.to = to;
  if (opts_.record_snapshots) r.rho_ch = snapshot_locked();
  events_.push_back(std::move(r));
}

ChannelSetCollection Runtime::snapshot_locked() const {
  std::map<AgentId, ChannelSet> by_agent;
  for (const auto& [id, a] : agents_) {
    if (a.state != Agent::State::Done) by_agent[id];
  }
  for (const auto& [p, st] : registry_) by_agent[st->holder].push_back(st->half());
  std::vector<ChannelSet> sets;
  for (auto& [id, set] : by_agent) sets.push_back(std::move(set));
  return ChannelSetCollection(std::move(sets));
}

ChannelSetCollection Runtime::snapshot() const {
  std::lock_guard lk(mu_);
  return snapshot_locked();
}

std::vector<TraceRecord> Runtime::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::size_t Runtime::live_endpoints() const {
  std::lock_guard lk(mu_);
  return registry_.size();
}

std::size_t Runtime::agents_spawned() const {
  std::lock_guard lk(mu_);
  return agents_.size() - 1;
}

std::size_t Runtime::agents_running() const {
  std::lock_guard lk(mu_);
  std::size_t n = 0;
  for (const auto& [id, a] : agents_) {
    if (id != 0 && a.state != Agent::State::Done) ++n;
  }
  return n;
}

bool Runtime::deadlocked() const {
  std::lock_guard lk(mu_);
  return deadlock_;
}

std::optional<ChannelSetCollection> Runtime::deadlock_snapshot() const {
  std::lock_guard lk(mu_);
  return deadlock_snapshot_;
}

void Runtime::write_locked(Lock& lk, const std::shared_ptr<Conduit>& c, DynValue v) {
  auto t = std::make_shared<Transfer>();
  t->value = std::move(v);
  resolve(c)->queue.push_back(t);
  ++progress_;
  cv_.notify_all();
  block(lk, [t] { return t->done; }, "write to conduit " + std::to_string(resolve(c)->id));
}

DynValue Runtime::read_locked(Lock& lk, const std::shared_ptr<Conduit>& c) {
  block(lk, [c] { return !resolve(c)->queue.empty(); }, "read from conduit " + std::to_string(resolve(c)->id));
  auto r = resolve(c);
  auto t = r->queue.front();
  r->queue.pop_front();
  t->done = true;
  ++progress_;
  cv_.notify_all();
  return std::move(t->value);
}

void Runtime::detach_payload_locked(DynValue& v, const std::shared_ptr<EndpointState>& sender) {
  if (auto* e = std::get_if<Endpoint>(&v.v)) {
    auto st = take_locked(*e, "send (payload)");
    if (st == sender) throw Error(Errc::ProtocolViolation, "an endpoint cannot be sent over itself");
    if (st->segment_depth > 0) throw Error(Errc::ProtocolViolation, "endpoint is inside an append segment");
    *e = reissue_locked(st);
  } else if (auto* t = std::get_if<DynValue::Tuple>(&v.v)) {
    for (auto& p : *t) detach_payload_locked(p, sender);
  }
}

void Runtime::adopt_locked(DynValue& v, AgentId holder) {
  if (auto* e = std::get_if<Endpoint>(&v.v)) {
    e->st_->holder = holder;
  } else if (auto* t = std::get_if<DynValue::Tuple>(&v.v)) {
    for (auto& p : *t) adopt_locked(p, holder);
  }
}

bool Runtime::sort_matches_locked(const DynValue& v, const PayloadSort& s) const {
  return std::visit(overloaded{
                        [&](const sort::Unit&) { return std::holds_alternative<DynValue::Unit>(v.v); },
                        [&](const sort::Int&) { return std::holds_alternative<std::int64_t>(v.v); },
                        [&](const sort::Bool&) { return std::holds_alternative<bool>(v.v); },
                        [&](const sort::Str&) { return std::holds_alternative<std::string>(v.v); },
                        [&](const sort::Chan& c) {
                          const auto* e = std::get_if<Endpoint>(&v.v);
                          if (!e || !e->st_ || e->st_->rt != this) return false;
                          const auto& st = *e->st_;
                          return !st.closed && st.version == e->version_ && st.group.members() == c.group &&
                                 equivalent(st.cursor, c.proto);
                        },
                        [&](const sort::Tuple& t) {
                          const auto* parts = std::get_if<DynValue::Tuple>(&v.v);
                          if (!parts || parts->size() != t.parts.size()) return false;
                          for (std::size_t i = 0; i < t.parts.size(); ++i) {
                            if (!sort_matches_locked((*parts)[i], t.parts[i])) return false;
                          }
                          return true;
                        },
                    },
                    s.node().v);
}

// ---------------------------------------------------------------------------
// endpoint operations

namespace {
Runtime& owner(const Endpoint& ep) { return ep.runtime(); }

[[noreturn]] void wrong_head(const char* op, const HeadAction& h) {
  throw Error(Errc::ProtocolViolation, std::string(op) + " but the session expects " + describe(h));
}
}  // namespace

Endpoint send(Endpoint ep, Role from, Role to, DynValue v) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto st = rt.take_locked(ep, "send");
  HeadAction h = head_action(st->group, st->cursor);
  const auto* s = std::get_if<head::Send>(&h);
  if (!s || s->from != from || s->to != to) {
    wrong_head(("send(" + std::to_string(from) + "," + std::to_string(to) + ")").c_str(), h);
  }
  if (!rt.sort_matches_locked(v, s->sort)) {
    throw Error(Errc::ProtocolViolation, "payload " + format_value(v) + " does not have sort " + format_sort(s->sort));
  }
  rt.detach_payload_locked(v, st);
  auto payload = to_json(v);
  auto cell = st->core->cell(from, to);
  st->cursor = s->cont;
  Endpoint out = rt.reissue_locked(st);
  rt.write_locked(lk, cell, std::move(v));
  rt.record_locked("send", {rt.self_locked()}, st->report_id, std::move(payload), from, to);
  return out;
}

std::pair<DynValue, Endpoint> recv(Endpoint ep, Role from, Role to) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto st = rt.take_locked(ep, "recv");
  HeadAction h = head_action(st->group, st->cursor);
  const auto* r = std::get_if<head::Recv>(&h);
  if (!r || r->from != from || r->to != to) {
    wrong_head(("recv(" + std::to_string(from) + "," + std::to_string(to) + ")").c_str(), h);
  }
  auto cell = st->core->cell(from, to);
  st->cursor = r->cont;
  Endpoint out = rt.reissue_locked(st);
  DynValue v = rt.read_locked(lk, cell);
  AgentId me = rt.self_locked();
  rt.adopt_locked(v, me);
  rt.record_locked("recv", {me}, st->report_id, to_json(v), from, to);
  return {std::move(v), std::move(out)};
}

Endpoint skip(Endpoint ep) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto st = rt.take_locked(ep, "skip");
  HeadAction h = head_action(st->group, st->cursor);
  const auto* s = std::get_if<head::Skip>(&h);
  if (!s) wrong_head("skip", h);
  st->cursor = s->cont;
  rt.record_locked("skip", {rt.self_locked()}, st->report_id, std::nullopt, s->from, s->to);
  return rt.reissue_locked(st);
}

void close(Endpoint ep) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto st = rt.take_locked(ep, "close");
  HeadAction h = head_action(st->group, st->cursor);
  if (!std::holds_alternative<head::Close>(h)) wrong_head("close", h);
  if (st->segment_depth > 0) throw Error(Errc::ProtocolViolation, "close inside an append segment");
  st->closing = true;
  ++st->version;
  rt.finish_close_locked(st);
  rt.block(lk, [st] { return st->closed; }, "close of channel " + std::to_string(st->report_id));
  rt.record_locked("close", {rt.self_locked()}, st->report_id);
}

Endpoint choose(Endpoint ep, CTag tag) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto st = rt.take_locked(ep, "choose");
  HeadAction h = head_action(st->group, st->cursor);
  const auto* c = std::get_if<head::ChooseSend>(&h);
  if (!c) wrong_head("choose", h);
  Role d = c->decider;
  auto core = st->core;
  st->cursor = tag == CTag::Left ? c->left : c->right;
  Endpoint out = rt.reissue_locked(st);
  for (Role j : st->group.complement().members().members()) {
    rt.write_locked(lk, core->cell(d, j), DynValue{tag});
  }
  rt.record_locked("choose", {rt.self_locked()}, st->report_id, to_json(DynValue{tag}), d, std::nullopt);
  return out;
}

std::pair<CTag, Endpoint> choose_tag(Endpoint ep) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto st = rt.take_locked(ep, "choose_tag");
  HeadAction h = head_action(st->group, st->cursor);
  const auto* c = std::get_if<head::ChooseRecv>(&h);
  if (!c) wrong_head("choose_tag", h);
  Role d = c->decider;
  auto left = c->left, right = c->right;
  auto core = st->core;
  Endpoint out = rt.reissue_locked(st);
  std::optional<CTag> tag;
  bool consistent = true;
  for (Role j : st->group.members().members()) {
    DynValue v = rt.read_locked(lk, core->cell(d, j));
    const auto* t = std::get_if<CTag>(&v.v);
    if (!t) throw Error(Errc::ProtocolViolation, "expected a choice tag, got " + format_value(v));
    if (tag && *tag != *t) consistent = false;
    if (!tag) tag = *t;
  }
  if (!consistent) {
    throw Error(Errc::InconsistentBroadcast, "role " + std::to_string(d) + " sent different tags");
  }
  st->cursor = *tag == CTag::Left ? left : right;
  rt.record_locked("choose_tag", {rt.self_locked()}, st->report_id, to_json(DynValue{*tag}), d, std::nullopt);
  return {*tag, std::move(out)};
}

Endpoint chan_append(Endpoint ep, const std::function<Endpoint(Endpoint)>& segment) {
  Runtime& rt = owner(ep);
  Runtime::Lock lk(rt.mu_);
  auto es = rt.take_locked(ep, "chan_append");
  const auto* a = std::get_if<st::Append>(&es->cursor.node().v);
  if (!a) throw Error(Errc::ProtocolViolation, "chan_append needs an append cursor, have " + format_session(es->cursor));
  SessionType rest = a->second;
  es->cursor = a->first;
  ++es->segment_depth;
  Endpoint inner = rt.reissue_locked(es);
  lk.unlock();
  Endpoint back = segment(inner);
  lk.lock();
  if (!same_endpoint(back, inner)) {
    throw Error(Errc::SegmentIdentityViolation, "segment returned a different endpoint");
  }
  rt.take_locked(back, "chan_append");
  if (!normalize_head(es->cursor).is_nil()) {
    throw Error(Errc::SegmentIncomplete, "segment left " + format_session(es->cursor));
  }
  --es->segment_depth;
  es->cursor = rest;
  return rt.reissue_locked(es);
}

HeadAction next_action(const Endpoint& ep) {
  Runtime& rt = owner(ep);
  std::lock_guard lk(rt.mu_);
  if (!ep.st_ || ep.st_->closed || ep.st_->version != ep.version_) {
    throw Error(Errc::UseAfterConsume, "inspecting a consumed handle");
  }
  return head_action(ep.st_->group, ep.st_->cursor);
}

void splice_link(Endpoint ep0, Endpoint ep1) {
  Runtime& rt = owner(ep0);
  Runtime::Lock lk(rt.mu_);
  auto s0 = rt.take_locked(ep0, "splice_link");
  auto s1 = rt.take_locked(ep1, "splice_link");
  if (s0 == s1) throw Error(Errc::PreconditionViolated, "splice_link of an endpoint with itself");
  if (s1->group != s0->group.complement()) {
    throw Error(Errc::SessionMismatch, "groups " + s0->group.to_string() + " and " + s1->group.to_string() +
                                           " are not complementary");
  }
  if (!equivalent(s0->cursor, s1->cursor)) {
    throw Error(Errc::SessionMismatch, format_session(s0->cursor) + " vs " + format_session(s1->cursor));
  }
  if (s0->segment_depth > 0 || s1->segment_depth > 0) {
    throw Error(Errc::ProtocolViolation, "splice_link inside an append segment");
  }
  if (normalize_head(s0->cursor).is_nil()) {
    lk.unlock();
    close(std::move(ep0));
    close(std::move(ep1));
    return;
  }
  auto p0 = s0->peer();
  auto p1 = s1->peer();
  if (!p0 || !p1 || p0->closed || p1->closed) {
    throw Error(Errc::ProtocolViolation, "splice_link needs both far ends alive");
  }
  const Group& g = s0->group;
  auto& c0 = *s0->core;
  auto& c1 = *s1->core;
  auto adopt = [&](std::shared_ptr<Conduit>& slot, const std::shared_ptr<Conduit>& by) {
    auto old = resolve(slot);
    auto target = resolve(by);
    if (old == target) return;
    for (auto& t : old->queue) target->queue.push_back(t);
    old->queue.clear();
    old->redirect = target;
    slot = target;
  };
  int n = c0.nrole;
  for (Role i = 0; i < n; ++i) {
    for (Role j = 0; j < n; ++j) {
      if (!g.contains(i) || g.contains(j)) continue;
      // P0 now reads what P1 writes on (i,j), and P1 reads what P0 writes on (j,i).
      adopt(c0.cell(i, j), c1.cell(i, j));
      adopt(c1.cell(j, i), c0.cell(j, i));
    }
  }
  // Each far end finds its partner through its own core, which after earlier
  // splices need not be the core of the endpoint being absorbed.
  p0->core->ends[p1->positive() ? 0 : 1] = p1;
  p1->core->ends[p0->positive() ? 0 : 1] = p0;
  p1->report_id = s0->report_id.load();
  for (auto* s : {s0.get(), s1.get()}) {
    s->closed = true;
    ++s->version;
    rt.registry_.erase(s);
  }
  // Far ends that already reached close now face each other.
  rt.finish_close_locked(p0);
  nlohmann::json absorbed = {{"absorbed", s1->report_id.load()}};
  rt.record_locked("splice", {rt.self_locked()}, s0->report_id, absorbed);
  rt.cv_.notify_all();
}

// ---------------------------------------------------------------------------
// services

Service::Service(std::function<void(Endpoint)> setup, Group g, SessionType s)
    : setup_(std::move(setup)), group_(std::move(g)), proto_(std::move(s)) {
  validate_channel(group_.universe(), group_, proto_);
}

Endpoint Service::request(Runtime& rt) const { return rt.chan_create(group_, proto_, setup_); }

}  // namespace mrsession::rt

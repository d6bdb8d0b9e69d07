#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mrsession/df_analysis.hpp"
#include "mrsession/session_type.hpp"
#include "mrsession/trace.hpp"

namespace mrsession::rt {

using AgentId = std::uint64_t;

class Runtime;
struct EndpointState;
struct Conduit;

/// A handle on one side of a multirole channel. Every operation consumes the
/// handle it is given and returns a successor; reusing a consumed handle
/// raises UseAfterConsume.
class Endpoint {
 public:
  Endpoint() = default;

  std::uint64_t chan_id() const;
  const Group& group() const;
  SessionType cursor() const;
  /// Positive iff role 0 is in the group.
  bool positive() const { return group().contains(0); }
  /// The handle is current and the endpoint is not closed.
  bool valid() const;
  Runtime& runtime() const;

  friend bool same_endpoint(const Endpoint& a, const Endpoint& b) noexcept { return a.st_ == b.st_; }

 private:
  friend class Runtime;
  friend HeadAction next_action(const Endpoint& ep);
  Endpoint(std::shared_ptr<EndpointState> s, std::uint64_t v) : st_(std::move(s)), version_(v) {}
  const EndpointState& state() const;

  std::shared_ptr<EndpointState> st_;
  std::uint64_t version_ = 0;
};

enum class CTag { Left, Right };

/// Message payloads. Endpoints move to the receiver (delegation); tags are
/// what choose puts on the wire.
struct DynValue {
  struct Unit {
    friend bool operator==(Unit, Unit) = default;
  };
  using Tuple = std::vector<DynValue>;

  std::variant<Unit, std::int64_t, bool, std::string, Endpoint, Tuple, CTag> v;

  static DynValue unit() { return {Unit{}}; }
  static DynValue integer(std::int64_t n) { return {n}; }
  static DynValue boolean(bool b) { return {b}; }
  static DynValue str(std::string s) { return {std::move(s)}; }
  static DynValue endpoint(Endpoint e) { return {std::move(e)}; }
  static DynValue tuple(Tuple parts) { return {std::move(parts)}; }
};

/// int → number, bool, str → string, unit → null, tuple → array,
/// endpoint → {"chan":id,"group":"{..}"}, tag → "L"/"R".
nlohmann::json to_json(const DynValue& v);
std::string format_value(const DynValue& v);

struct RuntimeOptions {
  RoleUniverse universe;
  /// Admit chan2_create.
  bool allow_unsafe = false;
  /// Stall window for the watchdog; negative reads MRSESSION_WATCHDOG_MS
  /// (default 2000), zero disables the timer (exact detection stays on).
  int watchdog_ms = -1;
  bool record_events = true;
  /// Attach ℛ_CH to every event.
  bool record_snapshots = true;
};

/// Agents, channels and the event log of one execution. The constructing
/// thread is agent 0.
class Runtime {
 public:
  explicit Runtime(RuntimeOptions opts = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  RoleUniverse universe() const noexcept { return opts_.universe; }
  int watchdog_ms() const noexcept { return watchdog_ms_; }

  /// Spawns an agent running body on the chan(g,s) side and returns the
  /// chan(ḡ,s) side.
  Endpoint chan_create(const Group& g, const SessionType& s, std::function<void(Endpoint)> body);
  /// As chan_create, and the endpoints in `moved` travel to the new agent.
  Endpoint chan_create_with(const Group& g, const SessionType& s, std::vector<Endpoint> moved,
                            std::function<void(Endpoint, std::vector<Endpoint>)> body);
  /// The unsafe two-channel variant: the new agent gets chan(g1,s1) and
  /// chan(g2,s2), the caller the complements. Throws UnsafeDisabled unless
  /// the runtime allows it.
  std::pair<Endpoint, Endpoint> chan2_create(const Group& g1, const SessionType& s1, const Group& g2,
                                             const SessionType& s2,
                                             std::function<void(Endpoint, Endpoint)> body);
  /// thread_create: a new agent that owns `moved`.
  void spawn(std::vector<Endpoint> moved, std::function<void(std::vector<Endpoint>)> body);

  /// Waits for every other agent, then rethrows the first agent failure
  /// (or DeadlockDetected).
  void join_all();

  ChannelSetCollection snapshot() const;
  std::vector<TraceRecord> events() const;
  std::size_t live_endpoints() const;
  std::size_t agents_spawned() const;
  /// Agents other than the caller's that have not finished.
  std::size_t agents_running() const;
  bool deadlocked() const;
  /// ℛ_CH at the moment a deadlock was declared.
  std::optional<ChannelSetCollection> deadlock_snapshot() const;

 private:
  friend class Endpoint;
  friend Endpoint send(Endpoint, Role, Role, DynValue);
  friend std::pair<DynValue, Endpoint> recv(Endpoint, Role, Role);
  friend Endpoint skip(Endpoint);
  friend void close(Endpoint);
  friend Endpoint choose(Endpoint, CTag);
  friend std::pair<CTag, Endpoint> choose_tag(Endpoint);
  friend Endpoint chan_append(Endpoint, const std::function<Endpoint(Endpoint)>&);
  friend void splice_link(Endpoint, Endpoint);
  friend HeadAction next_action(const Endpoint&);

  struct Agent {
    std::thread thread;
    enum class State { Running, Blocked, Done } state = State::Running;
    std::function<bool()> ready;
    std::string waiting_on;
    std::exception_ptr error;
  };

  using Lock = std::unique_lock<std::mutex>;

  AgentId self_locked() const;
  std::shared_ptr<EndpointState> take_locked(const Endpoint& ep, const char* op);
  Endpoint reissue_locked(const std::shared_ptr<EndpointState>& st);
  std::pair<std::shared_ptr<EndpointState>, std::shared_ptr<EndpointState>> make_channel_locked(
      const Group& g, const SessionType& s, AgentId child, AgentId parent);
  void finish_close_locked(const std::shared_ptr<EndpointState>& st);
  AgentId new_agent_locked();
  void start_agent_locked(AgentId id, std::function<void()> fn);
  void block(Lock& lk, std::function<bool()> ready, std::string what);
  void check_deadlock_locked();
  void declare_deadlock_locked(const std::string& why);
  void record_locked(std::string rule, std::vector<AgentId> tids, std::optional<std::uint64_t> chan,
                     std::optional<nlohmann::json> payload = std::nullopt,
                     std::optional<int> from = std::nullopt, std::optional<int> to = std::nullopt);
  ChannelSetCollection snapshot_locked() const;
  void write_locked(Lock& lk, const std::shared_ptr<Conduit>& c, DynValue v);
  DynValue read_locked(Lock& lk, const std::shared_ptr<Conduit>& c);
  void adopt_locked(DynValue& v, AgentId holder);
  void detach_payload_locked(DynValue& v, const std::shared_ptr<EndpointState>& sender);
  bool sort_matches_locked(const DynValue& v, const PayloadSort& s) const;
  void watchdog_loop();

  RuntimeOptions opts_;
  int watchdog_ms_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<AgentId, Agent> agents_;
  std::map<const EndpointState*, std::shared_ptr<EndpointState>> registry_;
  std::vector<TraceRecord> events_;
  std::uint64_t next_chan_ = 1;
  std::uint64_t next_conduit_ = 1;
  AgentId next_agent_ = 1;
  std::uint64_t progress_ = 0;
  bool deadlock_ = false;
  bool shutdown_ = false;
  std::string deadlock_reason_;
  std::optional<ChannelSetCollection> deadlock_snapshot_;
  std::thread watchdog_;
};

Endpoint send(Endpoint ep, Role from, Role to, DynValue v);
std::pair<DynValue, Endpoint> recv(Endpoint ep, Role from, Role to);
/// Internal or external message: a local cursor advance.
Endpoint skip(Endpoint ep);
void close(Endpoint ep);
/// Broadcasts the tag to every role outside the group, ascending.
Endpoint choose(Endpoint ep, CTag tag);
inline Endpoint choose_l(Endpoint ep) { return choose(std::move(ep), CTag::Left); }
inline Endpoint choose_r(Endpoint ep) { return choose(std::move(ep), CTag::Right); }
/// Drains one tag copy per role of the group, ascending, and checks they agree.
std::pair<CTag, Endpoint> choose_tag(Endpoint ep);
/// Cursor append(S0,S1): runs segment on the S0 part and requires the same
/// endpoint back with S0 finished.
Endpoint chan_append(Endpoint ep, const std::function<Endpoint(Endpoint)>& segment);

/// The head action licensed for this endpoint right now.
HeadAction next_action(const Endpoint& ep);

/// Forwards between chan(G,S) and chan(Ḡ,S) in the calling agent until both
/// close.
void chan2_link(Endpoint ep0, Endpoint ep1);
/// Forwards between chan(G0,S), chan(G1,S) and chan(Ḡ0 ∪ Ḡ1,S).
void chan3_link(Endpoint ep0, Endpoint ep1, Endpoint ep2);
/// chan_create(x ↦ chan3_link(ep0, ep1, x)): returns chan(G0 ∩ G1, S).
Endpoint chan2_link_create(Endpoint ep0, Endpoint ep1);
/// chan2_link without a forwarder: the two peers are joined by swapping
/// conduits between the matrices. Returns immediately.
void splice_link(Endpoint ep0, Endpoint ep1);

/// A persistent generator of chan(G,S) sessions.
class Service {
 public:
  Service(std::function<void(Endpoint)> setup, Group g, SessionType s);
  const Group& group() const noexcept { return group_; }
  const SessionType& proto() const noexcept { return proto_; }
  /// A fresh session; the chan(G,S) side runs setup in a new agent.
  Endpoint request(Runtime& rt) const;

 private:
  std::function<void(Endpoint)> setup_;
  Group group_;
  SessionType proto_;
};

inline Service service_create(std::function<void(Endpoint)> setup, Group g, SessionType s) {
  return Service(std::move(setup), std::move(g), std::move(s));
}
inline Endpoint service_request(Runtime& rt, const Service& svc) { return svc.request(rt); }

}  // namespace mrsession::rt

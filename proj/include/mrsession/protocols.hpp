#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrsession/runtime/runtime.hpp"

namespace mrsession::proto {

struct Message {
  Role from;
  Role to;
  std::string payload;  // JSON text

  friend bool operator==(const Message&, const Message&) = default;
};

struct RunOptions {
  /// Stall window for the deadlock watchdog; negative means the environment default.
  int watchdog_ms = -1;
  bool record_snapshots = true;
  /// Nonzero: the deadlock demos pause their parties for short seeded
  /// intervals to vary the interleaving.
  std::uint64_t schedule_seed = 0;
};

// ---------------------------------------------------------------------------
// two buyers: S0 = 0, B1 = 1, B2 = 2

/// msg(1,0,str):msg(0,1,int):msg(0,2,int):msg(1,2,int):
///   choose(2, msg(2,0,str):msg(0,2,str):nil, nil)
SessionType two_buyer_session();

struct TwoBuyerOutcome {
  enum class Branch { Success, Failure } branch = Branch::Failure;
  std::optional<std::string> receipt;
  /// Every message in session order, as relayed by the linking agent.
  std::vector<Message> messages;
  std::size_t live_endpoints_after = 0;
  std::vector<TraceRecord> events;
};

/// S0 and B1 run as services; B2 requests both and joins them with
/// chan2_link_create. B2 pays iff price − contribution ≤ b2_budget.
TwoBuyerOutcome run_two_buyer(const std::string& title, std::int64_t price, std::int64_t contribution,
                              std::int64_t b2_budget, RunOptions opts = {});

// ---------------------------------------------------------------------------
// queue: S0 = 0, C1 = 1, C2 = 2

struct QueueOp {
  enum class Kind { Nil, Enq, Deq } kind = Kind::Nil;
  int client = 1;  // 1 or 2
  std::int64_t value = 0;  // Enq only

  friend bool operator==(const QueueOp&, const QueueOp&) = default;
};

using QueueScript = std::vector<QueueOp>;

/// Lines like `1 enq 5`, `2 deq`, `1 nil`; `#` starts a comment.
QueueScript parse_queue_script(const std::string& text);
std::string format_queue_script(const QueueScript& script);

/// Throws ScriptViolation unless every deq meets a non-empty queue, nil
/// appears exactly once, last, on an empty queue.
void validate_queue_script(const QueueScript& script);

/// The queue protocol unrolled for at most `rounds` rounds: the server picks the client
/// (choose 0), the client picks nil | enq | deq as a three-way labeled choice.
SessionType queue_session(std::size_t rounds);

struct QueueOutcome {
  /// Queue size after every round as tracked by S0, C1 and C2.
  std::vector<std::size_t> sizes_s0, sizes_c1, sizes_c2;
  /// Values handed out by the server, in order.
  std::vector<std::int64_t> dequeued;
  std::size_t live_endpoints_after = 0;
  std::vector<TraceRecord> events;
};

QueueOutcome run_queue_session(const QueueScript& script, RunOptions opts = {});

// ---------------------------------------------------------------------------
// list and colist over repeat

/// repeat(0, msg(0,1,int):nil) and repeat(1, msg(0,1,int):nil).
SessionType list_session();
SessionType colist_session();

struct ListOutcome {
  std::vector<std::int64_t> values;
  std::size_t live_endpoints_after = 0;
  std::vector<TraceRecord> events;
};

/// The server (role 0) emits n values and then stops.
ListOutcome run_list_session(std::size_t n, RunOptions opts = {});
/// The client (role 1) asks for n values and then stops.
ListOutcome run_colist_session(std::size_t n, RunOptions opts = {});

// ---------------------------------------------------------------------------
// the chan2_create deadlock

struct DeadlockDiagnostic {
  bool deadlocked = false;
  std::string message;
  std::optional<ChannelSetCollection> snapshot;
  std::optional<bool> snapshot_df_reducible;
  std::vector<TraceRecord> events;
};

/// The parent sends its second channel over its first while the child waits
/// on the second. Needs `unsafe`; throws UnsafeDisabled otherwise.
DeadlockDiagnostic demo_chan2_create_deadlock(bool unsafe, RunOptions opts = {});

/// The same exchange built from two chan_create calls: completes.
DeadlockDiagnostic demo_chan2_create_control(RunOptions opts = {});

}  // namespace mrsession::proto

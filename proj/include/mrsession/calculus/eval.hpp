#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrsession/calculus/syntax.hpp"
#include "mrsession/trace.hpp"

namespace mrsession::calc {

/// PR3x2 is the unsafe chan2_create counterpart of PR3.
enum class Rule { PR0, PR1, PR2, PR3, PR3x2, PR4Send, PR4Recv, PR4Skip, PR4Close };

std::string_view rule_name(Rule r) noexcept;

/// One instance of a pool rule. For PR4 `tid` holds the positive half and
/// `peer` the negative one. `bit` picks the reduct of randbit().
struct ScheduleChoice {
  Rule rule = Rule::PR0;
  std::uint64_t tid = 0;
  std::uint64_t peer = 0;
  std::optional<bool> bit;

  friend bool operator==(const ScheduleChoice&, const ScheduleChoice&) = default;
};

/// send(ch,v), recv(ch), skip(ch) or close(ch) in evaluation position.
struct PartialRedex {
  PrimOp op;
  ChannelHalf half;
  std::optional<Expr> payload;
};

/// The partial redex a blocked expression waits on.
std::optional<PartialRedex> blocked(const Expr& e);

/// One pure or ad-hoc step E[r] → E[r′]. `bit` is the randbit() outcome.
/// Throws Stuck when e is a value, blocked, a pool-level redex, or wrong.
Expr step_expr(const Expr& e, bool bit = false);

bool is_final(const Pool& p);

std::vector<ScheduleChoice> enabled_choices(const Pool& p);

struct StepInfo {
  std::vector<std::uint64_t> tids;
  std::optional<std::uint64_t> chan_id;
  std::optional<Expr> payload;
};

/// Applies one enabled rule instance. Throws ChoiceNotEnabled otherwise.
Pool step_pool(const Pool& p, const ScheduleChoice& choice, StepInfo* info = nullptr);

enum class RunStatus { Final, MaxSteps, Deadlock };

std::string_view status_name(RunStatus s) noexcept;

struct RunResult {
  RunStatus status = RunStatus::Final;
  std::size_t steps = 0;
  Pool final_pool;
  std::vector<TraceRecord> trace;
  /// ℛ_CH of the stuck pool when status is Deadlock.
  std::optional<ChannelSetCollection> deadlock_snapshot;
};

/// Uniform random scheduling over enabled_choices with a seeded generator.
RunResult run_pool(const Pool& p, std::uint64_t seed, std::size_t max_steps);

TraceRecord make_record(std::uint64_t step, std::string rule, const StepInfo& info,
                        const Pool& after);

}  // namespace mrsession::calc

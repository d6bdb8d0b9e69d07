#pragma once

#include <cstdint>
#include <string>

#include "mrsession/calculus/syntax.hpp"

namespace mrsession::calc {

/// Counts of broken properties along one random schedule.
struct MetatheoryReport {
  std::size_t steps = 0;
  bool reached_final = false;
  int subject_reduction = 0;  // a reduct lost its type
  int progress = 0;           // stuck before final
  int df = 0;                 // a snapshot was not DF-reducible
  std::string first_failure;

  bool clean() const noexcept { return subject_reduction == 0 && progress == 0 && df == 0; }
};

/// Walks one seeded schedule, retyping the pool after every step.
MetatheoryReport explore_schedule(const Pool& start, std::uint64_t seed, std::size_t max_steps,
                                  bool allow_unsafe = false);

}  // namespace mrsession::calc

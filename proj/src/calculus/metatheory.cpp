#include "mrsession/calculus/metatheory.hpp"

#include <random>

#include "mrsession/calculus/eval.hpp"
#include "mrsession/calculus/typecheck.hpp"
#include "mrsession/df_analysis.hpp"

namespace mrsession::calc {

MetatheoryReport explore_schedule(const Pool& start, std::uint64_t seed, std::size_t max_steps,
                                  bool allow_unsafe) {
  MetatheoryReport r;
  auto note = [&](std::string what) {
    if (r.first_failure.empty()) r.first_failure = "step " + std::to_string(r.steps) + ": " + std::move(what);
  };
  std::mt19937_64 rng(seed);
  Viewtype want = typecheck_pool(start, allow_unsafe);
  Pool p = start;
  for (;;) {
    if (!is_df_reducible(p.snapshot())) {
      ++r.df;
      note("snapshot " + format_collection(p.snapshot()) + " is not DF-reducible");
    }
    auto choices = enabled_choices(p);
    if (choices.empty()) {
      r.reached_final = is_final(p);
      if (!r.reached_final) {
        ++r.progress;
        note("stuck");
      }
      return r;
    }
    if (r.steps == max_steps) return r;
    p = step_pool(p, choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)]);
    ++r.steps;
    try {
      if (!subtype(typecheck_pool(p, allow_unsafe), want)) {
        ++r.subject_reduction;
        note("reduct type is not a subtype of the original");
      }
    } catch (const Error& e) {
      ++r.subject_reduction;
      note(std::string("reduct rejected: ") + e.what());
    }
  }
}

}  // namespace mrsession::calc

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrsession/error.hpp"

namespace mrsession {

/// ch⁺ₙ / ch⁻ₙ. The two halves of one channel share the id.
struct ChannelHalf {
  std::uint64_t id = 0;
  bool positive = true;

  ChannelHalf dual() const noexcept { return {id, !positive}; }

  friend bool operator==(const ChannelHalf&, const ChannelHalf&) = default;
  friend auto operator<=>(const ChannelHalf&, const ChannelHalf&) = default;
};

/// `3+` / `3-`
std::string format_half(ChannelHalf h);
ChannelHalf parse_half(std::string_view text);

/// One thread's (or agent's) channel holdings. Kept sorted; duplicates are
/// preserved so that irregular inputs stay observable.
using ChannelSet = std::vector<ChannelHalf>;

/// The collection ℳ: a multiset of channel sets.
struct ChannelSetCollection {
  std::vector<ChannelSet> sets;

  ChannelSetCollection() = default;
  explicit ChannelSetCollection(std::vector<ChannelSet> s);

  friend bool operator==(const ChannelSetCollection&, const ChannelSetCollection&) = default;
};

/// `[{1+,2-},{2+,1-}]`
std::string format_collection(const ChannelSetCollection& m);
ChannelSetCollection parse_collection(std::string_view text);

bool is_regular(const ChannelSetCollection& m);

/// Positive halves whose dual sits in a different set.
std::vector<ChannelHalf> enabled_reductions(const ChannelSetCollection& m);
bool is_df_normal(const ChannelSetCollection& m);

/// ℳ ⇝ ℳ′ via `via` (which must be positive). The merged set is appended
/// after the untouched sets.
ChannelSetCollection df_reduce(const ChannelSetCollection& m, ChannelHalf via);

/// Throws IrregularInput for irregular or empty collections.
bool is_df_reducible(const ChannelSetCollection& m);

/// Memo key: an encoding of the holder graph, minimized over orderings of
/// same-shaped sets. Invariant under channel renaming and set reordering
/// (except for very symmetric inputs), and equal keys always imply equal
/// DF-reducibility. Empty sets are dropped.
std::string canonical_key(const ChannelSetCollection& m);

struct PreservationReport {
  std::size_t checked = 0;
  std::optional<std::size_t> first_violation;  // index into the snapshot list
  std::string reason;

  bool clean() const noexcept { return !first_violation.has_value(); }
};

/// Every snapshot must be regular and DF-reducible.
PreservationReport check_trace_preservation(const std::vector<ChannelSetCollection>& snapshots);

}  // namespace mrsession

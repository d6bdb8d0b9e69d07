#pragma once

#include <array>

#include "mrsession/session_type.hpp"

namespace mrsession {

/// What a forwarder does on one of its endpoints for a msg(i,j) head.
enum class LinkOp { Recv, Send, Skip };

std::string_view to_string(LinkOp op) noexcept;

/// Per-endpoint operations for one msg(i,j) step of a link. `source` is the
/// endpoint the value is received on and `target` the one it is re-sent on;
/// both are -1 when every endpoint skips.
template <std::size_t N>
struct LinkStep {
  std::array<LinkOp, N> ops;
  int source = -1;
  int target = -1;
};

/// chan2_link between groups G and Ḡ.
LinkStep<2> chan2_dispatch(const Group& g, Role from, Role to);

/// chan3_link over G0, G1 and G2 = Ḡ0 ∪ Ḡ1. Throws ComplementsNotDisjoint.
LinkStep<3> chan3_dispatch(const Group& g0, const Group& g1, Role from, Role to);

/// The third group of a chan3_link configuration.
Group chan3_outer_group(const Group& g0, const Group& g1);

}  // namespace mrsession

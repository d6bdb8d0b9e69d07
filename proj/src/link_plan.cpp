#include "mrsession/link_plan.hpp"

namespace mrsession {

std::string_view to_string(LinkOp op) noexcept {
  switch (op) {
    case LinkOp::Recv: return "recv";
    case LinkOp::Send: return "send";
    case LinkOp::Skip: return "skip";
  }
  return "?";
}

namespace {

LinkOp op_for(const Group& g, Role from, Role to) {
  switch (classify(g, from, to)) {
    case MsgAction::SendTo: return LinkOp::Send;
    case MsgAction::RecvFrom: return LinkOp::Recv;
    default: return LinkOp::Skip;
  }
}

template <std::size_t N>
LinkStep<N> plan(const std::array<Group, N>& groups, Role from, Role to) {
  LinkStep<N> step;
  for (std::size_t k = 0; k < N; ++k) {
    step.ops[k] = op_for(groups[k], from, to);
    if (step.ops[k] == LinkOp::Recv) step.source = static_cast<int>(k);
    if (step.ops[k] == LinkOp::Send) step.target = static_cast<int>(k);
  }
  return step;
}

}  // namespace

LinkStep<2> chan2_dispatch(const Group& g, Role from, Role to) {
  return plan<2>({g, g.complement()}, from, to);
}

Group chan3_outer_group(const Group& g0, const Group& g1) {
  if (!complements_disjoint(g0, g1)) {
    throw Error(Errc::ComplementsNotDisjoint,
                "complements of " + g0.to_string() + " and " + g1.to_string() + " overlap");
  }
  return g0.complement().unite(g1.complement());
}

LinkStep<3> chan3_dispatch(const Group& g0, const Group& g1, Role from, Role to) {
  return plan<3>({g0, g1, chan3_outer_group(g0, g1)}, from, to);
}

}  // namespace mrsession

#include <array>

#include "mrsession/link_plan.hpp"
#include "mrsession/runtime/runtime.hpp"

namespace mrsession::rt {

namespace {

std::pair<Role, Role> msg_roles(const HeadAction& h) {
  if (const auto* s = std::get_if<head::Send>(&h)) return {s->from, s->to};
  if (const auto* r = std::get_if<head::Recv>(&h)) return {r->from, r->to};
  const auto& k = std::get<head::Skip>(h);
  return {k.from, k.to};
}

template <std::size_t N>
void forward(std::array<Endpoint, N>& e, const LinkStep<N>& step, Role from, Role to) {
  if (step.source >= 0) {
    auto [v, src] = recv(std::move(e[step.source]), from, to);
    e[step.source] = std::move(src);
    e[step.target] = send(std::move(e[step.target]), from, to, std::move(v));
  }
  for (std::size_t k = 0; k < N; ++k) {
    if (step.ops[k] == LinkOp::Skip) e[k] = skip(std::move(e[k]));
  }
}

// Runs a forwarder until the session closes. Choices are received on the one
// endpoint whose complement holds the decider and replayed on the others.
template <std::size_t N, typename Plan>
void run_link(std::array<Endpoint, N> e, Plan plan) {
  for (;;) {
    HeadAction h0 = next_action(e[0]);
    if (std::holds_alternative<head::Close>(h0)) {
      for (auto& x : e) close(std::move(x));
      return;
    }
    bool choice = std::holds_alternative<head::ChooseSend>(h0) || std::holds_alternative<head::ChooseRecv>(h0);
    if (choice) {
      std::size_t src = N;
      for (std::size_t k = 0; k < N; ++k) {
        if (std::holds_alternative<head::ChooseRecv>(next_action(e[k]))) src = k;
      }
      if (src == N) throw Error(Errc::SessionMismatch, "no link endpoint receives the choice");
      auto [tag, ne] = choose_tag(std::move(e[src]));
      e[src] = std::move(ne);
      for (std::size_t k = 0; k < N; ++k) {
        if (k != src) e[k] = choose(std::move(e[k]), tag);
      }
      continue;
    }
    auto [from, to] = msg_roles(h0);
    forward(e, plan(from, to), from, to);
  }
}

void require_equivalent(const SessionType& a, const SessionType& b) {
  if (!equivalent(a, b)) throw Error(Errc::SessionMismatch, format_session(a) + " vs " + format_session(b));
}

}  // namespace

void chan2_link(Endpoint ep0, Endpoint ep1) {
  Group g0 = ep0.group();
  if (ep1.group() != g0.complement()) {
    throw Error(Errc::SessionMismatch,
                "groups " + g0.to_string() + " and " + ep1.group().to_string() + " are not complementary");
  }
  require_equivalent(ep0.cursor(), ep1.cursor());
  run_link<2>({std::move(ep0), std::move(ep1)},
              [g0](Role from, Role to) { return chan2_dispatch(g0, from, to); });
}

void chan3_link(Endpoint ep0, Endpoint ep1, Endpoint ep2) {
  Group g0 = ep0.group();
  Group g1 = ep1.group();
  Group outer = chan3_outer_group(g0, g1);
  if (ep2.group() != outer) {
    throw Error(Errc::SessionMismatch, "third group " + ep2.group().to_string() + " should be " + outer.to_string());
  }
  SessionType s = ep0.cursor();
  require_equivalent(s, ep1.cursor());
  require_equivalent(s, ep2.cursor());
  run_link<3>({std::move(ep0), std::move(ep1), std::move(ep2)},
              [g0, g1](Role from, Role to) { return chan3_dispatch(g0, g1, from, to); });
}

Endpoint chan2_link_create(Endpoint ep0, Endpoint ep1) {
  Group outer = chan3_outer_group(ep0.group(), ep1.group());
  SessionType s = ep0.cursor();
  require_equivalent(s, ep1.cursor());
  Runtime& rt = ep0.runtime();
  return rt.chan_create_with(outer, s, {std::move(ep0), std::move(ep1)},
                             [](Endpoint x, std::vector<Endpoint> moved) {
                               chan3_link(std::move(moved[0]), std::move(moved[1]), std::move(x));
                             });
}

}  // namespace mrsession::rt

#include "mrsession/calculus/encodings.hpp"

#include <deque>

#include "mrsession/calculus/sexpr.hpp"
#include "mrsession/link_plan.hpp"

namespace mrsession::calc {

namespace {

thread_local int counter = 0;

std::string fresh(const char* stem) { return stem + std::to_string(counter++); }

Viewtype chan_ty(const Group& g, const SessionType& s) { return Viewtype::chan(g.members(), s); }

Expr seq(Expr first, Expr rest) { return Expr::let(fresh("u"), Viewtype::unit(), first, rest); }

// Follows s on x: sends come from `outgoing` in order, the last received
// payload is returned after close when `keep_last` is set.
Expr party(const std::string& x, const Group& g, const SessionType& s, std::deque<Expr> outgoing,
           bool keep_last, std::optional<std::string> last = std::nullopt) {
  HeadAction h = head_action(g, s);
  Expr var = Expr::var(x);
  if (std::holds_alternative<head::Close>(h)) {
    Expr close = Expr::prim(PrimOp::Close, {var});
    return keep_last && last ? seq(close, Expr::var(*last)) : close;
  }
  if (auto* k = std::get_if<head::Skip>(&h)) {
    std::string y = fresh("c");
    return Expr::let(y, chan_ty(g, k->cont), Expr::prim(PrimOp::Skip, {var}),
                     party(y, g, k->cont, std::move(outgoing), keep_last, last));
  }
  if (auto* k = std::get_if<head::Send>(&h)) {
    std::string y = fresh("c");
    Expr v = outgoing.front();
    outgoing.pop_front();
    return Expr::let(y, chan_ty(g, k->cont), Expr::prim(PrimOp::Send, {var, v}),
                     party(y, g, k->cont, std::move(outgoing), keep_last, last));
  }
  if (auto* k = std::get_if<head::Recv>(&h)) {
    std::string y = fresh("c"), v = fresh("v");
    return Expr::let_pair(y, v, Expr::prim(PrimOp::Recv, {var}),
                          party(y, g, k->cont, std::move(outgoing), keep_last, v));
  }
  throw Error(Errc::PreconditionViolated, "choice heads are not supported");
}

constexpr const char* kDeadlock = R"(
(pool (nrole 2)
  (thread 0
    (letp (c1 c2)
      (chan2_create
        (lam (p (tensor (chan {1} "msg(0,1,chan({0},msg(0,1,int):nil)):nil")
                        (chan {1} "msg(0,1,int):nil")))
          (letp (a b) p
            (letp (b2 n) (recv b)
              (letp (a2 d) (recv a)
                (let (u unit) (close b2)
                  (let (w unit) (close a2) (close (send d n)))))))))
      (close (send c1 c2)))))
)";

constexpr const char* kControl = R"(
(pool (nrole 2)
  (thread 0
    (let (c2 (chan {0} "msg(0,1,int):nil"))
      (chan_create (lam (b (chan {1} "msg(0,1,int):nil")) (letp (b2 n) (recv b) (close b2))))
      (let (c1 (chan {0} "msg(0,1,chan({0},msg(0,1,int):nil)):nil"))
        (chan_create
          (lam (a (chan {1} "msg(0,1,chan({0},msg(0,1,int):nil)):nil"))
            (letp (a2 d) (recv a) (let (u unit) (close a2) (close (send d 7))))))
        (close (send c1 c2))))))
)";

}  // namespace

SessionType two_buyer_success_session() {
  return parse_session(
      "msg(1,0,str):msg(0,1,int):msg(0,2,int):msg(1,2,int):msg(2,0,str):msg(0,2,str):nil");
}

Expr chan3_link_unrolled(const std::string& e0, const std::string& e1, const std::string& e2,
                         const Group& g0, const Group& g1, const SessionType& s) {
  Group g2 = chan3_outer_group(g0, g1);
  std::array<std::string, 3> vars{e0, e1, e2};
  std::array<Group, 3> groups{g0, g1, g2};
  SessionType cur = normalize_head(s);
  if (cur.is_nil()) {
    return seq(Expr::prim(PrimOp::Close, {Expr::var(e0)}),
               seq(Expr::prim(PrimOp::Close, {Expr::var(e1)}), Expr::prim(PrimOp::Close, {Expr::var(e2)})));
  }
  const auto* m = std::get_if<st::Msg>(&cur.node().v);
  if (!m) throw Error(Errc::PreconditionViolated, "chan3_link_unrolled needs a choice-free session");
  LinkStep<3> step = chan3_dispatch(g0, g1, m->from, m->to);
  std::array<std::string, 3> next{fresh("l"), fresh("l"), fresh("l")};
  Expr body = chan3_link_unrolled(next[0], next[1], next[2], g0, g1, m->rest);
  // Built inside out: skips innermost, then the send, then the recv.
  for (int k = 2; k >= 0; --k) {
    if (step.ops[static_cast<std::size_t>(k)] != LinkOp::Skip) continue;
    body = Expr::let(next[static_cast<std::size_t>(k)], chan_ty(groups[static_cast<std::size_t>(k)], m->rest),
                     Expr::prim(PrimOp::Skip, {Expr::var(vars[static_cast<std::size_t>(k)])}), body);
  }
  if (step.source >= 0) {
    auto src = static_cast<std::size_t>(step.source), dst = static_cast<std::size_t>(step.target);
    std::string v = fresh("v");
    body = Expr::let(next[dst], chan_ty(groups[dst], m->rest),
                     Expr::prim(PrimOp::Send, {Expr::var(vars[dst]), Expr::var(v)}), body);
    body = Expr::let_pair(next[src], v, Expr::prim(PrimOp::Recv, {Expr::var(vars[src])}), body);
  }
  return body;
}

Pool two_buyer_pool(const std::string& title, std::int64_t price, std::int64_t contribution) {
  RoleUniverse u(3);
  SessionType s = two_buyer_success_session();
  Group s0(u, {0}), b1(u, {1}), b2(u, {2});
  Group g0 = s0.complement(), g1 = b1.complement();

  Expr seller = party("y", s0, s, {Expr::integer(price), Expr::integer(price), Expr::str("receipt:" + title)}, false);
  Expr buyer1 = party("y", b1, s, {Expr::str(title), Expr::integer(contribution)}, false);
  Expr buyer2 = party("c2", b2, s, {Expr::str("proof-of-payment")}, true);
  Expr link = chan3_link_unrolled("c0", "c1", "y", g0, g1, s);

  Expr main = Expr::let(
      "c0", chan_ty(g0, s), Expr::prim(PrimOp::ChanCreate, {Expr::lam("y", chan_ty(s0, s), std::nullopt, seller)}),
      Expr::let("c1", chan_ty(g1, s),
                Expr::prim(PrimOp::ChanCreate, {Expr::lam("y", chan_ty(b1, s), std::nullopt, buyer1)}),
                Expr::let("c2", chan_ty(b2, s),
                          Expr::prim(PrimOp::ChanCreate,
                                     {Expr::lam("y", chan_ty(chan3_outer_group(g0, g1), s), std::nullopt, link)}),
                          buyer2)));
  Pool p;
  p.universe = u;
  p.threads.emplace(0, main);
  return p;
}

Pool chan2_deadlock_pool() { return parse_pool(kDeadlock); }

Pool chan2_control_pool() { return parse_pool(kControl); }

std::vector<std::pair<std::string, Pool>> builtin_pools() {
  return {
      {"two-buyer", two_buyer_pool("tapl", 100, 60)},
      {"chan2-control", chan2_control_pool()},
  };
}

}  // namespace mrsession::calc

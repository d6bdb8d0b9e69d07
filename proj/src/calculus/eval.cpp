#include "mrsession/calculus/eval.hpp"

#include <functional>
#include <random>

#include "mrsession/calculus/sexpr.hpp"
#include "overloaded.hpp"

namespace mrsession::calc {

std::string_view rule_name(Rule r) noexcept {
  switch (r) {
    case Rule::PR0: return "PR0";
    case Rule::PR1: return "PR1";
    case Rule::PR2: return "PR2";
    case Rule::PR3: return "PR3";
    case Rule::PR3x2: return "PR3x2";
    case Rule::PR4Send: return "PR4-send";
    case Rule::PR4Recv: return "PR4-recv";
    case Rule::PR4Skip: return "PR4-skip";
    case Rule::PR4Close: return "PR4-close";
  }
  return "?";
}

std::string_view status_name(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Final: return "final";
    case RunStatus::MaxSteps: return "max-steps";
    case RunStatus::Deadlock: return "deadlock";
  }
  return "?";
}

namespace {

using Plug = std::function<Expr(const Expr&)>;

struct Focus {
  Expr redex;
  Plug plug;
};

Plug compose(Plug outer, Plug inner) {
  return [outer = std::move(outer), inner = std::move(inner)](const Expr& r) {
    return outer(inner(r));
  };
}

// The unique decomposition e = E[r] with r in redex position, following the
// left-to-right call-by-value evaluation contexts. Absent for values.
std::optional<Focus> focus(const Expr& e) {
  if (is_value(e)) return std::nullopt;
  auto into = [](const Expr& sub, Plug wrap) -> std::optional<Focus> {
    auto f = focus(sub);
    return Focus{f->redex, compose(std::move(wrap), f->plug)};
  };
  auto here = [&]() -> std::optional<Focus> { return Focus{e, [](const Expr& r) { return r; }}; };
  return std::visit(
      overloaded{
          [&](const ex::Pair& p) -> std::optional<Focus> {
            if (!is_value(p.a)) {
              return into(p.a, [b = p.b](const Expr& x) { return Expr::pair(x, b); });
            }
            return into(p.b, [a = p.a](const Expr& x) { return Expr::pair(a, x); });
          },
          [&](const ex::Fst& p) -> std::optional<Focus> {
            if (!is_value(p.e)) return into(p.e, [](const Expr& x) { return Expr::fst(x); });
            return here();
          },
          [&](const ex::Snd& p) -> std::optional<Focus> {
            if (!is_value(p.e)) return into(p.e, [](const Expr& x) { return Expr::snd(x); });
            return here();
          },
          [&](const ex::LetPair& p) -> std::optional<Focus> {
            if (!is_value(p.bound)) {
              return into(p.bound, [p](const Expr& x) {
                return Expr::let_pair(p.x1, p.x2, x, p.body);
              });
            }
            return here();
          },
          [&](const ex::App& p) -> std::optional<Focus> {
            if (!is_value(p.f)) {
              return into(p.f, [a = p.a](const Expr& x) { return Expr::app(x, a); });
            }
            if (!is_value(p.a)) {
              return into(p.a, [f = p.f](const Expr& x) { return Expr::app(f, x); });
            }
            return here();
          },
          [&](const ex::If& p) -> std::optional<Focus> {
            if (!is_value(p.c)) {
              return into(p.c, [p](const Expr& x) { return Expr::if_(x, p.t, p.e); });
            }
            return here();
          },
          [&](const ex::Prim& p) -> std::optional<Focus> {
            for (std::size_t i = 0; i < p.args.size(); ++i) {
              if (is_value(p.args[i])) continue;
              return into(p.args[i], [p, i](const Expr& x) {
                std::vector<Expr> args = p.args;
                args[i] = x;
                return Expr::prim(p.op, std::move(args));
              });
            }
            return here();
          },
          [&](const auto&) { return here(); },
      },
      e.node().v);
}

enum class RedexKind { Pure, RandBit, ThreadCreate, ChanCreate, Chan2Create, Partial, Stuck };

RedexKind classify_redex(const Expr& r) {
  return std::visit(
      overloaded{
          [](const ex::If& p) {
            return std::holds_alternative<ex::Bool>(p.c.node().v) ? RedexKind::Pure
                                                                  : RedexKind::Stuck;
          },
          [](const ex::LetPair& p) {
            return std::holds_alternative<ex::Pair>(p.bound.node().v) ? RedexKind::Pure
                                                                      : RedexKind::Stuck;
          },
          [](const ex::Fst& p) {
            return std::holds_alternative<ex::Pair>(p.e.node().v) ? RedexKind::Pure
                                                                  : RedexKind::Stuck;
          },
          [](const ex::Snd& p) {
            return std::holds_alternative<ex::Pair>(p.e.node().v) ? RedexKind::Pure
                                                                  : RedexKind::Stuck;
          },
          [](const ex::App& p) {
            return std::holds_alternative<ex::Lam>(p.f.node().v) ? RedexKind::Pure
                                                                 : RedexKind::Stuck;
          },
          [](const ex::Fix&) { return RedexKind::Pure; },
          [](const ex::Prim& p) {
            auto is_lam = [&] { return std::holds_alternative<ex::Lam>(p.args[0].node().v); };
            auto is_res = [&] { return std::holds_alternative<ex::Res>(p.args[0].node().v); };
            switch (p.op) {
              case PrimOp::IAdd:
                return std::holds_alternative<ex::Int>(p.args[0].node().v) &&
                               std::holds_alternative<ex::Int>(p.args[1].node().v)
                           ? RedexKind::Pure
                           : RedexKind::Stuck;
              case PrimOp::RandBit: return RedexKind::RandBit;
              case PrimOp::ThreadCreate: return is_lam() ? RedexKind::ThreadCreate : RedexKind::Stuck;
              case PrimOp::ChanCreate: return is_lam() ? RedexKind::ChanCreate : RedexKind::Stuck;
              case PrimOp::Chan2Create: return is_lam() ? RedexKind::Chan2Create : RedexKind::Stuck;
              default: return is_res() ? RedexKind::Partial : RedexKind::Stuck;
            }
          },
          [](const auto&) { return RedexKind::Stuck; },
      },
      r.node().v);
}

Expr contract(const Expr& r, bool bit) {
  return std::visit(
      overloaded{
          [&](const ex::If& p) { return std::get<ex::Bool>(p.c.node().v).value ? p.t : p.e; },
          [&](const ex::LetPair& p) {
            const auto& v = std::get<ex::Pair>(p.bound.node().v);
            // The values are closed, so sequential substitution is simultaneous.
            return substitute(substitute(p.body, p.x1, v.a), p.x2, v.b);
          },
          [&](const ex::Fst& p) { return std::get<ex::Pair>(p.e.node().v).a; },
          [&](const ex::Snd& p) { return std::get<ex::Pair>(p.e.node().v).b; },
          [&](const ex::App& p) {
            const auto& l = std::get<ex::Lam>(p.f.node().v);
            return substitute(l.body, l.x, p.a);
          },
          [&](const ex::Fix& p) { return substitute(p.body, p.f, r); },
          [&](const ex::Prim& p) {
            if (p.op == PrimOp::IAdd) {
              return Expr::integer(std::get<ex::Int>(p.args[0].node().v).value +
                                   std::get<ex::Int>(p.args[1].node().v).value);
            }
            return Expr::boolean(bit);
          },
          [&](const auto&) -> Expr { throw Error(Errc::Stuck, "not a redex: " + format_expr(r)); },
      },
      r.node().v);
}

struct ThreadView {
  std::optional<Focus> focus;
  RedexKind kind = RedexKind::Stuck;
};

ThreadView view(const Expr& e) {
  ThreadView v;
  v.focus = focus(e);
  if (v.focus) v.kind = classify_redex(v.focus->redex);
  return v;
}

[[noreturn]] void not_enabled(const ScheduleChoice& c, const std::string& why) {
  throw Error(Errc::ChoiceNotEnabled, std::string(rule_name(c.rule)) + " on thread " +
                                          std::to_string(c.tid) + ": " + why);
}

void advance_sigma(Pool& p, ChannelHalf h) {
  auto it = p.sigma.find(h);
  if (it == p.sigma.end()) return;
  auto* c = std::get_if<ty::Chan>(&it->second.node().v);
  if (!c) return;
  HeadAction a = head_action(Group(p.universe, c->group), c->proto);
  std::visit(overloaded{
                 [&](const head::Send& s) { it->second = Viewtype::chan(c->group, s.cont); },
                 [&](const head::Recv& s) { it->second = Viewtype::chan(c->group, s.cont); },
                 [&](const head::Skip& s) { it->second = Viewtype::chan(c->group, s.cont); },
                 [](const auto&) {},
             },
             a);
}

PrimOp dual_op(PrimOp op) {
  switch (op) {
    case PrimOp::Send: return PrimOp::Recv;
    case PrimOp::Recv: return PrimOp::Send;
    default: return op;
  }
}

Rule pr4_rule(PrimOp positive_op) {
  switch (positive_op) {
    case PrimOp::Send: return Rule::PR4Send;
    case PrimOp::Recv: return Rule::PR4Recv;
    case PrimOp::Skip: return Rule::PR4Skip;
    default: return Rule::PR4Close;
  }
}

}  // namespace

std::optional<PartialRedex> blocked(const Expr& e) {
  auto v = view(e);
  if (v.kind != RedexKind::Partial) return std::nullopt;
  const auto& p = std::get<ex::Prim>(v.focus->redex.node().v);
  PartialRedex out{p.op, std::get<ex::Res>(p.args[0].node().v).half, std::nullopt};
  if (p.op == PrimOp::Send) out.payload = p.args[1];
  return out;
}

Expr step_expr(const Expr& e, bool bit) {
  auto v = view(e);
  if (!v.focus) throw Error(Errc::Stuck, "value: " + format_expr(e));
  if (v.kind != RedexKind::Pure && v.kind != RedexKind::RandBit) {
    throw Error(Errc::Stuck, "no pure or ad-hoc redex in " + format_expr(e));
  }
  return v.focus->plug(contract(v.focus->redex, bit));
}

bool is_final(const Pool& p) {
  return p.threads.size() == 1 && p.threads.count(0) && is_value(p.threads.at(0));
}

std::vector<ScheduleChoice> enabled_choices(const Pool& p) {
  std::vector<ScheduleChoice> out;
  std::map<std::uint64_t, std::pair<std::uint64_t, PrimOp>> pos, neg;  // chan id -> (tid, op)
  for (const auto& [tid, e] : p.threads) {
    auto v = view(e);
    if (!v.focus) {
      if (tid > 0 && std::holds_alternative<ex::Unit>(e.node().v)) {
        out.push_back({Rule::PR2, tid, 0, std::nullopt});
      }
      continue;
    }
    switch (v.kind) {
      case RedexKind::Pure: out.push_back({Rule::PR0, tid, 0, std::nullopt}); break;
      case RedexKind::RandBit:
        out.push_back({Rule::PR0, tid, 0, false});
        out.push_back({Rule::PR0, tid, 0, true});
        break;
      case RedexKind::ThreadCreate: out.push_back({Rule::PR1, tid, 0, std::nullopt}); break;
      case RedexKind::ChanCreate: out.push_back({Rule::PR3, tid, 0, std::nullopt}); break;
      case RedexKind::Chan2Create: out.push_back({Rule::PR3x2, tid, 0, std::nullopt}); break;
      case RedexKind::Partial: {
        const auto& pr = std::get<ex::Prim>(v.focus->redex.node().v);
        ChannelHalf h = std::get<ex::Res>(pr.args[0].node().v).half;
        (h.positive ? pos : neg)[h.id] = {tid, pr.op};
        break;
      }
      case RedexKind::Stuck: break;
    }
  }
  for (const auto& [id, a] : pos) {
    auto it = neg.find(id);
    if (it == neg.end() || it->second.first == a.first) continue;
    if (it->second.second != dual_op(a.second)) continue;
    out.push_back({pr4_rule(a.second), a.first, it->second.first, std::nullopt});
  }
  return out;
}

Pool step_pool(const Pool& p, const ScheduleChoice& c, StepInfo* info) {
  StepInfo local;
  StepInfo& out = info ? *info : local;
  out = {};
  auto tit = p.threads.find(c.tid);
  if (tit == p.threads.end()) not_enabled(c, "no such thread");
  Pool next = p;
  auto v = view(tit->second);
  out.tids.push_back(c.tid);

  switch (c.rule) {
    case Rule::PR0: {
      if (v.kind == RedexKind::RandBit) {
        if (!c.bit) not_enabled(c, "randbit needs a chosen bit");
        out.payload = Expr::boolean(*c.bit);
      } else if (v.kind != RedexKind::Pure) {
        not_enabled(c, "no pure or ad-hoc redex");
      }
      next.threads.insert_or_assign(c.tid, v.focus->plug(contract(v.focus->redex, c.bit.value_or(false))));
      return next;
    }
    case Rule::PR1: {
      if (v.kind != RedexKind::ThreadCreate) not_enabled(c, "no thread_create redex");
      const Expr& f = std::get<ex::Prim>(v.focus->redex.node().v).args[0];
      std::uint64_t fresh = next.next_tid++;
      next.threads.insert_or_assign(c.tid, v.focus->plug(Expr::unit()));
      next.threads.insert_or_assign(fresh, Expr::app(f, Expr::unit()));
      out.tids.push_back(fresh);
      return next;
    }
    case Rule::PR2: {
      if (c.tid == 0 || !std::holds_alternative<ex::Unit>(tit->second.node().v)) {
        not_enabled(c, "thread is not a finished child");
      }
      next.threads.erase(c.tid);
      return next;
    }
    case Rule::PR3:
    case Rule::PR3x2: {
      bool two = c.rule == Rule::PR3x2;
      if (v.kind != (two ? RedexKind::Chan2Create : RedexKind::ChanCreate)) {
        not_enabled(c, "no channel creation redex");
      }
      const Expr& f = std::get<ex::Prim>(v.focus->redex.node().v).args[0];
      const auto& lam = std::get<ex::Lam>(f.node().v);
      std::vector<const ty::Chan*> params;
      if (two) {
        auto* t = std::get_if<ty::Tensor>(&lam.param.node().v);
        if (t) {
          params.push_back(std::get_if<ty::Chan>(&t->a.node().v));
          params.push_back(std::get_if<ty::Chan>(&t->b.node().v));
        }
      } else {
        params.push_back(std::get_if<ty::Chan>(&lam.param.node().v));
      }
      if (params.empty() || std::find(params.begin(), params.end(), nullptr) != params.end()) {
        not_enabled(c, "creator function is not annotated with channel parameters");
      }
      std::vector<Expr> plus, minus;
      for (const ty::Chan* ch : params) {
        std::uint64_t id = next.next_chan++;
        ChannelHalf hp{id, true}, hm{id, false};
        Group g(p.universe, ch->group);
        next.sigma.insert_or_assign(hp, Viewtype::chan(ch->group, ch->proto));
        next.sigma.insert_or_assign(hm, Viewtype::chan(g.complement().members(), ch->proto));
        plus.push_back(Expr::res(hp));
        minus.push_back(Expr::res(hm));
        if (!out.chan_id) out.chan_id = id;
      }
      std::uint64_t fresh = next.next_tid++;
      Expr given = two ? Expr::pair(plus[0], plus[1]) : plus[0];
      Expr kept = two ? Expr::pair(minus[0], minus[1]) : minus[0];
      next.threads.insert_or_assign(c.tid, v.focus->plug(kept));
      next.threads.insert_or_assign(fresh, Expr::app(f, given));
      out.tids.push_back(fresh);
      return next;
    }
    case Rule::PR4Send:
    case Rule::PR4Recv:
    case Rule::PR4Skip:
    case Rule::PR4Close: {
      auto pit = p.threads.find(c.peer);
      if (pit == p.threads.end() || c.peer == c.tid) not_enabled(c, "no such peer thread");
      auto w = view(pit->second);
      if (v.kind != RedexKind::Partial || w.kind != RedexKind::Partial) {
        not_enabled(c, "threads are not blocked");
      }
      const auto& a = std::get<ex::Prim>(v.focus->redex.node().v);
      const auto& b = std::get<ex::Prim>(w.focus->redex.node().v);
      ChannelHalf ha = std::get<ex::Res>(a.args[0].node().v).half;
      ChannelHalf hb = std::get<ex::Res>(b.args[0].node().v).half;
      if (!ha.positive || hb != ha.dual() || pr4_rule(a.op) != c.rule || b.op != dual_op(a.op)) {
        not_enabled(c, "partial redexes do not match");
      }
      out.tids.push_back(c.peer);
      out.chan_id = ha.id;
      Expr ra = Expr::res(ha), rb = Expr::res(hb);
      switch (c.rule) {
        case Rule::PR4Send:
          out.payload = a.args[1];
          rb = Expr::pair(rb, a.args[1]);
          break;
        case Rule::PR4Recv:
          out.payload = b.args[1];
          ra = Expr::pair(ra, b.args[1]);
          break;
        case Rule::PR4Close:
          ra = Expr::unit();
          rb = Expr::unit();
          break;
        default: break;
      }
      if (c.rule == Rule::PR4Close) {
        next.sigma.erase(ha);
        next.sigma.erase(hb);
      } else {
        advance_sigma(next, ha);
        advance_sigma(next, hb);
      }
      next.threads.insert_or_assign(c.tid, v.focus->plug(ra));
      next.threads.insert_or_assign(c.peer, w.focus->plug(rb));
      return next;
    }
  }
  not_enabled(c, "unknown rule");
}

TraceRecord make_record(std::uint64_t step, std::string rule, const StepInfo& info,
                        const Pool& after) {
  TraceRecord r;
  r.step = step;
  r.rule = std::move(rule);
  r.tids = info.tids;
  r.chan_id = info.chan_id;
  if (info.payload) r.payload = format_expr(*info.payload);
  r.rho_ch = after.snapshot();
  return r;
}

RunResult run_pool(const Pool& p, std::uint64_t seed, std::size_t max_steps) {
  RunResult res;
  res.final_pool = p;
  std::mt19937_64 rng(seed);
  res.trace.push_back(make_record(0, "init", {}, p));
  Pool& cur = res.final_pool;
  while (true) {
    if (is_final(cur)) {
      res.status = RunStatus::Final;
      return res;
    }
    auto choices = enabled_choices(cur);
    if (choices.empty()) {
      res.status = RunStatus::Deadlock;
      res.deadlock_snapshot = cur.snapshot();
      return res;
    }
    if (res.steps >= max_steps) {
      res.status = RunStatus::MaxSteps;
      return res;
    }
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    const ScheduleChoice& c = choices[pick(rng)];
    StepInfo info;
    cur = step_pool(cur, c, &info);
    ++res.steps;
    res.trace.push_back(make_record(res.steps, std::string(rule_name(c.rule)), info, cur));
  }
}

}  // namespace mrsession::calc

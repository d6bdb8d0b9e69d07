#include "mrsession/calculus/syntax.hpp"

#include <algorithm>
#include <set>

#include "overloaded.hpp"

namespace mrsession::calc {

namespace {

std::shared_ptr<const TypeNode> tnode(auto alt) {
  return std::make_shared<const TypeNode>(TypeNode{std::move(alt)});
}

std::shared_ptr<const ExprNode> enode(auto alt) {
  return std::make_shared<const ExprNode>(ExprNode{std::move(alt)});
}

}  // namespace

Viewtype::Viewtype() : node_(tnode(ty::Unit{})) {}
Viewtype Viewtype::boolean() { return Viewtype(tnode(ty::Bool{})); }
Viewtype Viewtype::integer() { return Viewtype(tnode(ty::Int{})); }
Viewtype Viewtype::int_exact(std::int64_t n) { return Viewtype(tnode(ty::IntExact{n})); }
Viewtype Viewtype::str() { return Viewtype(tnode(ty::Str{})); }
Viewtype Viewtype::unit() { return Viewtype(tnode(ty::Unit{})); }
Viewtype Viewtype::chan(RoleSet group, SessionType proto) {
  return Viewtype(tnode(ty::Chan{group, std::move(proto)}));
}
Viewtype Viewtype::prod(Viewtype a, Viewtype b) {
  return Viewtype(tnode(ty::Prod{std::move(a), std::move(b)}));
}
Viewtype Viewtype::tensor(Viewtype a, Viewtype b) {
  return Viewtype(tnode(ty::Tensor{std::move(a), std::move(b)}));
}
Viewtype Viewtype::arrow(ArrowKind k, Viewtype a, Viewtype b) {
  return Viewtype(tnode(ty::Arrow{k, std::move(a), std::move(b)}));
}

bool Viewtype::is_linear() const {
  return std::visit(overloaded{
                        [](const ty::Chan&) { return true; },
                        [](const ty::Tensor&) { return true; },
                        [](const ty::Arrow& a) { return a.kind == ArrowKind::Linear; },
                        [](const ty::Prod& p) { return p.a.is_linear() || p.b.is_linear(); },
                        [](const auto&) { return false; },
                    },
                    node_->v);
}

bool operator==(const Viewtype& a, const Viewtype& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node().v;
  const auto& y = b.node().v;
  if (x.index() != y.index()) return false;
  return std::visit(overloaded{
                        [&](const ty::IntExact& i) { return i.n == std::get<ty::IntExact>(y).n; },
                        [&](const ty::Chan& c) {
                          const auto& d = std::get<ty::Chan>(y);
                          return c.group == d.group && equivalent(c.proto, d.proto);
                        },
                        [&](const ty::Prod& p) {
                          const auto& q = std::get<ty::Prod>(y);
                          return p.a == q.a && p.b == q.b;
                        },
                        [&](const ty::Tensor& p) {
                          const auto& q = std::get<ty::Tensor>(y);
                          return p.a == q.a && p.b == q.b;
                        },
                        [&](const ty::Arrow& p) {
                          const auto& q = std::get<ty::Arrow>(y);
                          return p.kind == q.kind && p.param == q.param && p.result == q.result;
                        },
                        [](const auto&) { return true; },
                    },
                    x);
}

bool subtype(const Viewtype& sub, const Viewtype& super) {
  const auto& x = sub.node().v;
  const auto& y = super.node().v;
  if (std::holds_alternative<ty::IntExact>(x) && std::holds_alternative<ty::Int>(y)) return true;
  if (auto* p = std::get_if<ty::Prod>(&x)) {
    if (auto* q = std::get_if<ty::Tensor>(&y)) return subtype(p->a, q->a) && subtype(p->b, q->b);
  }
  if (x.index() != y.index()) return false;
  return std::visit(overloaded{
                        [&](const ty::Prod& p) {
                          const auto& q = std::get<ty::Prod>(y);
                          return subtype(p.a, q.a) && subtype(p.b, q.b);
                        },
                        [&](const ty::Tensor& p) {
                          const auto& q = std::get<ty::Tensor>(y);
                          return subtype(p.a, q.a) && subtype(p.b, q.b);
                        },
                        [&](const ty::Arrow& p) {
                          const auto& q = std::get<ty::Arrow>(y);
                          bool kind_ok = p.kind == q.kind || q.kind == ArrowKind::Linear;
                          return kind_ok && subtype(q.param, p.param) &&
                                 subtype(p.result, q.result);
                        },
                        [&](const auto&) { return sub == super; },
                    },
                    x);
}

std::optional<Viewtype> join(const Viewtype& a, const Viewtype& b) {
  if (subtype(a, b)) return b;
  if (subtype(b, a)) return a;
  auto is_int = [](const Viewtype& t) {
    return std::holds_alternative<ty::Int>(t.node().v) ||
           std::holds_alternative<ty::IntExact>(t.node().v);
  };
  if (is_int(a) && is_int(b)) return Viewtype::integer();
  const auto& x = a.node().v;
  const auto& y = b.node().v;
  auto pairwise = [&](const Viewtype& a1, const Viewtype& a2, const Viewtype& b1,
                      const Viewtype& b2, bool linear) -> std::optional<Viewtype> {
    auto l = join(a1, b1);
    auto r = join(a2, b2);
    if (!l || !r) return std::nullopt;
    return linear ? Viewtype::tensor(*l, *r) : Viewtype::prod(*l, *r);
  };
  if (auto* p = std::get_if<ty::Prod>(&x)) {
    if (auto* q = std::get_if<ty::Prod>(&y)) return pairwise(p->a, p->b, q->a, q->b, false);
    if (auto* q = std::get_if<ty::Tensor>(&y)) return pairwise(p->a, p->b, q->a, q->b, true);
  }
  if (auto* p = std::get_if<ty::Tensor>(&x)) {
    if (auto* q = std::get_if<ty::Tensor>(&y)) return pairwise(p->a, p->b, q->a, q->b, true);
    if (auto* q = std::get_if<ty::Prod>(&y)) return pairwise(p->a, p->b, q->a, q->b, true);
  }
  return std::nullopt;
}

Viewtype sort_viewtype(const PayloadSort& s) {
  return std::visit(overloaded{
                        [](const sort::Unit&) { return Viewtype::unit(); },
                        [](const sort::Int&) { return Viewtype::integer(); },
                        [](const sort::Bool&) { return Viewtype::boolean(); },
                        [](const sort::Str&) { return Viewtype::str(); },
                        [](const sort::Chan& c) { return Viewtype::chan(c.group, c.proto); },
                        [](const sort::Tuple& t) {
                          Viewtype acc = sort_viewtype(t.parts.back());
                          for (std::size_t k = t.parts.size() - 1; k-- > 0;) {
                            Viewtype head = sort_viewtype(t.parts[k]);
                            acc = (head.is_linear() || acc.is_linear())
                                      ? Viewtype::tensor(head, acc)
                                      : Viewtype::prod(head, acc);
                          }
                          return acc;
                        },
                    },
                    s.node().v);
}

std::string_view prim_name(PrimOp op) noexcept {
  switch (op) {
    case PrimOp::IAdd: return "iadd";
    case PrimOp::RandBit: return "randbit";
    case PrimOp::ThreadCreate: return "thread_create";
    case PrimOp::ChanCreate: return "chan_create";
    case PrimOp::Chan2Create: return "chan2_create";
    case PrimOp::Send: return "send";
    case PrimOp::Recv: return "recv";
    case PrimOp::Skip: return "skip";
    case PrimOp::Close: return "close";
  }
  return "?";
}

std::size_t prim_arity(PrimOp op) noexcept {
  switch (op) {
    case PrimOp::RandBit: return 0;
    case PrimOp::IAdd:
    case PrimOp::Send: return 2;
    default: return 1;
  }
}

Expr Expr::var(std::string name) { return Expr(enode(ex::Var{std::move(name), false})); }
Expr Expr::fix_var(std::string name) { return Expr(enode(ex::Var{std::move(name), true})); }
Expr Expr::res(ChannelHalf h) { return Expr(enode(ex::Res{h})); }
Expr Expr::integer(std::int64_t n) { return Expr(enode(ex::Int{n})); }
Expr Expr::boolean(bool b) { return Expr(enode(ex::Bool{b})); }
Expr Expr::str(std::string s) { return Expr(enode(ex::Str{std::move(s)})); }
Expr Expr::unit() { return Expr(enode(ex::Unit{})); }
Expr Expr::pair(Expr a, Expr b) { return Expr(enode(ex::Pair{std::move(a), std::move(b)})); }
Expr Expr::fst(Expr e) { return Expr(enode(ex::Fst{std::move(e)})); }
Expr Expr::snd(Expr e) { return Expr(enode(ex::Snd{std::move(e)})); }
Expr Expr::let_pair(std::string x1, std::string x2, Expr bound, Expr body) {
  return Expr(enode(ex::LetPair{std::move(x1), std::move(x2), std::move(bound), std::move(body)}));
}
Expr Expr::lam(std::string x, Viewtype param, std::optional<ArrowKind> kind, Expr body) {
  return Expr(enode(ex::Lam{std::move(x), std::move(param), kind, std::move(body)}));
}
Expr Expr::app(Expr f, Expr a) { return Expr(enode(ex::App{std::move(f), std::move(a)})); }
Expr Expr::fix(std::string f, Viewtype ann, Expr body) {
  return Expr(enode(ex::Fix{std::move(f), std::move(ann), std::move(body)}));
}
Expr Expr::if_(Expr c, Expr t, Expr e) {
  return Expr(enode(ex::If{std::move(c), std::move(t), std::move(e)}));
}
Expr Expr::prim(PrimOp op, std::vector<Expr> args) {
  if (args.size() != prim_arity(op)) {
    throw Error(Errc::TypeError, std::string(prim_name(op)) + " expects " +
                                     std::to_string(prim_arity(op)) + " argument(s)");
  }
  return Expr(enode(ex::Prim{op, std::move(args)}));
}
Expr Expr::let(std::string x, Viewtype t, Expr bound, Expr body) {
  return app(lam(std::move(x), std::move(t), std::nullopt, std::move(body)), std::move(bound));
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node().v;
  const auto& y = b.node().v;
  if (x.index() != y.index()) return false;
  return std::visit(
      overloaded{
          [&](const ex::Var& v) {
            const auto& w = std::get<ex::Var>(y);
            return v.name == w.name && v.fix == w.fix;
          },
          [&](const ex::Res& v) { return v.half == std::get<ex::Res>(y).half; },
          [&](const ex::Int& v) { return v.value == std::get<ex::Int>(y).value; },
          [&](const ex::Bool& v) { return v.value == std::get<ex::Bool>(y).value; },
          [&](const ex::Str& v) { return v.value == std::get<ex::Str>(y).value; },
          [](const ex::Unit&) { return true; },
          [&](const ex::Pair& v) {
            const auto& w = std::get<ex::Pair>(y);
            return v.a == w.a && v.b == w.b;
          },
          [&](const ex::Fst& v) { return v.e == std::get<ex::Fst>(y).e; },
          [&](const ex::Snd& v) { return v.e == std::get<ex::Snd>(y).e; },
          [&](const ex::LetPair& v) {
            const auto& w = std::get<ex::LetPair>(y);
            return v.x1 == w.x1 && v.x2 == w.x2 && v.bound == w.bound && v.body == w.body;
          },
          [&](const ex::Lam& v) {
            const auto& w = std::get<ex::Lam>(y);
            return v.x == w.x && v.param == w.param && v.kind == w.kind && v.body == w.body;
          },
          [&](const ex::App& v) {
            const auto& w = std::get<ex::App>(y);
            return v.f == w.f && v.a == w.a;
          },
          [&](const ex::Fix& v) {
            const auto& w = std::get<ex::Fix>(y);
            return v.f == w.f && v.ann == w.ann && v.body == w.body;
          },
          [&](const ex::If& v) {
            const auto& w = std::get<ex::If>(y);
            return v.c == w.c && v.t == w.t && v.e == w.e;
          },
          [&](const ex::Prim& v) {
            const auto& w = std::get<ex::Prim>(y);
            return v.op == w.op && v.args == w.args;
          },
      },
      x);
}

bool is_value(const Expr& e) {
  return std::visit(overloaded{
                        [](const ex::Var& v) { return !v.fix; },
                        [](const ex::Res&) { return true; },
                        [](const ex::Int&) { return true; },
                        [](const ex::Bool&) { return true; },
                        [](const ex::Str&) { return true; },
                        [](const ex::Unit&) { return true; },
                        [](const ex::Pair& p) { return is_value(p.a) && is_value(p.b); },
                        [](const ex::Lam&) { return true; },
                        [](const auto&) { return false; },
                    },
                    e.node().v);
}

namespace {

void collect_rho(const Expr& e, std::vector<ChannelHalf>& out) {
  std::visit(overloaded{
                 [&](const ex::Res& r) { out.push_back(r.half); },
                 [&](const ex::Pair& p) {
                   collect_rho(p.a, out);
                   collect_rho(p.b, out);
                 },
                 [&](const ex::Fst& p) { collect_rho(p.e, out); },
                 [&](const ex::Snd& p) { collect_rho(p.e, out); },
                 [&](const ex::LetPair& p) {
                   collect_rho(p.bound, out);
                   collect_rho(p.body, out);
                 },
                 [&](const ex::Lam& p) { collect_rho(p.body, out); },
                 [&](const ex::App& p) {
                   collect_rho(p.f, out);
                   collect_rho(p.a, out);
                 },
                 [&](const ex::Fix& p) { collect_rho(p.body, out); },
                 [&](const ex::If& p) {
                   collect_rho(p.c, out);
                   collect_rho(p.t, out);
                 },
                 [&](const ex::Prim& p) {
                   for (const auto& a : p.args) collect_rho(a, out);
                 },
                 [](const auto&) {},
             },
             e.node().v);
}

void collect_free(const Expr& e, std::set<std::string>& bound, std::set<std::string>& out) {
  auto under = [&](std::initializer_list<std::string> names, const Expr& body) {
    std::vector<std::string> added;
    for (const auto& n : names) {
      if (bound.insert(n).second) added.push_back(n);
    }
    collect_free(body, bound, out);
    for (const auto& n : added) bound.erase(n);
  };
  std::visit(overloaded{
                 [&](const ex::Var& v) {
                   if (!bound.count(v.name)) out.insert(v.name);
                 },
                 [&](const ex::Pair& p) {
                   collect_free(p.a, bound, out);
                   collect_free(p.b, bound, out);
                 },
                 [&](const ex::Fst& p) { collect_free(p.e, bound, out); },
                 [&](const ex::Snd& p) { collect_free(p.e, bound, out); },
                 [&](const ex::LetPair& p) {
                   collect_free(p.bound, bound, out);
                   under({p.x1, p.x2}, p.body);
                 },
                 [&](const ex::Lam& p) { under({p.x}, p.body); },
                 [&](const ex::App& p) {
                   collect_free(p.f, bound, out);
                   collect_free(p.a, bound, out);
                 },
                 [&](const ex::Fix& p) { under({p.f}, p.body); },
                 [&](const ex::If& p) {
                   collect_free(p.c, bound, out);
                   collect_free(p.t, bound, out);
                   collect_free(p.e, bound, out);
                 },
                 [&](const ex::Prim& p) {
                   for (const auto& a : p.args) collect_free(a, bound, out);
                 },
                 [](const auto&) {},
             },
             e.node().v);
}

}  // namespace

std::vector<ChannelHalf> rho(const Expr& e) {
  std::vector<ChannelHalf> out;
  collect_rho(e, out);
  std::sort(out.begin(), out.end());
  return out;
}

ChannelSet rho_ch(const Expr& e) { return rho(e); }

std::vector<std::string> free_vars(const Expr& e) {
  std::set<std::string> bound, out;
  collect_free(e, bound, out);
  return {out.begin(), out.end()};
}

Expr substitute(const Expr& e, const std::string& x, const Expr& v) {
  return std::visit(
      overloaded{
          [&](const ex::Var& w) { return w.name == x ? v : e; },
          [&](const ex::Pair& p) { return Expr::pair(substitute(p.a, x, v), substitute(p.b, x, v)); },
          [&](const ex::Fst& p) { return Expr::fst(substitute(p.e, x, v)); },
          [&](const ex::Snd& p) { return Expr::snd(substitute(p.e, x, v)); },
          [&](const ex::LetPair& p) {
            Expr body = (p.x1 == x || p.x2 == x) ? p.body : substitute(p.body, x, v);
            return Expr::let_pair(p.x1, p.x2, substitute(p.bound, x, v), body);
          },
          [&](const ex::Lam& p) {
            return p.x == x ? e : Expr::lam(p.x, p.param, p.kind, substitute(p.body, x, v));
          },
          [&](const ex::App& p) { return Expr::app(substitute(p.f, x, v), substitute(p.a, x, v)); },
          [&](const ex::Fix& p) { return p.f == x ? e : Expr::fix(p.f, p.ann, substitute(p.body, x, v)); },
          [&](const ex::If& p) {
            return Expr::if_(substitute(p.c, x, v), substitute(p.t, x, v), substitute(p.e, x, v));
          },
          [&](const ex::Prim& p) {
            std::vector<Expr> args;
            args.reserve(p.args.size());
            for (const auto& a : p.args) args.push_back(substitute(a, x, v));
            return Expr::prim(p.op, std::move(args));
          },
          [&](const auto&) { return e; },
      },
      e.node().v);
}

ChannelSetCollection Pool::snapshot() const {
  std::vector<ChannelSet> sets;
  sets.reserve(threads.size());
  for (const auto& [tid, e] : threads) sets.push_back(rho_ch(e));
  return ChannelSetCollection(std::move(sets));
}

}  // namespace mrsession::calc

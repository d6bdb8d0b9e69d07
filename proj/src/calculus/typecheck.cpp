#include "mrsession/calculus/typecheck.hpp"

#include <algorithm>
#include <set>

#include "mrsession/calculus/sexpr.hpp"
#include "overloaded.hpp"

namespace mrsession::calc {

namespace {

[[noreturn]] void reject(const std::string& msg) { throw Error(Errc::TypeError, msg); }

class Checker {
 public:
  Checker(const TypeEnv& env, const CheckOptions& opts)
      : gamma_(env.gamma), delta_(env.delta), opts_(opts) {}

  std::map<std::string, Viewtype>& delta() { return delta_; }

  Viewtype check(const Expr& e) {
    return std::visit([&](const auto& n) { return rule(n, e); }, e.node().v);
  }

 private:
  struct Saved {
    std::string name;
    std::optional<Viewtype> gamma, delta;
  };

  Saved bind(const std::string& x, const Viewtype& t) {
    Saved s{x, std::nullopt, std::nullopt};
    if (auto it = gamma_.find(x); it != gamma_.end()) {
      s.gamma = it->second;
      gamma_.erase(it);
    }
    if (auto it = delta_.find(x); it != delta_.end()) {
      s.delta = it->second;
      delta_.erase(it);
    }
    consumed_.erase(x);
    (t.is_linear() ? delta_ : gamma_).insert_or_assign(x, t);
    return s;
  }

  void unbind(const Saved& s) {
    if (delta_.count(s.name)) reject("linear variable '" + s.name + "' is never used");
    gamma_.erase(s.name);
    if (s.gamma) gamma_.insert_or_assign(s.name, *s.gamma);
    if (s.delta) delta_.insert_or_assign(s.name, *s.delta);
  }

  Group group_of(RoleSet g) const { return Group(opts_.universe, g); }

  Viewtype rule(const ex::Var& v, const Expr&) {
    if (auto it = delta_.find(v.name); it != delta_.end()) {
      Viewtype t = it->second;
      delta_.erase(it);
      consumed_.insert(v.name);
      return t;
    }
    if (auto it = gamma_.find(v.name); it != gamma_.end()) return it->second;
    if (consumed_.count(v.name)) reject("linear variable '" + v.name + "' used more than once");
    reject("unbound variable '" + v.name + "'");
  }

  Viewtype rule(const ex::Res& r, const Expr&) {
    if (opts_.sigma) {
      if (auto it = opts_.sigma->find(r.half); it != opts_.sigma->end()) return it->second;
    }
    reject("resource ch" + std::string(r.half.positive ? "+" : "-") + std::to_string(r.half.id) +
           " has no type");
  }

  Viewtype rule(const ex::Int& i, const Expr&) { return Viewtype::int_exact(i.value); }
  Viewtype rule(const ex::Bool&, const Expr&) { return Viewtype::boolean(); }
  Viewtype rule(const ex::Str&, const Expr&) { return Viewtype::str(); }
  Viewtype rule(const ex::Unit&, const Expr&) { return Viewtype::unit(); }

  Viewtype rule(const ex::Pair& p, const Expr&) {
    Viewtype a = check(p.a);
    Viewtype b = check(p.b);
    if (a.is_linear() || b.is_linear()) return Viewtype::tensor(a, b);
    return Viewtype::prod(a, b);
  }

  Viewtype rule(const ex::Fst& p, const Expr&) {
    Viewtype t = check(p.e);
    if (auto* q = std::get_if<ty::Prod>(&t.node().v)) return q->a;
    reject("fst expects a non-linear product, got " + format_type(t));
  }

  Viewtype rule(const ex::Snd& p, const Expr&) {
    Viewtype t = check(p.e);
    if (auto* q = std::get_if<ty::Prod>(&t.node().v)) return q->b;
    reject("snd expects a non-linear product, got " + format_type(t));
  }

  Viewtype rule(const ex::LetPair& p, const Expr&) {
    if (p.x1 == p.x2) reject("let-pair binds '" + p.x1 + "' twice");
    Viewtype t = check(p.bound);
    std::optional<Viewtype> a, b;
    if (auto* q = std::get_if<ty::Tensor>(&t.node().v)) {
      a = q->a;
      b = q->b;
    } else if (auto* q = std::get_if<ty::Prod>(&t.node().v)) {
      a = q->a;
      b = q->b;
    } else {
      reject("let-pair expects a pair, got " + format_type(t));
    }
    Saved s1 = bind(p.x1, *a);
    Saved s2 = bind(p.x2, *b);
    Viewtype r = check(p.body);
    unbind(s2);
    unbind(s1);
    return r;
  }

  Viewtype rule(const ex::Lam& l, const Expr&) {
    validate_viewtype(l.param, opts_.universe);
    std::set<std::string> before;
    for (const auto& [k, _] : delta_) before.insert(k);
    Saved s = bind(l.x, l.param);
    Viewtype body = check(l.body);
    unbind(s);
    bool captures = false;
    for (const auto& k : before) {
      if (!delta_.count(k)) captures = true;
    }
    bool resources = !rho(l.body).empty();
    ArrowKind kind = (captures || resources) ? ArrowKind::Linear : ArrowKind::Intuitionistic;
    if (l.kind) {
      if (*l.kind == ArrowKind::Intuitionistic && kind == ArrowKind::Linear) {
        reject(captures ? "intuitionistic lambda captures a linear variable"
                        : "intuitionistic lambda body holds resources");
      }
      kind = *l.kind;
    }
    return Viewtype::arrow(kind, l.param, body);
  }

  Viewtype rule(const ex::App& a, const Expr&) {
    Viewtype f = check(a.f);
    auto* arr = std::get_if<ty::Arrow>(&f.node().v);
    if (!arr) reject("application of a non-function of type " + format_type(f));
    Viewtype arg = check(a.a);
    if (!subtype(arg, arr->param)) {
      reject("argument of type " + format_type(arg) + " where " + format_type(arr->param) +
             " is expected");
    }
    return arr->result;
  }

  Viewtype rule(const ex::Fix& f, const Expr&) {
    validate_viewtype(f.ann, opts_.universe);
    if (f.ann.is_linear()) reject("fix annotation must be a non-linear type");
    if (!is_value(f.body)) reject("fix body must be a value");
    std::size_t before = delta_.size();
    Saved s = bind(f.f, f.ann);
    Viewtype body = check(f.body);
    unbind(s);
    if (delta_.size() != before) reject("fix body captures a linear variable");
    if (!subtype(body, f.ann)) {
      reject("fix body has type " + format_type(body) + ", annotation " + format_type(f.ann));
    }
    return f.ann;
  }

  Viewtype rule(const ex::If& i, const Expr&) {
    Viewtype c = check(i.c);
    if (!subtype(c, Viewtype::boolean())) reject("if condition has type " + format_type(c));
    auto saved = delta_;
    auto saved_consumed = consumed_;
    Viewtype t = check(i.t);
    auto after_t = delta_;
    delta_ = saved;
    consumed_ = saved_consumed;
    Viewtype e = check(i.e);
    bool same = after_t.size() == delta_.size() &&
                std::equal(after_t.begin(), after_t.end(), delta_.begin(),
                           [](const auto& x, const auto& y) { return x.first == y.first; });
    if (!same) reject("if branches consume different linear variables");
    if (rho(i.t) != rho(i.e)) reject("if branches hold different resources");
    auto j = join(t, e);
    if (!j) reject("if branches have incompatible types " + format_type(t) + " and " + format_type(e));
    return *j;
  }

  Viewtype rule(const ex::Prim& p, const Expr&) {
    std::vector<Viewtype> args;
    for (const auto& a : p.args) args.push_back(check(a));
    switch (p.op) {
      case PrimOp::IAdd: {
        auto* x = std::get_if<ty::IntExact>(&args[0].node().v);
        auto* y = std::get_if<ty::IntExact>(&args[1].node().v);
        if (x && y) return Viewtype::int_exact(x->n + y->n);
        for (const auto& a : args) {
          if (!subtype(a, Viewtype::integer())) reject("iadd on " + format_type(a));
        }
        return Viewtype::integer();
      }
      case PrimOp::RandBit: return Viewtype::boolean();
      case PrimOp::ThreadCreate: {
        Viewtype want = Viewtype::arrow(ArrowKind::Linear, Viewtype::unit(), Viewtype::unit());
        if (!subtype(args[0], want)) reject("thread_create on " + format_type(args[0]));
        return Viewtype::unit();
      }
      case PrimOp::ChanCreate: {
        auto* arr = std::get_if<ty::Arrow>(&args[0].node().v);
        auto* ch = arr ? std::get_if<ty::Chan>(&arr->param.node().v) : nullptr;
        if (!ch || !subtype(arr->result, Viewtype::unit())) {
          reject("chan_create expects chan(G,S) -> 1, got " + format_type(args[0]));
        }
        Group g = group_of(ch->group);
        return Viewtype::chan(g.complement().members(), ch->proto);
      }
      case PrimOp::Chan2Create: {
        if (!opts_.allow_unsafe) {
          throw Error(Errc::UnsafeDisabled, "chan2_create requires the unsafe flag");
        }
        auto* arr = std::get_if<ty::Arrow>(&args[0].node().v);
        auto* tp = arr ? std::get_if<ty::Tensor>(&arr->param.node().v) : nullptr;
        auto* c1 = tp ? std::get_if<ty::Chan>(&tp->a.node().v) : nullptr;
        auto* c2 = tp ? std::get_if<ty::Chan>(&tp->b.node().v) : nullptr;
        if (!c1 || !c2 || !subtype(arr->result, Viewtype::unit())) {
          reject("chan2_create expects (chan ⊗ chan) -> 1, got " + format_type(args[0]));
        }
        return Viewtype::tensor(
            Viewtype::chan(group_of(c1->group).complement().members(), c1->proto),
            Viewtype::chan(group_of(c2->group).complement().members(), c2->proto));
      }
      case PrimOp::Send:
      case PrimOp::Recv:
      case PrimOp::Skip:
      case PrimOp::Close: return session_op(p.op, args);
    }
    reject("unknown primitive");
  }

  Viewtype session_op(PrimOp op, const std::vector<Viewtype>& args) {
    auto* ch = std::get_if<ty::Chan>(&args[0].node().v);
    if (!ch) reject(std::string(prim_name(op)) + " on non-channel " + format_type(args[0]));
    HeadAction h = head_action(group_of(ch->group), ch->proto);
    std::string name(prim_name(op));
    auto wrong = [&]() -> Viewtype {
      reject(name + " on " + format_type(args[0]) + " whose head is " + describe(h));
    };
    if (std::holds_alternative<head::ChooseSend>(h) || std::holds_alternative<head::ChooseRecv>(h)) {
      reject("choice heads are not part of the calculus (" + format_type(args[0]) + ")");
    }
    switch (op) {
      case PrimOp::Send: {
        auto* s = std::get_if<head::Send>(&h);
        if (!s) return wrong();
        Viewtype want = sort_viewtype(s->sort);
        if (!subtype(args[1], want)) {
          reject("send payload of type " + format_type(args[1]) + " where " + format_type(want) +
                 " is expected");
        }
        return Viewtype::chan(ch->group, s->cont);
      }
      case PrimOp::Recv: {
        auto* r = std::get_if<head::Recv>(&h);
        if (!r) return wrong();
        return Viewtype::tensor(Viewtype::chan(ch->group, r->cont), sort_viewtype(r->sort));
      }
      case PrimOp::Skip: {
        auto* s = std::get_if<head::Skip>(&h);
        if (!s) return wrong();
        return Viewtype::chan(ch->group, s->cont);
      }
      default:
        if (!std::holds_alternative<head::Close>(h)) return wrong();
        return Viewtype::unit();
    }
  }

  std::map<std::string, Viewtype> gamma_;
  std::map<std::string, Viewtype> delta_;
  std::set<std::string> consumed_;
  const CheckOptions& opts_;
};

}  // namespace

void validate_viewtype(const Viewtype& t, RoleUniverse u) {
  std::visit(overloaded{
                 [&](const ty::Chan& c) {
                   Group g(u, c.group);
                   if (!g.is_proper()) {
                     throw Error(Errc::EmptyGroup,
                                 "chan group " + g.to_string() + " must be a proper subset");
                   }
                   if (!well_formed(c.proto, u)) {
                     throw Error(Errc::IllFormedSession, format_session(c.proto));
                   }
                 },
                 [&](const ty::Prod& p) {
                   validate_viewtype(p.a, u);
                   validate_viewtype(p.b, u);
                   if (p.a.is_linear() || p.b.is_linear()) {
                     reject("product components must be non-linear; use tensor");
                   }
                 },
                 [&](const ty::Tensor& p) {
                   validate_viewtype(p.a, u);
                   validate_viewtype(p.b, u);
                 },
                 [&](const ty::Arrow& p) {
                   validate_viewtype(p.param, u);
                   validate_viewtype(p.result, u);
                 },
                 [](const auto&) {},
             },
             t.node().v);
}

Typed typecheck(const TypeEnv& env, const Expr& e, const CheckOptions& opts) {
  Checker c(env, opts);
  Viewtype t = c.check(e);
  return {t, c.delta()};
}

Viewtype typecheck_closed(const Expr& e, const CheckOptions& opts) {
  Typed t = typecheck({}, e, opts);
  if (!t.leftover.empty()) reject("unconsumed linear variable '" + t.leftover.begin()->first + "'");
  return t.type;
}

Viewtype typecheck_pool(const Pool& p, bool allow_unsafe) {
  if (!p.threads.count(0)) reject("pool has no main thread");
  std::map<ChannelHalf, int> counts;
  for (const auto& [tid, e] : p.threads) {
    for (const auto& h : rho(e)) ++counts[h];
  }
  for (const auto& [h, n] : counts) {
    if (n > 1) reject(format_half(h) + " occurs " + std::to_string(n) + " times");
    if (!counts.count(h.dual())) reject(format_half(h) + " is alive without its dual");
    if (!p.sigma.count(h)) reject(format_half(h) + " has no type in the signature");
  }
  for (const auto& [h, t] : p.sigma) {
    if (!counts.count(h)) reject("signature entry for dead channel " + format_half(h));
    validate_viewtype(t, p.universe);
    auto* c = std::get_if<ty::Chan>(&t.node().v);
    if (!c) reject(format_half(h) + " is typed by a non-channel " + format_type(t));
    if (h.positive) {
      auto* d = std::get_if<ty::Chan>(&p.sigma.at(h.dual()).node().v);
      Group g(p.universe, c->group);
      if (!d || g.complement().members() != d->group || !equivalent(c->proto, d->proto)) {
        reject("channel " + std::to_string(h.id) + " halves have non-matching types " +
               format_type(t) + " and " + format_type(p.sigma.at(h.dual())));
      }
    }
  }
  CheckOptions opts{p.universe, &p.sigma, allow_unsafe};
  std::optional<Viewtype> main;
  for (const auto& [tid, e] : p.threads) {
    if (auto fv = free_vars(e); !fv.empty()) {
      reject("thread " + std::to_string(tid) + " has free variable '" + fv.front() + "'");
    }
    Viewtype t;
    try {
      t = typecheck_closed(e, opts);
    } catch (const Error& err) {
      if (err.code() != Errc::TypeError) throw;
      reject("thread " + std::to_string(tid) + ": " + std::string(err.what()).substr(11));
    }
    if (tid == 0) {
      main = t;
    } else if (!subtype(t, Viewtype::unit())) {
      reject("thread " + std::to_string(tid) + " has type " + format_type(t) + ", expected 1");
    }
  }
  return *main;
}

bool check_value_purity(const Expr& v, const CheckOptions& opts) {
  Viewtype t = typecheck_closed(v, opts);
  if (t.is_linear()) return true;
  return rho(v).empty();
}

bool canonical_form(const Expr& v, const Viewtype& t) {
  const auto& n = v.node().v;
  return std::visit(overloaded{
                        [&](const ty::Bool&) { return std::holds_alternative<ex::Bool>(n); },
                        [&](const ty::Int&) { return std::holds_alternative<ex::Int>(n); },
                        [&](const ty::IntExact& i) {
                          auto* x = std::get_if<ex::Int>(&n);
                          return x && x->value == i.n;
                        },
                        [&](const ty::Str&) { return std::holds_alternative<ex::Str>(n); },
                        [&](const ty::Unit&) { return std::holds_alternative<ex::Unit>(n); },
                        [&](const ty::Chan&) { return std::holds_alternative<ex::Res>(n); },
                        [&](const ty::Prod& p) {
                          auto* x = std::get_if<ex::Pair>(&n);
                          return x && canonical_form(x->a, p.a) && canonical_form(x->b, p.b);
                        },
                        [&](const ty::Tensor& p) {
                          auto* x = std::get_if<ex::Pair>(&n);
                          return x && canonical_form(x->a, p.a) && canonical_form(x->b, p.b);
                        },
                        [&](const ty::Arrow&) { return std::holds_alternative<ex::Lam>(n); },
                    },
                    t.node().v);
}

}  // namespace mrsession::calc

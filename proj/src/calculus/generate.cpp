#include "mrsession/calculus/generate.hpp"

#include <algorithm>

namespace mrsession::calc {

namespace {

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, int percent) { return uniform(rng, 0, 99) < percent; }

RoleSet random_proper_group(std::mt19937_64& rng, RoleUniverse u) {
  std::uint64_t full = (std::uint64_t{1} << u.nrole()) - 1;
  return RoleSet::from_bits(std::uniform_int_distribution<std::uint64_t>(1, full - 1)(rng));
}

PayloadSort random_sort(std::mt19937_64& rng, RoleUniverse u, int chan_depth, int tuple_depth) {
  int pick = uniform(rng, 0, 9);
  if (pick <= 3) return PayloadSort::integer();
  if (pick == 4) return PayloadSort::boolean();
  if (pick == 5) return PayloadSort::str();
  if (pick == 6) return PayloadSort::unit();
  if (pick == 7 && tuple_depth > 0) {
    std::vector<PayloadSort> parts;
    for (int k = uniform(rng, 2, 3); k > 0; --k) {
      parts.push_back(random_sort(rng, u, chan_depth, tuple_depth - 1));
    }
    return PayloadSort::tuple(std::move(parts));
  }
  if (pick >= 8 && chan_depth > 0) {
    return PayloadSort::chan(random_proper_group(rng, u),
                             random_protocol(rng, u, uniform(rng, 1, 3), chan_depth - 1));
  }
  return PayloadSort::integer();
}

}  // namespace

SessionType random_protocol(std::mt19937_64& rng, RoleUniverse u, int depth, int chan_depth) {
  if (depth <= 0 || coin(rng, 12)) return SessionType::nil();
  if (coin(rng, 15)) {
    return SessionType::append(random_protocol(rng, u, depth - 1, chan_depth),
                               random_protocol(rng, u, depth - 1, chan_depth));
  }
  Role i = uniform(rng, 0, u.nrole() - 1);
  Role j = uniform(rng, 0, u.nrole() - 2);
  if (j >= i) ++j;
  return SessionType::msg(i, j, random_sort(rng, u, chan_depth, 1),
                          random_protocol(rng, u, depth - 1, chan_depth));
}

Viewtype random_plain_type(std::mt19937_64& rng, int depth) {
  int pick = uniform(rng, 0, depth > 0 ? 6 : 3);
  switch (pick) {
    case 0: return Viewtype::integer();
    case 1: return Viewtype::boolean();
    case 2: return Viewtype::str();
    case 3: return Viewtype::unit();
    case 4:
    case 5: return Viewtype::prod(random_plain_type(rng, depth - 1), random_plain_type(rng, depth - 1));
    default:
      return Viewtype::arrow(ArrowKind::Intuitionistic, random_plain_type(rng, depth - 1),
                             random_plain_type(rng, depth - 1));
  }
}

Expr random_value(std::mt19937_64& rng, const Viewtype& t) {
  const auto& v = t.node().v;
  if (std::holds_alternative<ty::Int>(v)) return Expr::integer(uniform(rng, -50, 50));
  if (auto* n = std::get_if<ty::IntExact>(&v)) return Expr::integer(n->n);
  if (std::holds_alternative<ty::Bool>(v)) return Expr::boolean(coin(rng, 50));
  if (std::holds_alternative<ty::Str>(v)) return Expr::str(std::string(1, static_cast<char>('a' + uniform(rng, 0, 25))));
  if (std::holds_alternative<ty::Unit>(v)) return Expr::unit();
  if (auto* p = std::get_if<ty::Prod>(&v)) return Expr::pair(random_value(rng, p->a), random_value(rng, p->b));
  if (auto* a = std::get_if<ty::Arrow>(&v)) {
    Expr body = random_value(rng, a->result);
    if (subtype(a->param, a->result) && coin(rng, 40)) body = Expr::var("x");
    return Expr::lam("x", a->param, std::nullopt, body);
  }
  throw Error(Errc::PreconditionViolated, "random_value needs a non-linear type");
}

namespace {

struct Live {
  std::string var;
  Group group;
  SessionType proto;
};

class Builder {
 public:
  Builder(std::mt19937_64& rng, const GenOptions& opts)
      : rng_(rng), opts_(opts), universe_(opts.nrole) {}

  Expr main_thread() {
    std::vector<Live> live;
    Expr body = open_channels(live, uniform(rng_, 1, std::max(1, opts_.max_channels)), 0);
    return body;
  }

  Expr drive(std::vector<Live> live, int delegation) {
    if (live.empty()) return filler();
    if (opts_.threads && live.size() > 1 && coin(rng_, 10)) {
      // Hand a prefix of the channels to a fresh thread.
      std::shuffle(live.begin(), live.end(), rng_);
      std::size_t cut = static_cast<std::size_t>(uniform(rng_, 1, static_cast<int>(live.size()) - 1));
      std::vector<Live> moved(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(cut));
      live.erase(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(cut));
      Expr spawn = Expr::prim(PrimOp::ThreadCreate,
                              {Expr::lam(fresh("z"), Viewtype::unit(), std::nullopt, drive(moved, delegation))});
      return seq(spawn, drive(std::move(live), delegation));
    }
    if (opts_.branches && budget_ > 0 && coin(rng_, 6)) {
      --budget_;
      Expr a = drive(live, delegation);
      Expr b = drive(live, delegation);
      return Expr::if_(Expr::prim(PrimOp::RandBit, {}), a, b);
    }
    std::size_t k = static_cast<std::size_t>(uniform(rng_, 0, static_cast<int>(live.size()) - 1));
    Live cur = live[k];
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
    Expr x = Expr::var(cur.var);
    HeadAction h = head_action(cur.group, cur.proto);
    if (std::holds_alternative<head::Close>(h)) {
      return seq(Expr::prim(PrimOp::Close, {x}), drive(std::move(live), delegation));
    }
    if (auto* s = std::get_if<head::Skip>(&h)) {
      Live next{fresh("c"), cur.group, s->cont};
      Expr op = Expr::prim(PrimOp::Skip, {x});
      live.push_back(next);
      return Expr::let(next.var, chan_type(next), op, drive(std::move(live), delegation));
    }
    if (auto* s = std::get_if<head::Send>(&h)) {
      Live next{fresh("c"), cur.group, s->cont};
      Expr op = Expr::prim(PrimOp::Send, {x, payload(s->sort, delegation)});
      live.push_back(next);
      return Expr::let(next.var, chan_type(next), op, drive(std::move(live), delegation));
    }
    if (auto* r = std::get_if<head::Recv>(&h)) {
      Live next{fresh("c"), cur.group, r->cont};
      std::string p = fresh("v");
      live.push_back(next);
      Expr body = absorb({{p, r->sort}}, std::move(live), delegation);
      return Expr::let_pair(next.var, p, Expr::prim(PrimOp::Recv, {x}), body);
    }
    throw Error(Errc::PreconditionViolated, "choice heads cannot be generated");
  }

 private:
  Expr open_channels(std::vector<Live>& live, int count, int delegation) {
    if (count == 0) return drive(live, delegation);
    SessionType s = random_protocol(rng_, universe_, opts_.protocol_depth,
                                    std::max(0, opts_.delegation_depth - delegation));
    Group g(universe_, random_proper_group(rng_, universe_));
    // The spawned side may take some of the channels opened so far.
    std::vector<Live> mine{Live{fresh("y"), g, s}};
    if (!live.empty() && coin(rng_, 30)) {
      mine.push_back(live.back());
      live.pop_back();
    }
    Expr creator = Expr::prim(
        PrimOp::ChanCreate,
        {Expr::lam(mine.front().var, chan_type(mine.front()), std::nullopt, drive(mine, delegation + 1))});
    Live caller{fresh("c"), g.complement(), s};
    live.push_back(caller);
    Expr rest = coin(rng_, 50) ? open_channels(live, count - 1, delegation) : drive(live, delegation);
    return Expr::let(caller.var, chan_type(caller), creator, rest);
  }

  Expr payload(const PayloadSort& sort, int delegation) {
    return std::visit(
        [&](const auto& n) -> Expr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, sort::Unit>) return Expr::unit();
          else if constexpr (std::is_same_v<T, sort::Int>) return integer();
          else if constexpr (std::is_same_v<T, sort::Bool>) return Expr::boolean(coin(rng_, 50));
          else if constexpr (std::is_same_v<T, sort::Str>) return Expr::str(fresh("s"));
          else if constexpr (std::is_same_v<T, sort::Tuple>) {
            Expr acc = payload(n.parts.back(), delegation);
            for (std::size_t k = n.parts.size() - 1; k-- > 0;) acc = Expr::pair(payload(n.parts[k], delegation), acc);
            return acc;
          } else {
            // Delegation: open a channel and send our end of it away.
            Group outer(universe_, n.group);
            Live peer{fresh("y"), outer.complement(), n.proto};
            return Expr::prim(PrimOp::ChanCreate,
                              {Expr::lam(peer.var, chan_type(peer), std::nullopt,
                                         drive({peer}, delegation + 1))});
          }
        },
        sort.node().v);
  }

  // Destructures received payloads until every channel component is a
  // variable of its own, then keeps driving.
  Expr absorb(std::vector<std::pair<std::string, PayloadSort>> pending, std::vector<Live> live,
              int delegation) {
    if (pending.empty()) return drive(std::move(live), delegation);
    auto [v, sort] = pending.back();
    pending.pop_back();
    if (auto* c = std::get_if<sort::Chan>(&sort.node().v)) {
      live.push_back(Live{v, Group(universe_, c->group), c->proto});
      return absorb(std::move(pending), std::move(live), delegation);
    }
    auto* t = std::get_if<sort::Tuple>(&sort.node().v);
    if (!t || !sort_viewtype(sort).is_linear()) return absorb(std::move(pending), std::move(live), delegation);
    std::string a = fresh("v"), b = fresh("v");
    PayloadSort tail = t->parts.size() == 2
                           ? t->parts[1]
                           : PayloadSort::tuple(std::vector<PayloadSort>(t->parts.begin() + 1, t->parts.end()));
    pending.emplace_back(a, t->parts[0]);
    pending.emplace_back(b, tail);
    return Expr::let_pair(a, b, Expr::var(v), absorb(std::move(pending), std::move(live), delegation));
  }

  Expr seq(Expr first, Expr rest) { return Expr::let(fresh("u"), Viewtype::unit(), first, rest); }

  Expr integer() {
    switch (uniform(rng_, 0, 3)) {
      case 0: return Expr::prim(PrimOp::IAdd, {Expr::integer(uniform(rng_, 0, 9)), Expr::integer(uniform(rng_, 0, 9))});
      case 1:
        if (opts_.branches) {
          return Expr::if_(Expr::prim(PrimOp::RandBit, {}), Expr::integer(uniform(rng_, 0, 9)),
                           Expr::integer(uniform(rng_, 0, 9)));
        }
        [[fallthrough]];
      case 2:
        if (opts_.loops) return loop();
        [[fallthrough]];
      default: return Expr::integer(uniform(rng_, -20, 20));
    }
  }

  // fix f. λn. if randbit() then n else f(n+1), applied to a literal.
  Expr loop() {
    std::string f = fresh("f"), n = fresh("n");
    Viewtype int_to_int = Viewtype::arrow(ArrowKind::Intuitionistic, Viewtype::integer(), Viewtype::integer());
    Expr body = Expr::lam(
        n, Viewtype::integer(), std::nullopt,
        Expr::if_(Expr::prim(PrimOp::RandBit, {}), Expr::var(n),
                  Expr::app(Expr::fix_var(f), Expr::prim(PrimOp::IAdd, {Expr::var(n), Expr::integer(1)}))));
    return Expr::app(Expr::fix(f, int_to_int, body), Expr::integer(uniform(rng_, 0, 5)));
  }

  Expr filler() {
    switch (uniform(rng_, 0, 5)) {
      case 0:
        if (opts_.threads) {
          return Expr::prim(PrimOp::ThreadCreate,
                            {Expr::lam(fresh("z"), Viewtype::unit(), std::nullopt,
                                       Expr::let(fresh("w"), Viewtype::integer(), integer(), Expr::unit()))});
        }
        [[fallthrough]];
      case 1: return Expr::let(fresh("w"), Viewtype::integer(), integer(), Expr::unit());
      default: return Expr::unit();
    }
  }

  Viewtype chan_type(const Live& l) const { return Viewtype::chan(l.group.members(), l.proto); }

  std::string fresh(const char* stem) { return stem + std::to_string(counter_++); }

  std::mt19937_64& rng_;
  const GenOptions& opts_;
  RoleUniverse universe_;
  int counter_ = 0;
  int budget_ = 3;
};

}  // namespace

Expr random_driver(std::mt19937_64& rng, const std::string& var, const Group& g,
                   const SessionType& s, const GenOptions& opts) {
  Builder b(rng, opts);
  return b.drive({Live{var, g, s}}, 0);
}

Pool random_pool(std::mt19937_64& rng, const GenOptions& opts) {
  Pool p;
  p.universe = RoleUniverse(opts.nrole);
  Builder b(rng, opts);
  p.threads.emplace(0, b.main_thread());
  return p;
}

}  // namespace mrsession::calc

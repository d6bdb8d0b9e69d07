#include "mrsession/session_type.hpp"

#include <cctype>
#include <set>
#include <utility>

#include "overloaded.hpp"

namespace mrsession {

namespace {

std::shared_ptr<const SessionNode> make_session(auto alt) {
  return std::make_shared<const SessionNode>(SessionNode{std::move(alt)});
}

std::shared_ptr<const SortNode> make_sort(auto alt) {
  return std::make_shared<const SortNode>(SortNode{std::move(alt)});
}

}  // namespace

PayloadSort::PayloadSort() : node_(make_sort(sort::Unit{})) {}

PayloadSort PayloadSort::unit() { return PayloadSort(make_sort(sort::Unit{})); }
PayloadSort PayloadSort::integer() { return PayloadSort(make_sort(sort::Int{})); }
PayloadSort PayloadSort::boolean() { return PayloadSort(make_sort(sort::Bool{})); }
PayloadSort PayloadSort::str() { return PayloadSort(make_sort(sort::Str{})); }
PayloadSort PayloadSort::chan(RoleSet group, SessionType proto) {
  return PayloadSort(make_sort(sort::Chan{group, std::move(proto)}));
}
PayloadSort PayloadSort::tuple(std::vector<PayloadSort> parts) {
  if (parts.size() < 2) {
    throw Error(Errc::PreconditionViolated, "tuple sorts need at least two components");
  }
  return PayloadSort(make_sort(sort::Tuple{std::move(parts)}));
}

bool operator==(const PayloadSort& a, const PayloadSort& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node().v;
  const auto& y = b.node().v;
  if (x.index() != y.index()) return false;
  if (auto* c = std::get_if<sort::Chan>(&x)) {
    const auto& d = std::get<sort::Chan>(y);
    return c->group == d.group && c->proto == d.proto;
  }
  if (auto* t = std::get_if<sort::Tuple>(&x)) {
    return t->parts == std::get<sort::Tuple>(y).parts;
  }
  return true;
}

SessionType::SessionType() : node_(make_session(st::Nil{})) {}

SessionType SessionType::nil() { return SessionType(make_session(st::Nil{})); }
SessionType SessionType::msg(Role from, Role to, PayloadSort sort, SessionType rest) {
  return SessionType(make_session(st::Msg{from, to, std::move(sort), std::move(rest)}));
}
SessionType SessionType::msg(Role from, Role to, SessionType rest) {
  return msg(from, to, PayloadSort::unit(), std::move(rest));
}
SessionType SessionType::choose(Role decider, SessionType left, SessionType right) {
  return SessionType(make_session(st::Choose{decider, std::move(left), std::move(right)}));
}
SessionType SessionType::append(SessionType first, SessionType second) {
  return SessionType(make_session(st::Append{std::move(first), std::move(second)}));
}
SessionType SessionType::repeat(Role decider, SessionType body) {
  return SessionType(make_session(st::Repeat{decider, std::move(body)}));
}

bool SessionType::is_nil() const noexcept { return std::holds_alternative<st::Nil>(node_->v); }

bool operator==(const SessionType& a, const SessionType& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node().v;
  const auto& y = b.node().v;
  if (x.index() != y.index()) return false;
  return std::visit(
      overloaded{
          [](const st::Nil&) { return true; },
          [&](const st::Msg& m) {
            const auto& n = std::get<st::Msg>(y);
            return m.from == n.from && m.to == n.to && m.sort == n.sort && m.rest == n.rest;
          },
          [&](const st::Choose& m) {
            const auto& n = std::get<st::Choose>(y);
            return m.decider == n.decider && m.left == n.left && m.right == n.right;
          },
          [&](const st::Append& m) {
            const auto& n = std::get<st::Append>(y);
            return m.first == n.first && m.second == n.second;
          },
          [&](const st::Repeat& m) {
            const auto& n = std::get<st::Repeat>(y);
            return m.decider == n.decider && m.body == n.body;
          },
      },
      x);
}

std::string_view to_string(MsgAction a) noexcept {
  switch (a) {
    case MsgAction::Internal: return "Internal";
    case MsgAction::SendTo: return "SendTo";
    case MsgAction::RecvFrom: return "RecvFrom";
    case MsgAction::External: return "External";
  }
  return "?";
}

MsgAction classify(const Group& g, Role from, Role to) {
  const RoleUniverse u = g.universe();
  if (!u.contains(from) || !u.contains(to)) {
    throw Error(Errc::RoleOutOfRange, "msg(" + std::to_string(from) + "," + std::to_string(to) +
                                          ") outside nrole=" + std::to_string(u.nrole()));
  }
  if (from == to) {
    throw Error(Errc::SelfMessage, "msg(" + std::to_string(from) + "," + std::to_string(to) + ")");
  }
  const bool fi = g.contains(from);
  const bool ti = g.contains(to);
  if (fi && ti) return MsgAction::Internal;
  if (fi) return MsgAction::SendTo;
  if (ti) return MsgAction::RecvFrom;
  return MsgAction::External;
}

namespace {

// Session types may share subterms, so both walks visit each node once.
struct WellFormed {
  RoleUniverse u;
  std::set<const SessionNode*> seen;

  bool sort(const PayloadSort& s) {
    return std::visit(overloaded{
                          [&](const sort::Chan& c) {
                            // The carried channel lives in its own session, but we
                            // require its roles to fit the ambient universe too.
                            return c.group.bound() <= u.nrole() && session(c.proto);
                          },
                          [&](const sort::Tuple& t) {
                            for (const auto& p : t.parts) {
                              if (!sort(p)) return false;
                            }
                            return true;
                          },
                          [](const auto&) { return true; },
                      },
                      s.node().v);
  }

  bool session(const SessionType& s) {
    if (!seen.insert(&s.node()).second) return true;
    return std::visit(overloaded{
                          [](const st::Nil&) { return true; },
                          [&](const st::Msg& m) {
                            return u.contains(m.from) && u.contains(m.to) && m.from != m.to &&
                                   sort(m.sort) && session(m.rest);
                          },
                          [&](const st::Choose& c) {
                            return u.contains(c.decider) && session(c.left) && session(c.right);
                          },
                          [&](const st::Append& a) { return session(a.first) && session(a.second); },
                          [&](const st::Repeat& r) { return u.contains(r.decider) && session(r.body); },
                      },
                      s.node().v);
  }
};

bool has_repeat(const SessionType& s, std::set<const SessionNode*>& seen) {
  if (!seen.insert(&s.node()).second) return false;
  return std::visit(overloaded{
                        [](const st::Nil&) { return false; },
                        [&](const st::Msg& m) { return has_repeat(m.rest, seen); },
                        [&](const st::Choose& c) { return has_repeat(c.left, seen) || has_repeat(c.right, seen); },
                        [&](const st::Append& a) { return has_repeat(a.first, seen) || has_repeat(a.second, seen); },
                        [](const st::Repeat&) { return true; },
                    },
                    s.node().v);
}

}  // namespace

bool well_formed(const PayloadSort& s, RoleUniverse u) { return WellFormed{u, {}}.sort(s); }

bool well_formed(const SessionType& s, RoleUniverse u) { return WellFormed{u, {}}.session(s); }

bool contains_repeat(const SessionType& s) {
  std::set<const SessionNode*> seen;
  return has_repeat(s, seen);
}

SessionType unfold(const SessionType& s) {
  if (auto* r = std::get_if<st::Repeat>(&s.node().v)) {
    return SessionType::choose(r->decider, SessionType::nil(), SessionType::append(r->body, s));
  }
  auto* a = std::get_if<st::Append>(&s.node().v);
  if (!a) return s;
  const SessionType& tail = a->second;
  return std::visit(
      overloaded{
          [&](const st::Nil&) { return tail; },
          [&](const st::Msg& m) {
            return SessionType::msg(m.from, m.to, m.sort, SessionType::append(m.rest, tail));
          },
          [&](const st::Choose& c) {
            return SessionType::choose(c.decider, SessionType::append(c.left, tail),
                                       SessionType::append(c.right, tail));
          },
          [&](const st::Append& inner) {
            return SessionType::append(inner.first, SessionType::append(inner.second, tail));
          },
          [&](const st::Repeat&) { return SessionType::append(unfold(a->first), tail); },
      },
      a->first.node().v);
}

SessionType normalize_head(const SessionType& s) {
  SessionType cur = s;
  while (std::holds_alternative<st::Append>(cur.node().v) ||
         std::holds_alternative<st::Repeat>(cur.node().v)) {
    cur = unfold(cur);
  }
  return cur;
}

HeadAction head_action(const Group& g, const SessionType& s) {
  SessionType n = normalize_head(s);
  return std::visit(
      overloaded{
          [](const st::Nil&) -> HeadAction { return head::Close{}; },
          [&](const st::Msg& m) -> HeadAction {
            switch (classify(g, m.from, m.to)) {
              case MsgAction::SendTo: return head::Send{m.from, m.to, m.sort, m.rest};
              case MsgAction::RecvFrom: return head::Recv{m.from, m.to, m.sort, m.rest};
              case MsgAction::Internal: return head::Skip{m.from, m.to, m.sort, m.rest, true};
              case MsgAction::External: return head::Skip{m.from, m.to, m.sort, m.rest, false};
            }
            return head::Close{};
          },
          [&](const st::Choose& c) -> HeadAction {
            if (!g.universe().contains(c.decider)) {
              throw Error(Errc::RoleOutOfRange, "choose decider " + std::to_string(c.decider));
            }
            if (g.contains(c.decider)) return head::ChooseSend{c.decider, c.left, c.right};
            return head::ChooseRecv{c.decider, c.left, c.right};
          },
          [](const auto&) -> HeadAction { return head::Close{}; },
      },
      n.node().v);
}

std::string describe(const HeadAction& h) {
  auto msg = [](const char* kind, Role f, Role t, const PayloadSort& s) {
    return std::string(kind) + "(" + std::to_string(f) + "," + std::to_string(t) + "," +
           format_sort(s) + ")";
  };
  return std::visit(overloaded{
                        [](const head::Close&) { return std::string("close"); },
                        [&](const head::Send& x) { return msg("send", x.from, x.to, x.sort); },
                        [&](const head::Recv& x) { return msg("recv", x.from, x.to, x.sort); },
                        [&](const head::Skip& x) {
                          return msg(x.internal ? "skip-internal" : "skip-external", x.from,
                                     x.to, x.sort);
                        },
                        [](const head::ChooseSend& x) {
                          return "choose-send(" + std::to_string(x.decider) + ")";
                        },
                        [](const head::ChooseRecv& x) {
                          return "choose-recv(" + std::to_string(x.decider) + ")";
                        },
                    },
                    h);
}

namespace {

class Bisim {
 public:
  bool sessions(const SessionType& a, const SessionType& b) {
    if (a.same_node(b)) return true;
    if (!contains_repeat(a) && !contains_repeat(b) && a == b) return true;
    std::string key = format_session(a) + "|" + format_session(b);
    if (!assumed_.insert(std::move(key)).second) return true;
    if (assumed_.size() > kBudget) {
      throw Error(Errc::PreconditionViolated, "session equivalence exceeded state budget");
    }
    SessionType x = normalize_head(a);
    SessionType y = normalize_head(b);
    if (x.node().v.index() != y.node().v.index()) return false;
    if (x.is_nil()) return true;
    if (auto* m = std::get_if<st::Msg>(&x.node().v)) {
      const auto& n = std::get<st::Msg>(y.node().v);
      return m->from == n.from && m->to == n.to && sorts(m->sort, n.sort) &&
             sessions(m->rest, n.rest);
    }
    const auto& c = std::get<st::Choose>(x.node().v);
    const auto& d = std::get<st::Choose>(y.node().v);
    return c.decider == d.decider && sessions(c.left, d.left) && sessions(c.right, d.right);
  }

  bool sorts(const PayloadSort& a, const PayloadSort& b) {
    const auto& x = a.node().v;
    const auto& y = b.node().v;
    if (x.index() != y.index()) return false;
    if (auto* c = std::get_if<sort::Chan>(&x)) {
      const auto& d = std::get<sort::Chan>(y);
      return c->group == d.group && Bisim{}.sessions(c->proto, d.proto);
    }
    if (auto* t = std::get_if<sort::Tuple>(&x)) {
      const auto& u = std::get<sort::Tuple>(y);
      if (t->parts.size() != u.parts.size()) return false;
      for (std::size_t i = 0; i < t->parts.size(); ++i) {
        if (!sorts(t->parts[i], u.parts[i])) return false;
      }
    }
    return true;
  }

 private:
  static constexpr std::size_t kBudget = 200000;
  std::set<std::string> assumed_;
};

}  // namespace

bool equivalent(const SessionType& a, const SessionType& b) { return Bisim{}.sessions(a, b); }

SessionType choose_labeled(Role decider, const std::vector<SessionType>& branches) {
  if (branches.empty()) {
    throw Error(Errc::PreconditionViolated, "labeled choice needs at least one branch");
  }
  SessionType acc = branches.back();
  for (std::size_t k = branches.size() - 1; k-- > 0;) {
    acc = SessionType::choose(decider, branches[k], acc);
  }
  return acc;
}

std::vector<bool> label_path(std::size_t label, std::size_t count) {
  if (label >= count) {
    throw Error(Errc::PreconditionViolated,
                "label " + std::to_string(label) + " of " + std::to_string(count));
  }
  std::vector<bool> path(label, true);
  if (label + 1 < count) path.push_back(false);
  return path;
}

std::string format_sort(const PayloadSort& s) {
  return std::visit(overloaded{
                        [](const sort::Unit&) { return std::string("unit"); },
                        [](const sort::Int&) { return std::string("int"); },
                        [](const sort::Bool&) { return std::string("bool"); },
                        [](const sort::Str&) { return std::string("str"); },
                        [](const sort::Chan& c) {
                          return "chan(" + format_role_set(c.group) + "," +
                                 format_session(c.proto) + ")";
                        },
                        [](const sort::Tuple& t) {
                          std::string out = "(";
                          for (std::size_t i = 0; i < t.parts.size(); ++i) {
                            if (i) out += ',';
                            out += format_sort(t.parts[i]);
                          }
                          return out + ")";
                        },
                    },
                    s.node().v);
}

std::string format_session(const SessionType& s) {
  std::string out;
  const SessionType* cur = &s;
  // Msg chains are the common deep case; iterate instead of recursing on them.
  while (auto* m = std::get_if<st::Msg>(&cur->node().v)) {
    out += "msg(" + std::to_string(m->from) + "," + std::to_string(m->to) + "," +
           format_sort(m->sort) + "):";
    cur = &m->rest;
  }
  out += std::visit(overloaded{
                        [](const st::Nil&) { return std::string("nil"); },
                        [](const st::Msg&) { return std::string(); },
                        [](const st::Choose& c) {
                          return "choose(" + std::to_string(c.decider) + "," +
                                 format_session(c.left) + "," + format_session(c.right) + ")";
                        },
                        [](const st::Append& a) {
                          return "append(" + format_session(a.first) + "," +
                                 format_session(a.second) + ")";
                        },
                        [](const st::Repeat& r) {
                          return "repeat(" + std::to_string(r.decider) + "," +
                                 format_session(r.body) + ")";
                        },
                    },
                    cur->node().v);
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : t_(text) {}

  SessionType session() {
    ws();
    std::size_t at = pos_;
    std::string kw = word();
    if (kw == "nil") return SessionType::nil();
    if (kw == "msg") {
      expect('(');
      Role from = role();
      expect(',');
      Role to = role();
      PayloadSort s = PayloadSort::unit();
      if (peek(',')) {
        expect(',');
        s = sort();
      }
      expect(')');
      ws();
      if (!peek(':')) fail(pos_, "expected ':' after msg(...)");
      ++pos_;
      if (peek(':')) ++pos_;
      return SessionType::msg(from, to, std::move(s), session());
    }
    if (kw == "choose") {
      expect('(');
      Role d = role();
      expect(',');
      SessionType l = session();
      expect(',');
      SessionType r = session();
      expect(')');
      return SessionType::choose(d, std::move(l), std::move(r));
    }
    if (kw == "append") {
      expect('(');
      SessionType a = session();
      expect(',');
      SessionType b = session();
      expect(')');
      return SessionType::append(std::move(a), std::move(b));
    }
    if (kw == "repeat") {
      expect('(');
      Role d = role();
      expect(',');
      SessionType b = session();
      expect(')');
      return SessionType::repeat(d, std::move(b));
    }
    fail(at, kw.empty() ? "expected session type" : "unknown session constructor '" + kw + "'");
  }

  PayloadSort sort() {
    ws();
    std::size_t at = pos_;
    if (peek('(')) {
      ++pos_;
      std::vector<PayloadSort> parts{sort()};
      while (peek(',')) {
        ++pos_;
        parts.push_back(sort());
      }
      expect(')');
      if (parts.size() < 2) fail(at, "tuple sort needs at least two components");
      return PayloadSort::tuple(std::move(parts));
    }
    std::string kw = word();
    if (kw == "unit") return PayloadSort::unit();
    if (kw == "int") return PayloadSort::integer();
    if (kw == "bool") return PayloadSort::boolean();
    if (kw == "str") return PayloadSort::str();
    if (kw == "chan") {
      expect('(');
      ws();
      RoleSet g = parse_role_set(t_, pos_);
      expect(',');
      SessionType p = session();
      expect(')');
      return PayloadSort::chan(g, std::move(p));
    }
    fail(at, kw.empty() ? "expected payload sort" : "unknown sort '" + kw + "'");
  }

  void finish() {
    ws();
    if (pos_ != t_.size()) fail(pos_, "trailing input");
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& msg) { throw SyntaxError(at, msg); }

  void ws() {
    while (pos_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    ws();
    return pos_ < t_.size() && t_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(pos_, std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string word() {
    ws();
    std::size_t start = pos_;
    while (pos_ < t_.size() && std::isalpha(static_cast<unsigned char>(t_[pos_]))) ++pos_;
    return std::string(t_.substr(start, pos_ - start));
  }

  Role role() {
    ws();
    std::size_t start = pos_;
    long value = 0;
    while (pos_ < t_.size() && std::isdigit(static_cast<unsigned char>(t_[pos_]))) {
      value = value * 10 + (t_[pos_] - '0');
      if (value >= RoleUniverse::kMaxRoles) fail(start, "role index too large");
      ++pos_;
    }
    if (pos_ == start) fail(pos_, "expected role index");
    return static_cast<Role>(value);
  }

  std::string_view t_;
  std::size_t pos_ = 0;
};

}  // namespace

SessionType parse_session(std::string_view text) {
  Parser p(text);
  SessionType s = p.session();
  p.finish();
  return s;
}

PayloadSort parse_sort(std::string_view text) {
  Parser p(text);
  PayloadSort s = p.sort();
  p.finish();
  return s;
}

}  // namespace mrsession

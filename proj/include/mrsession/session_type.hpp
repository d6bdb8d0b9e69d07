#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mrsession/roles.hpp"

namespace mrsession {

struct SortNode;
struct SessionNode;
class SessionType;

/// The sort of a message payload: unit | int | bool | str | chan(G,S) | tuple.
class PayloadSort {
 public:
  PayloadSort();  // unit

  static PayloadSort unit();
  static PayloadSort integer();
  static PayloadSort boolean();
  static PayloadSort str();
  static PayloadSort chan(RoleSet group, SessionType proto);
  static PayloadSort tuple(std::vector<PayloadSort> parts);

  const SortNode& node() const noexcept { return *node_; }

  friend bool operator==(const PayloadSort& a, const PayloadSort& b);

 private:
  explicit PayloadSort(std::shared_ptr<const SortNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const SortNode> node_;
};

/// S ::= nil | msg(i,j,T):S | choose(i,S0,S1) | append(S0,S1) | repeat(i,S)
class SessionType {
 public:
  SessionType();  // nil

  static SessionType nil();
  static SessionType msg(Role from, Role to, PayloadSort sort, SessionType rest);
  static SessionType msg(Role from, Role to, SessionType rest);
  static SessionType choose(Role decider, SessionType left, SessionType right);
  static SessionType append(SessionType first, SessionType second);
  static SessionType repeat(Role decider, SessionType body);

  const SessionNode& node() const noexcept { return *node_; }
  bool same_node(const SessionType& o) const noexcept { return node_ == o.node_; }

  bool is_nil() const noexcept;

  /// Structural equality.
  friend bool operator==(const SessionType& a, const SessionType& b);

 private:
  explicit SessionType(std::shared_ptr<const SessionNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const SessionNode> node_;
};

namespace sort {
struct Unit {};
struct Int {};
struct Bool {};
struct Str {};
struct Chan {
  RoleSet group;
  SessionType proto;
};
struct Tuple {
  std::vector<PayloadSort> parts;
};
}  // namespace sort

struct SortNode {
  std::variant<sort::Unit, sort::Int, sort::Bool, sort::Str, sort::Chan, sort::Tuple> v;
};

namespace st {
struct Nil {};
struct Msg {
  Role from;
  Role to;
  PayloadSort sort;
  SessionType rest;
};
struct Choose {
  Role decider;
  SessionType left;
  SessionType right;
};
struct Append {
  SessionType first;
  SessionType second;
};
struct Repeat {
  Role decider;
  SessionType body;
};
}  // namespace st

struct SessionNode {
  std::variant<st::Nil, st::Msg, st::Choose, st::Append, st::Repeat> v;
};

/// How a party implementing a group interprets msg(i,j).
enum class MsgAction { Internal, SendTo, RecvFrom, External };

std::string_view to_string(MsgAction a) noexcept;

MsgAction classify(const Group& g, Role from, Role to);

bool well_formed(const SessionType& s, RoleUniverse u);
bool well_formed(const PayloadSort& sort, RoleUniverse u);
bool contains_repeat(const SessionType& s);

/// One-step head normalization of repeat/append.
SessionType unfold(const SessionType& s);
/// Unfolds until the head is nil, msg or choose.
SessionType normalize_head(const SessionType& s);

namespace head {
struct Close {};
struct Send {
  Role from;
  Role to;
  PayloadSort sort;
  SessionType cont;
};
struct Recv {
  Role from;
  Role to;
  PayloadSort sort;
  SessionType cont;
};
struct Skip {
  Role from;
  Role to;
  PayloadSort sort;
  SessionType cont;
  bool internal;
};
struct ChooseSend {
  Role decider;
  SessionType left;
  SessionType right;
};
struct ChooseRecv {
  Role decider;
  SessionType left;
  SessionType right;
};
}  // namespace head

using HeadAction = std::variant<head::Close, head::Send, head::Recv, head::Skip,
                                head::ChooseSend, head::ChooseRecv>;

HeadAction head_action(const Group& g, const SessionType& s);
std::string describe(const HeadAction& h);

/// Observational equality: same head actions forever (coinductive, so
/// repeat-unfoldings compare equal to their source).
bool equivalent(const SessionType& a, const SessionType& b);

/// n-ary labeled choice as right-nested binary choose. Label k of n selects
/// k right-turns followed by one left-turn, except the last label which is
/// n-1 right-turns.
SessionType choose_labeled(Role decider, const std::vector<SessionType>& branches);
std::vector<bool> label_path(std::size_t label, std::size_t count);  // true = right

std::string format_session(const SessionType& s);
std::string format_sort(const PayloadSort& s);
SessionType parse_session(std::string_view text);
PayloadSort parse_sort(std::string_view text);

}  // namespace mrsession

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mrsession/df_analysis.hpp"
#include "mrsession/session_type.hpp"

namespace mrsession::calc {

struct TypeNode;

enum class ArrowKind { Intuitionistic, Linear };

/// T̂ ::= bool | int | int(n) | str | 1 | chan(G,S) | T*T | T̂⊗T̂ | T̂ →ᵢ T̂ | T̂ →ₗ T̂
class Viewtype {
 public:
  Viewtype();  // 1

  static Viewtype boolean();
  static Viewtype integer();
  static Viewtype int_exact(std::int64_t n);
  static Viewtype str();
  static Viewtype unit();
  static Viewtype chan(RoleSet group, SessionType proto);
  static Viewtype prod(Viewtype a, Viewtype b);
  static Viewtype tensor(Viewtype a, Viewtype b);
  static Viewtype arrow(ArrowKind k, Viewtype a, Viewtype b);

  const TypeNode& node() const noexcept { return *node_; }

  /// True viewtypes (not types): chan, ⊗ and →ₗ.
  bool is_linear() const;

  /// Structural equality; chan sessions compare by `equivalent`.
  friend bool operator==(const Viewtype& a, const Viewtype& b);

 private:
  explicit Viewtype(std::shared_ptr<const TypeNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const TypeNode> node_;
};

namespace ty {
struct Bool {};
struct Int {};
struct IntExact {
  std::int64_t n;
};
struct Str {};
struct Unit {};
struct Chan {
  RoleSet group;
  SessionType proto;
};
struct Prod {
  Viewtype a, b;
};
struct Tensor {
  Viewtype a, b;
};
struct Arrow {
  ArrowKind kind;
  Viewtype param, result;
};
}  // namespace ty

struct TypeNode {
  std::variant<ty::Bool, ty::Int, ty::IntExact, ty::Str, ty::Unit, ty::Chan, ty::Prod,
               ty::Tensor, ty::Arrow>
      v;
};

/// int(n) <: int, T*U <: T⊗U, →ᵢ <: →ₗ, with the usual variance.
bool subtype(const Viewtype& sub, const Viewtype& super);
/// Least common supertype where one exists.
std::optional<Viewtype> join(const Viewtype& a, const Viewtype& b);

/// The calculus viewtype carried by a message payload sort. Tuples of three
/// or more nest to the right.
Viewtype sort_viewtype(const PayloadSort& s);

/// Built-in constants. chan2_create is the deliberately unsafe one.
enum class PrimOp {
  IAdd,
  RandBit,
  ThreadCreate,
  ChanCreate,
  Chan2Create,
  Send,
  Recv,
  Skip,
  Close,
};

std::string_view prim_name(PrimOp op) noexcept;
std::size_t prim_arity(PrimOp op) noexcept;

struct ExprNode;

class Expr {
 public:
  const ExprNode& node() const noexcept { return *node_; }
  bool same_node(const Expr& o) const noexcept { return node_ == o.node_; }

  static Expr var(std::string name);
  static Expr fix_var(std::string name);
  static Expr res(ChannelHalf h);
  static Expr integer(std::int64_t n);
  static Expr boolean(bool b);
  static Expr str(std::string s);
  static Expr unit();
  static Expr pair(Expr a, Expr b);
  static Expr fst(Expr e);
  static Expr snd(Expr e);
  static Expr let_pair(std::string x1, std::string x2, Expr bound, Expr body);
  static Expr lam(std::string x, Viewtype param, std::optional<ArrowKind> kind, Expr body);
  static Expr app(Expr f, Expr a);
  static Expr fix(std::string f, Viewtype ann, Expr body);
  static Expr if_(Expr c, Expr t, Expr e);
  static Expr prim(PrimOp op, std::vector<Expr> args);

  /// `let x:T = bound in body`, i.e. app(lam x:T. body, bound).
  static Expr let(std::string x, Viewtype t, Expr bound, Expr body);

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const ExprNode> node_;
};

namespace ex {
struct Var {
  std::string name;
  bool fix;  // bound by fix: not a value
};
struct Res {
  ChannelHalf half;
};
struct Int {
  std::int64_t value;
};
struct Bool {
  bool value;
};
struct Str {
  std::string value;
};
struct Unit {};
struct Pair {
  Expr a, b;
};
struct Fst {
  Expr e;
};
struct Snd {
  Expr e;
};
struct LetPair {
  std::string x1, x2;
  Expr bound, body;
};
struct Lam {
  std::string x;
  Viewtype param;
  std::optional<ArrowKind> kind;
  Expr body;
};
struct App {
  Expr f, a;
};
struct Fix {
  std::string f;
  Viewtype ann;
  Expr body;
};
struct If {
  Expr c, t, e;
};
struct Prim {
  PrimOp op;
  std::vector<Expr> args;
};
}  // namespace ex

struct ExprNode {
  std::variant<ex::Var, ex::Res, ex::Int, ex::Bool, ex::Str, ex::Unit, ex::Pair, ex::Fst, ex::Snd,
               ex::LetPair, ex::Lam, ex::App, ex::Fix, ex::If, ex::Prim>
      v;
};

bool is_value(const Expr& e);

/// ρ(e): the multiset of resource constants, per the structural definition
/// (an if counts its condition and its first branch only). Sorted.
std::vector<ChannelHalf> rho(const Expr& e);

/// Free lam- and fix-variables.
std::vector<std::string> free_vars(const Expr& e);

/// e[x ↦ v]. v must be closed, so no capture can happen.
Expr substitute(const Expr& e, const std::string& x, const Expr& v);

/// Thread pool plus the channel signature Σ assigning chan types to the
/// resource constants currently alive.
struct Pool {
  RoleUniverse universe;
  std::map<std::uint64_t, Expr> threads;
  std::map<ChannelHalf, Viewtype> sigma;
  std::uint64_t next_tid = 1;
  std::uint64_t next_chan = 1;

  ChannelSetCollection snapshot() const;
};

/// ℛ_CH of one expression: its channel halves, sorted.
ChannelSet rho_ch(const Expr& e);

}  // namespace mrsession::calc

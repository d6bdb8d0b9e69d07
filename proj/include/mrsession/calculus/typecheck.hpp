#pragma once

#include <map>
#include <string>

#include "mrsession/calculus/syntax.hpp"

namespace mrsession::calc {

struct CheckOptions {
  RoleUniverse universe;
  /// Types of the resource constants; may be null for channel-free terms.
  const std::map<ChannelHalf, Viewtype>* sigma = nullptr;
  /// Admit chan2_create.
  bool allow_unsafe = false;
};

/// Γ;Δ. Variables with a true viewtype belong in delta.
struct TypeEnv {
  std::map<std::string, Viewtype> gamma;
  std::map<std::string, Viewtype> delta;
};

struct Typed {
  Viewtype type;
  /// Linear bindings the expression did not consume.
  std::map<std::string, Viewtype> leftover;
};

/// Leftover-context checking: delta flows in, the unconsumed part flows out.
/// Throws Error(TypeError) on rejection.
Typed typecheck(const TypeEnv& env, const Expr& e, const CheckOptions& opts);

/// Closed term with nothing left over.
Viewtype typecheck_closed(const Expr& e, const CheckOptions& opts);

/// ⊢ Π : T̂, plus the resource discipline: every alive half is typed by Σ,
/// occurs at most once, and its dual is alive with a matching type.
Viewtype typecheck_pool(const Pool& p, bool allow_unsafe = false);

/// A closed value at a non-linear type holds no resources. Linear-typed
/// values are outside the claim and report true.
bool check_value_purity(const Expr& v, const CheckOptions& opts);

/// The value's shape is the one its viewtype dictates.
bool canonical_form(const Expr& v, const Viewtype& t);

/// Rejects ill-formed chan annotations (group not proper, bad session).
void validate_viewtype(const Viewtype& t, RoleUniverse u);

}  // namespace mrsession::calc

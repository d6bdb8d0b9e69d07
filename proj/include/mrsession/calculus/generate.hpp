#pragma once

#include <random>

#include "mrsession/calculus/syntax.hpp"

namespace mrsession::calc {

/// Knobs for the type-directed program generator.
struct GenOptions {
  int nrole = 3;
  int protocol_depth = 4;
  int max_channels = 3;
  int delegation_depth = 2;
  bool threads = true;
  bool branches = true;
  bool loops = true;
};

/// msg/append/nil sessions (the calculus has no choice primitives); payload
/// sorts may carry channels up to `chan_depth` levels deep.
SessionType random_protocol(std::mt19937_64& rng, RoleUniverse u, int depth, int chan_depth);

/// A random type with no linear component.
Viewtype random_plain_type(std::mt19937_64& rng, int depth);

/// A closed value of a non-linear type.
Expr random_value(std::mt19937_64& rng, const Viewtype& t);

/// An open term of type 1 that drives `var : chan(g,s)` to completion.
Expr random_driver(std::mt19937_64& rng, const std::string& var, const Group& g,
                   const SessionType& s, const GenOptions& opts);

/// A well-typed pool with a single, channel-free main thread of type 1.
Pool random_pool(std::mt19937_64& rng, const GenOptions& opts);

}  // namespace mrsession::calc

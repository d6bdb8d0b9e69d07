#pragma once

#include "mrsession/calculus/syntax.hpp"

namespace mrsession::calc {

/// The two-buyer session with the success branch fixed (the calculus has no
/// choice primitives): S0=0, B1=1, B2=2.
SessionType two_buyer_success_session();

/// B2 opens dyadic channels to S0 and B1 and joins them with an unrolled
/// chan3_link thread; main returns the receipt string.
Pool two_buyer_pool(const std::string& title, std::int64_t price, std::int64_t contribution);

/// An unrolled chan3_link over variables e0 : chan(G0,S), e1 : chan(G1,S),
/// e2 : chan(Ḡ0 ∪ Ḡ1, S). S must be free of choice.
Expr chan3_link_unrolled(const std::string& e0, const std::string& e1, const std::string& e2,
                         const Group& g0, const Group& g1, const SessionType& s);

/// chan2_create hands both positive halves to one new thread, which waits on
/// the second while main sends it over the first. Needs the unsafe flag.
Pool chan2_deadlock_pool();

/// The same exchange built from two chan_create calls; runs to completion.
Pool chan2_control_pool();

/// Built-in pools used by `fuzz` and the samples.
std::vector<std::pair<std::string, Pool>> builtin_pools();

}  // namespace mrsession::calc

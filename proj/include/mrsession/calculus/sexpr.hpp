#pragma once

#include <string>
#include <string_view>

#include "mrsession/calculus/syntax.hpp"

namespace mrsession::calc {

std::string format_type(const Viewtype& t);
std::string format_expr(const Expr& e);
/// Whole pool, including nrole and Σ entries, in the file syntax.
std::string format_pool(const Pool& p);

Viewtype parse_type(std::string_view text);
Expr parse_expr(std::string_view text);
Pool parse_pool(std::string_view text);

}  // namespace mrsession::calc

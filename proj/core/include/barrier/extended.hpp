#pragma once

// Quad-precision evaluation, for points whose coordinates or values do not
// survive rounding to double (e.g. roots of e^x sin x far out on the x axis).

#include "barrier/expr.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <span>

namespace barrier {

using Extended = boost::multiprecision::cpp_bin_float_quad;
using ExtendedDual = expr::BasicDual<Extended>;

Extended eval_extended(const expr::Expression& e, std::span<const Extended> values);
ExtendedDual eval_dual_extended(const expr::Expression& e, std::span<const ExtendedDual> values);

} // namespace barrier

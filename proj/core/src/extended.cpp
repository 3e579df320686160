#include "barrier/extended.hpp"

#include "program.hpp"

namespace barrier {

Extended eval_extended(const expr::Expression& e, std::span<const Extended> values) {
    if (values.size() < e.variables().size()) throw Error("too few values for expression variables");
    return expr::run_scalar<Extended>(e.program(), values.data());
}

ExtendedDual eval_dual_extended(const expr::Expression& e, std::span<const ExtendedDual> values) {
    if (values.size() < e.variables().size()) throw Error("too few values for expression variables");
    return expr::run_dual<Extended>(e.program(), values.data());
}

} // namespace barrier

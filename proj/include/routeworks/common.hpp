#pragma once

#include <stdexcept>

namespace routeworks {

// Thrown when a caller breaks an operation's stated precondition.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace routeworks

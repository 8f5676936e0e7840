#pragma once

#include <string>
#include <vector>

#include "pipeslice/ir.hpp"

namespace pipeslice {

struct Diagnostic {
  std::string entity;   // function, global or variable the issue is about
  std::string message;

  std::string str() const { return entity + ": " + message; }
};

// Structural and kind checking. Empty result means the program satisfies
// all IR invariants (names resolve, calls match signatures, labels exist,
// one exit block per function, pure functions do not write non-local
// storage).
std::vector<Diagnostic> validate(const Program& p);

// Convenience: throws std::runtime_error listing diagnostics if any.
void validate_or_throw(const Program& p);

}  // namespace pipeslice

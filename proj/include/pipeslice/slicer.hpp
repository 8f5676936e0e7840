#pragma once

#include <set>
#include <string>
#include <vector>

#include "pipeslice/cfg.hpp"
#include "pipeslice/ir.hpp"
#include "pipeslice/pdg.hpp"

namespace pipeslice {

// Backward static slicing of one function body: criteria are its
// externally visible outputs; slices are backward data closures with an
// induction-variable stopping rule, widened by the control skeletons of
// every construct that contains a slice instruction.

struct Criterion {
  enum class Kind { OutParam, Global, Return } kind = Kind::Global;
  std::string location;          // param name, global name, or "ret"
  std::vector<InstrId> seeds;    // instructions that last write it
};

struct ControlTable {
  // one entry per loop/if construct: branch id -> skeleton instrs
  std::vector<std::pair<InstrId, std::vector<InstrId>>> entries;
};

struct Slice {
  Criterion criterion;
  std::set<InstrId> instrs;            // data closure from the seeds
  std::set<InstrId> control_skeleton;  // added construct skeletons
  std::vector<std::string> params_used;  // subset of f params, param order
  bool returns_value = false;

  std::set<InstrId> full_set() const;  // instrs + skeleton
};

// Outputs in deterministic order: written out-params (param order), then
// written globals (declaration order), then the return value. Throws
// "nothing to slice" when the function has no outputs and
// "non-pure call disqualifies slicing" when a non-pure callee appears.
std::vector<Criterion> collect_criteria(const Program& p, const Function& f);

// Backward closure over data edges, visiting each node once; traversal
// stops at loop-induction updates (they are added but their inputs are
// not followed).
Slice compute_slice(const Pdg& g, const Function& f, const Criterion& c);

ControlTable build_control_table(const Function& f);

// Adds the skeleton of every construct containing a slice instruction and
// re-closes over data dependences; idempotent.
Slice attach_control(Slice s, const ControlTable& t, const Function& f,
                     const Pdg& g);

// Drops slices whose instr+skeleton set is contained in another's; for
// equal sets the first survives. Order stable.
std::vector<Slice> filter_redundant(std::vector<Slice> ss);

// New function with exactly the retained instructions in original
// relative order and only the parameters the slice uses. Value-returning
// slices keep the original return.
Function materialize(const Function& f, const Slice& s,
                     const std::string& name);

// Convenience pipeline: criteria -> slices -> attach -> filter.
std::vector<Slice> slice_function(const Program& p, const Function& f);

}  // namespace pipeslice

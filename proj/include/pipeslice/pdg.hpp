#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pipeslice/cfg.hpp"
#include "pipeslice/ir.hpp"

namespace pipeslice {

// Program dependence graph over one function body or one loop region.
//
// Data edges are def-use pairs from reaching definitions (exact for
// scalars); array and node-field accesses depend conservatively by
// location name (any store reaches any later access of the same name).
// Calls to non-pure functions additionally touch every global array and a
// distinguished "$world" location, ordering them against each other.
// Control edges run from each conditional branch to the instructions it
// controls (structural: the innermost enclosing loop or if construct).

struct PdgEdge {
  InstrId src = kNoInstr;
  InstrId dst = kNoInstr;
  enum class Kind { Data, Control } kind = Kind::Data;
  std::string loc;      // variable or location name (data edges)
  bool carried = false; // crosses the region's back edge (loop regions only)

  bool operator==(const PdgEdge& o) const = default;
};

struct Pdg {
  std::string function;
  std::optional<LoopInfo> loop;  // region; nullopt = whole function
  std::vector<InstrId> nodes;    // ascending
  std::vector<PdgEdge> edges;

  bool has_node(InstrId id) const;
  std::vector<InstrId> preds_of(InstrId id) const;  // dependence sources
};

// region = whole function
Pdg build_pdg(const Program& p, const Function& f);
// region = one natural loop of f
Pdg build_pdg(const Program& p, const Function& f, const LoopInfo& loop);

// true iff a transitively depends on b (b reachable from a over reversed
// data+control edges); reflexive by definition.
bool depends_on(const Pdg& g, InstrId a, InstrId b);

// DOT digraph; data edges solid, control edges dashed, loop-carried edges
// annotated.
std::string export_dot(const Pdg& g, const Function& f);

// JSON dump with stable field names: src, dst, kind, carried, loc.
std::string export_json(const Pdg& g);

}  // namespace pipeslice

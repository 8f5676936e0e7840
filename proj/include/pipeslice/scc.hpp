#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pipeslice/pdg.hpp"

namespace pipeslice {

using SccId = int;

struct Scc {
  SccId id = -1;
  std::vector<InstrId> members;  // ascending
  int64_t latency = 0;           // summed static cost (build_dagscc)
  bool contains_call = false;
  bool carries_recurrence = false;  // has a loop-carried data edge inside
};

struct DagScc {
  std::vector<Scc> components;
  std::vector<std::pair<SccId, SccId>> edges;  // deduplicated, src != dst
  std::vector<SccId> topo_order;               // valid topological sort

  SccId component_of(InstrId instr) const;
};

// Maximal SCCs over data+control edges, Tarjan low-link, deterministic:
// nodes visited in ascending id, components listed in topological order
// (ties resolved by the construction), members ascending.
std::vector<Scc> compute_sccs(const Pdg& g);

// Condensation DAG; per-instruction latency and call detection supplied by
// the caller (see cost.hpp for the standard model).
DagScc build_dagscc(const Pdg& g, std::vector<Scc> sccs,
                    const std::function<int64_t(InstrId)>& instr_latency,
                    const std::function<bool(InstrId)>& instr_is_call = {});

// Generic helpers used by the oracle tests as well.
std::vector<std::vector<int>> scc_partition(
    int n, const std::vector<std::pair<int, int>>& edges);

std::string export_dot(const DagScc& d);
std::string export_json(const DagScc& d);

}  // namespace pipeslice

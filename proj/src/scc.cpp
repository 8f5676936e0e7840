#include "pipeslice/scc.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace pipeslice {

namespace {

// iterative Tarjan; emits components in reverse topological order
struct Tarjan {
  const std::vector<std::vector<int>>& adj;
  int n;
  std::vector<int> idx, low;
  std::vector<bool> on_stack;
  std::vector<int> stack;
  int counter = 0;
  std::vector<std::vector<int>> comps;

  explicit Tarjan(const std::vector<std::vector<int>>& a)
      : adj(a), n(static_cast<int>(a.size())),
        idx(a.size(), -1), low(a.size(), 0), on_stack(a.size(), false) {}

  void run() {
    for (int v = 0; v < n; ++v)
      if (idx[static_cast<size_t>(v)] < 0) visit(v);
  }

  void visit(int root) {
    // explicit stack: (node, next-child-index)
    std::vector<std::pair<int, size_t>> work{{root, 0}};
    while (!work.empty()) {
      auto& [v, ci] = work.back();
      if (ci == 0) {
        idx[static_cast<size_t>(v)] = low[static_cast<size_t>(v)] = counter++;
        stack.push_back(v);
        on_stack[static_cast<size_t>(v)] = true;
      }
      bool descended = false;
      while (ci < adj[static_cast<size_t>(v)].size()) {
        int w = adj[static_cast<size_t>(v)][ci];
        ++ci;
        if (idx[static_cast<size_t>(w)] < 0) {
          work.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[static_cast<size_t>(w)])
          low[static_cast<size_t>(v)] =
              std::min(low[static_cast<size_t>(v)], idx[static_cast<size_t>(w)]);
      }
      if (descended) continue;
      if (low[static_cast<size_t>(v)] == idx[static_cast<size_t>(v)]) {
        std::vector<int> comp;
        for (;;) {
          int w = stack.back();
          stack.pop_back();
          on_stack[static_cast<size_t>(w)] = false;
          comp.push_back(w);
          if (w == v) break;
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      int child = v;
      work.pop_back();
      if (!work.empty()) {
        int parent = work.back().first;
        low[static_cast<size_t>(parent)] = std::min(
            low[static_cast<size_t>(parent)], low[static_cast<size_t>(child)]);
      }
    }
  }
};

}  // namespace

std::vector<std::vector<int>> scc_partition(
    int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  std::set<std::pair<int, int>> dedup(edges.begin(), edges.end());
  for (const auto& [a, b] : dedup) adj[static_cast<size_t>(a)].push_back(b);
  for (auto& v : adj) std::sort(v.begin(), v.end());
  Tarjan t(adj);
  t.run();
  // reverse topological -> topological
  std::reverse(t.comps.begin(), t.comps.end());
  return t.comps;
}

SccId DagScc::component_of(InstrId instr) const {
  for (const auto& c : components)
    if (std::binary_search(c.members.begin(), c.members.end(), instr))
      return c.id;
  return -1;
}

std::vector<Scc> compute_sccs(const Pdg& g) {
  // dense renumbering of PDG nodes
  std::map<InstrId, int> dense;
  for (size_t i = 0; i < g.nodes.size(); ++i)
    dense[g.nodes[i]] = static_cast<int>(i);
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : g.edges)
    edges.push_back({dense.at(e.src), dense.at(e.dst)});
  auto comps = scc_partition(static_cast<int>(g.nodes.size()), edges);

  // loop-carried data edges inside a component flag recurrence
  std::set<std::pair<InstrId, InstrId>> carried;
  for (const auto& e : g.edges)
    if (e.kind == PdgEdge::Kind::Data && e.carried)
      carried.insert({e.src, e.dst});

  std::vector<Scc> out;
  for (size_t ci = 0; ci < comps.size(); ++ci) {
    Scc s;
    s.id = static_cast<SccId>(ci);
    for (int d : comps[ci])
      s.members.push_back(g.nodes[static_cast<size_t>(d)]);
    std::sort(s.members.begin(), s.members.end());
    std::set<InstrId> mem(s.members.begin(), s.members.end());
    for (const auto& [a, b] : carried)
      if (mem.count(a) && mem.count(b)) s.carries_recurrence = true;
    out.push_back(std::move(s));
  }
  return out;
}

DagScc build_dagscc(const Pdg& g, std::vector<Scc> sccs,
                    const std::function<int64_t(InstrId)>& instr_latency,
                    const std::function<bool(InstrId)>& instr_is_call) {
  DagScc d;
  d.components = std::move(sccs);
  std::map<InstrId, SccId> comp_of;
  for (auto& c : d.components) {
    c.latency = 0;
    for (InstrId m : c.members) {
      comp_of[m] = c.id;
      c.latency += instr_latency ? instr_latency(m) : 1;
      if (instr_is_call && instr_is_call(m)) c.contains_call = true;
    }
  }
  std::set<std::pair<SccId, SccId>> es;
  for (const auto& e : g.edges) {
    SccId a = comp_of.at(e.src), b = comp_of.at(e.dst);
    if (a != b) es.insert({a, b});
  }
  d.edges.assign(es.begin(), es.end());

  // deterministic topological order: among ready components the one with
  // the smallest member instruction goes first, keeping independent
  // components in program order
  {
    std::map<SccId, int> indeg;
    std::map<SccId, std::vector<SccId>> succs;
    for (const auto& c : d.components) indeg[c.id] = 0;
    for (const auto& [a, b] : d.edges) {
      ++indeg[b];
      succs[a].push_back(b);
    }
    // min-heap keyed by smallest member id
    auto key = [&](SccId id) {
      return d.components[static_cast<size_t>(id)].members.front();
    };
    std::set<std::pair<InstrId, SccId>> ready;
    for (const auto& [id, deg] : indeg)
      if (deg == 0) ready.insert({key(id), id});
    while (!ready.empty()) {
      SccId id = ready.begin()->second;
      ready.erase(ready.begin());
      d.topo_order.push_back(id);
      for (SccId s : succs[id])
        if (--indeg[s] == 0) ready.insert({key(s), s});
    }
  }
  return d;
}

std::string export_dot(const DagScc& d) {
  std::string s = "digraph dagscc {\n";
  for (const auto& c : d.components) {
    std::string label = "scc" + std::to_string(c.id) + "\\nsize=" +
                        std::to_string(c.members.size()) + " lat=" +
                        std::to_string(c.latency);
    if (c.carries_recurrence) label += "\\nrecurrence";
    if (c.contains_call) label += "\\ncall";
    s += "  c" + std::to_string(c.id) + " [label=\"" + label + "\"";
    if (c.carries_recurrence) s += ", shape=doublecircle";
    s += "];\n";
  }
  for (const auto& [a, b] : d.edges)
    s += "  c" + std::to_string(a) + " -> c" + std::to_string(b) + ";\n";
  s += "}\n";
  return s;
}

std::string export_json(const DagScc& d) {
  nlohmann::json j;
  j["components"] = nlohmann::json::array();
  for (const auto& c : d.components)
    j["components"].push_back({
        {"id", c.id},
        {"members", c.members},
        {"latency", c.latency},
        {"contains_call", c.contains_call},
        {"carries_recurrence", c.carries_recurrence},
    });
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : d.edges)
    j["edges"].push_back({{"src", a}, {"dst", b}});
  j["topo_order"] = d.topo_order;
  return j.dump(2);
}

}  // namespace pipeslice

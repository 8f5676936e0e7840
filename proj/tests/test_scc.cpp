#include <set>

#include "doctest.h"

#include "pipeslice/parser.hpp"
#include "pipeslice/scc.hpp"
#include "pipeslice/workloads.hpp"
#include "testutil.hpp"

using namespace pipeslice;

namespace {

Pdg synthetic(int n, const std::vector<std::pair<int, int>>& edges) {
  Pdg g;
  g.function = "synthetic";
  for (int i = 0; i < n; ++i) g.nodes.push_back(i);
  for (const auto& [a, b] : edges)
    g.edges.push_back({a, b, PdgEdge::Kind::Data, "v", false});
  return g;
}

// exhaustive mutual reachability
std::vector<std::set<int>> oracle_partition(
    int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<bool>> r(static_cast<size_t>(n),
                                   std::vector<bool>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i) r[static_cast<size_t>(i)][static_cast<size_t>(i)] = true;
  for (const auto& [a, b] : edges) r[static_cast<size_t>(a)][static_cast<size_t>(b)] = true;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (r[static_cast<size_t>(i)][static_cast<size_t>(k)] && r[static_cast<size_t>(k)][static_cast<size_t>(j)])
          r[static_cast<size_t>(i)][static_cast<size_t>(j)] = true;
  std::vector<std::set<int>> out;
  std::vector<bool> done(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (done[static_cast<size_t>(i)]) continue;
    std::set<int> comp;
    for (int j = 0; j < n; ++j)
      if (r[static_cast<size_t>(i)][static_cast<size_t>(j)] && r[static_cast<size_t>(j)][static_cast<size_t>(i)]) {
        comp.insert(j);
        done[static_cast<size_t>(j)] = true;
      }
    out.push_back(std::move(comp));
  }
  return out;
}

}  // namespace

TEST_CASE("acyclic chain gives singletons in order") {
  Pdg g = synthetic(3, {{0, 1}, {1, 2}});
  auto sccs = compute_sccs(g);
  REQUIRE(sccs.size() == 3);
  for (const auto& s : sccs) {
    CHECK(s.members.size() == 1);
    CHECK_FALSE(s.carries_recurrence);
  }
  // topological: 0 before 1 before 2
  CHECK(sccs[0].members[0] == 0);
  CHECK(sccs[1].members[0] == 1);
  CHECK(sccs[2].members[0] == 2);
}

TEST_CASE("two mutually dependent nodes form one component") {
  Pdg g = synthetic(2, {{0, 1}, {1, 0}});
  auto sccs = compute_sccs(g);
  REQUIRE(sccs.size() == 1);
  CHECK(sccs[0].members == std::vector<InstrId>{0, 1});
}

TEST_CASE("carried self edge marks recurrence") {
  Pdg g;
  g.function = "r";
  g.nodes = {0, 1};
  g.edges.push_back({0, 0, PdgEdge::Kind::Data, "v", true});
  g.edges.push_back({0, 1, PdgEdge::Kind::Data, "v", false});
  auto sccs = compute_sccs(g);
  REQUIRE(sccs.size() == 2);
  CHECK(sccs[0].carries_recurrence);
  CHECK_FALSE(sccs[1].carries_recurrence);
}

TEST_CASE("list loop: traversal recurrences separate from the call") {
  Program p = workloads::program("listcalc");
  const Function* f = p.find_function("main");
  auto loops = find_loops(*f);
  Pdg g = build_pdg(p, *f, loops[0]);
  auto sccs = compute_sccs(g);
  DagScc dag = build_dagscc(g, sccs, {}, [&](InstrId id) {
    const Instr* i = f->find_instr(id);
    return i->op == Opcode::Call && !is_intrinsic(i->callee);
  });

  const Instr* upd = nullptr;
  const Instr* call = nullptr;
  const Instr* inc = nullptr;
  for (const auto& b : f->body)
    for (const auto& i : b.instrs) {
      if (i.op == Opcode::LoadNext) upd = &i;
      if (i.op == Opcode::Call) call = &i;
      if (i.text() == "i = i + 1") inc = &i;
    }
  REQUIRE(upd);
  REQUIRE(call);
  REQUIRE(inc);

  SccId c_upd = dag.component_of(upd->id);
  SccId c_call = dag.component_of(call->id);
  SccId c_inc = dag.component_of(inc->id);
  CHECK(c_upd != c_call);
  CHECK(c_inc != c_call);
  CHECK(c_inc != c_upd);
  CHECK(dag.components[static_cast<size_t>(c_upd)].carries_recurrence);
  CHECK(dag.components[static_cast<size_t>(c_inc)].carries_recurrence);
  CHECK_FALSE(dag.components[static_cast<size_t>(c_call)].carries_recurrence);
  CHECK(dag.components[static_cast<size_t>(c_call)].contains_call);

  // the traversal precedes the call in topological order
  auto pos = [&](SccId id) {
    for (size_t i = 0; i < dag.topo_order.size(); ++i)
      if (dag.topo_order[i] == id) return i;
    return size_t(9999);
  };
  CHECK(pos(c_upd) < pos(c_call));
}

TEST_CASE("single component condensation") {
  Pdg g = synthetic(3, {{0, 1}, {1, 2}, {2, 0}});
  auto sccs = compute_sccs(g);
  DagScc dag = build_dagscc(g, sccs, {});
  CHECK(dag.components.size() == 1);
  CHECK(dag.edges.empty());
  CHECK(dag.topo_order.size() == 1);
}

TEST_CASE("oracle: SCC partition equals mutual reachability, condensation acyclic") {
  testutil::Rng rng(42);
  for (int iter = 0; iter < 500; ++iter) {
    int n = rng.range(1, 12);
    std::vector<std::pair<int, int>> edges;
    int m = rng.range(0, n * 2);
    for (int e = 0; e < m; ++e)
      edges.push_back({rng.range(0, n - 1), rng.range(0, n - 1)});

    auto parts = scc_partition(n, edges);
    auto want = oracle_partition(n, edges);

    // same partition (as sets of sets)
    std::set<std::set<int>> got_sets, want_sets;
    for (const auto& c : parts) got_sets.insert(std::set<int>(c.begin(), c.end()));
    for (const auto& c : want) want_sets.insert(c);
    CAPTURE(iter);
    REQUIRE(got_sets == want_sets);

    // partition covers every node exactly once
    std::vector<int> seen(static_cast<size_t>(n), 0);
    for (const auto& c : parts)
      for (int v : c) seen[static_cast<size_t>(v)]++;
    for (int v = 0; v < n; ++v) CHECK(seen[static_cast<size_t>(v)] == 1);

    // condensation acyclic and topo order consistent
    Pdg g = synthetic(n, edges);
    auto sccs = compute_sccs(g);
    DagScc dag = build_dagscc(g, sccs, {});
    std::map<SccId, size_t> order;
    for (size_t i = 0; i < dag.topo_order.size(); ++i)
      order[dag.topo_order[i]] = i;
    for (const auto& [a, b] : dag.edges) {
      CHECK(a != b);
      CHECK(order.at(a) < order.at(b));
    }
  }
}

TEST_CASE("condensation of a condensation is the identity") {
  testutil::Rng rng(7);
  for (int iter = 0; iter < 100; ++iter) {
    int n = rng.range(2, 12);
    std::vector<std::pair<int, int>> edges;
    for (int e = 0; e < n * 2; ++e)
      edges.push_back({rng.range(0, n - 1), rng.range(0, n - 1)});
    Pdg g = synthetic(n, edges);
    DagScc dag = build_dagscc(g, compute_sccs(g), {});

    // condense the DAG again: everything should stay a singleton
    std::vector<std::pair<int, int>> dag_edges;
    for (const auto& [a, b] : dag.edges) dag_edges.push_back({a, b});
    auto again = scc_partition(static_cast<int>(dag.components.size()), dag_edges);
    CHECK(again.size() == dag.components.size());
    for (const auto& c : again) CHECK(c.size() == 1);
  }
}

TEST_CASE("DAG exports") {
  Pdg g = synthetic(4, {{0, 1}, {1, 2}, {2, 1}, {2, 3}});
  DagScc dag = build_dagscc(g, compute_sccs(g), {});
  std::string dot = export_dot(dag);
  CHECK(dot.rfind("digraph", 0) == 0);
  std::string js = export_json(dag);
  CHECK(js.find("\"topo_order\"") != std::string::npos);
}

#include <algorithm>
#include <set>

#include "doctest.h"

#include "pipeslice/cfg.hpp"
#include "pipeslice/parser.hpp"
#include "pipeslice/validate.hpp"
#include "pipeslice/workloads.hpp"
#include "testutil.hpp"

using namespace pipeslice;

namespace {

// Independent loop oracle: dominators from first principles (v dominates u
// iff u is unreachable from entry when v is removed), back edges, then
// reverse reachability for the body.
struct LoopOracle {
  struct Loop {
    std::string header;
    std::set<std::string> body;
  };

  static bool reaches_without(const Function& f, const std::string& from,
                              const std::string& to,
                              const std::string& removed) {
    if (from == removed) return false;
    std::set<std::string> seen{from};
    std::vector<std::string> work{from};
    while (!work.empty()) {
      std::string cur = work.back();
      work.pop_back();
      if (cur == to) return true;
      const Block* b = f.find_block(cur);
      auto push = [&](const std::string& l) {
        if (l != removed && seen.insert(l).second) work.push_back(l);
      };
      if (b->terminator.op == Opcode::Jump) push(b->terminator.label1);
      if (b->terminator.op == Opcode::CondBr) {
        push(b->terminator.label1);
        push(b->terminator.label2);
      }
    }
    return false;
  }

  static bool dominates(const Function& f, const std::string& v,
                        const std::string& u) {
    if (v == u) return true;
    const std::string& entry = f.body.front().label;
    if (u == entry) return false;
    return !reaches_without(f, entry, u, v);
  }

  static std::vector<Loop> loops(const Function& f) {
    std::map<std::string, std::set<std::string>> by_header;
    for (const auto& b : f.body) {
      auto edge = [&](const std::string& target) {
        // back edge iff the target dominates the source
        const std::string& entry = f.body.front().label;
        if (!reaches_without(f, entry, b.label, "$none$") &&
            b.label != entry)
          return;  // unreachable source
        if (dominates(f, target, b.label)) {
          auto& body = by_header[target];
          body.insert(target);
          // reverse reachability from the latch avoiding the header
          std::vector<std::string> work{b.label};
          while (!work.empty()) {
            std::string cur = work.back();
            work.pop_back();
            if (!body.insert(cur).second) continue;
            for (const auto& pb : f.body) {
              bool edge_to_cur =
                  (pb.terminator.op == Opcode::Jump &&
                   pb.terminator.label1 == cur) ||
                  (pb.terminator.op == Opcode::CondBr &&
                   (pb.terminator.label1 == cur ||
                    pb.terminator.label2 == cur));
              if (edge_to_cur && pb.label != target) work.push_back(pb.label);
            }
          }
        }
      };
      if (b.terminator.op == Opcode::Jump) edge(b.terminator.label1);
      if (b.terminator.op == Opcode::CondBr) {
        edge(b.terminator.label1);
        edge(b.terminator.label2);
      }
    }
    std::vector<Loop> out;
    for (auto& [h, body] : by_header) out.push_back({h, std::move(body)});
    return out;
  }
};

}  // namespace

TEST_CASE("straight-line function has no loops") {
  Program p = parse_program(R"(
func main() {
  local x: int
entry:
  x = 1
  jump next
next:
  ret
}
)");
  CHECK(find_loops(p.functions[0]).empty());
}

TEST_CASE("list example: one loop, induction is the list cursor") {
  Program p = workloads::program("listcalc");
  auto loops = find_loops(*p.find_function("main"));
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].contains_call);
  CHECK(loops[0].depth == 0);
  REQUIRE(loops[0].induction.has_value());
  CHECK(*loops[0].induction == "node");

  auto calc_loops = find_loops(*p.find_function("calc"));
  REQUIRE(calc_loops.size() == 1);
  CHECK(*calc_loops[0].induction == "j");
  CHECK_FALSE(calc_loops[0].static_trip.has_value());  // bound is a param
}

TEST_CASE("counted loop has a static trip hint") {
  Program p = parse_program(R"(
func main() {
  local j: int
  local c: int
entry:
  j = 0
  jump h
h:
  c = j < 10
  br c b e
b:
  j = j + 2
  jump h
e:
  ret
}
)");
  auto loops = find_loops(p.functions[0]);
  REQUIRE(loops.size() == 1);
  REQUIRE(loops[0].static_trip.has_value());
  CHECK(*loops[0].static_trip == 5);
}

TEST_CASE("nested loop depths: outer two inner two deeper") {
  // shape: one outer loop, two depth-1 loops inside it, each with a
  // depth-2 inner loop
  Program p = parse_program(R"(
func main(N: int, M: int) {
  local i1: int
  local z: int
  local a: int
  local z1: int
  local a1: int
  local c0: int
  local c1: int
  local c2: int
  local c3: int
  local c4: int
  local s: real
entry:
  i1 = 0
  jump h0
h0:
  c0 = i1 < N
  br c0 b0 e0
b0:
  z = 0
  jump h1
h1:
  c1 = z < M
  br c1 b1 e1
b1:
  a = 0
  jump h2
h2:
  c2 = a < 10
  br c2 b2 e2
b2:
  s = s + 1.0
  a = a + 1
  jump h2
e2:
  z = z + 1
  jump h1
e1:
  z1 = 0
  jump h3
h3:
  c3 = z1 < M
  br c3 b3 e3
b3:
  a1 = 0
  jump h4
h4:
  c4 = a1 < 10
  br c4 b4 e4
b4:
  s = s + 2.0
  a1 = a1 + 1
  jump h4
e4:
  z1 = z1 + 1
  jump h3
e3:
  i1 = i1 + 1
  jump h0
e0:
  ret
}
)");
  REQUIRE(validate(p).empty());
  auto loops = find_loops(p.functions[0]);
  REQUIRE(loops.size() == 5);
  std::multiset<int> depths;
  for (const auto& l : loops) depths.insert(l.depth);
  CHECK(depths == std::multiset<int>{0, 1, 1, 2, 2});
  for (const auto& l : loops) CHECK_FALSE(l.contains_call);
}

TEST_CASE("irreducible control flow is rejected") {
  Program p = parse_program(R"(
func main(k: int) {
  local c: int
entry:
  c = k < 1
  br c a b
a:
  jump b
b:
  jump a
}
)");
  // two-entry cycle between a and b
  CHECK_THROWS_WITH_AS(find_loops(p.functions[0]),
                       doctest::Contains("irreducible"), std::runtime_error);
}

TEST_CASE("loop discovery agrees with the brute-force oracle") {
  int checked = 0;
  for (uint64_t seed = 0; seed < 300; ++seed) {
    Program p = testutil::gen_program(seed);
    for (const auto& f : p.functions) {
      if (f.body.size() > 10) continue;
      ++checked;
      auto got = find_loops(f);
      auto want = LoopOracle::loops(f);
      CAPTURE(seed);
      CAPTURE(f.name);
      REQUIRE(got.size() == want.size());
      for (const auto& w : want) {
        bool found = false;
        for (const auto& g : got)
          if (g.header == w.header && g.body == w.body) found = true;
        CHECK(found);
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("structure recovery covers the whole function") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Program p = testutil::gen_program(seed);
    for (const auto& f : p.functions) {
      CAPTURE(seed);
      StructureInfo st = analyze_structure(f);
      // every instruction is either top level or inside a construct, and
      // members are consistent
      int n = f.instr_count;
      CHECK(static_cast<int>(st.innermost.size()) == n);
      for (const auto& c : st.constructs) {
        for (InstrId m : c.members) {
          CHECK(m >= 0);
          CHECK(m < n);
        }
        CHECK(!c.skeleton.empty());
      }
    }
  }
}

TEST_CASE("control table skeleton for the kernel loop") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  StructureInfo st = analyze_structure(*calc);
  REQUIRE(st.constructs.size() == 1);
  const Construct& c = st.constructs[0];
  CHECK(c.k == Construct::K::Loop);
  REQUIRE(c.induction.has_value());
  CHECK(*c.induction == "j");
  // skeleton: j init, compare, branch, update
  std::set<std::string> texts;
  for (InstrId id : c.skeleton) texts.insert(calc->find_instr(id)->text());
  CHECK(texts.count("j = 0"));
  CHECK(texts.count("c = j < M"));
  CHECK(texts.count("j = j + 1"));
  CHECK(texts.count("br c body done"));
}

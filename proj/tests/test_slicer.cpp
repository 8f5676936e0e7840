#include <set>

#include "doctest.h"

#include "pipeslice/interp.hpp"
#include "pipeslice/parser.hpp"
#include "pipeslice/slicer.hpp"
#include "pipeslice/validate.hpp"
#include "pipeslice/workloads.hpp"
#include "testutil.hpp"

using namespace pipeslice;

namespace {

const Instr* by_text(const Function& f, const std::string& text) {
  for (const auto& b : f.body) {
    for (const auto& i : b.instrs)
      if (i.text() == text) return &i;
    if (b.terminator.text() == text) return &b.terminator;
  }
  return nullptr;
}

const Slice* slice_on(const std::vector<Slice>& ss, const std::string& loc) {
  for (const auto& s : ss)
    if (s.criterion.location == loc) return &s;
  return nullptr;
}

// independent closure oracle: fixpoint over the data edges with the same
// induction stopping rule, recomputed from loop info
std::set<InstrId> closure_oracle(const Program& p, const Function& f,
                                 const Criterion& c) {
  Pdg g = build_pdg(p, f);
  std::set<InstrId> stops;
  for (const auto& l : find_loops(f)) {
    if (!l.induction) continue;
    for (const auto& label : l.body)
      for (const auto& i : f.find_block(label)->instrs) {
        if (i.dst != *l.induction) continue;
        auto uses = i.uses();
        bool self = false;
        for (const auto& u : uses)
          if (u == *l.induction) self = true;
        if (self) stops.insert(i.id);
      }
  }
  std::set<InstrId> s(c.seeds.begin(), c.seeds.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& e : g.edges) {
      if (e.kind != PdgEdge::Kind::Data) continue;
      if (!s.count(e.dst) || stops.count(e.dst)) continue;
      if (s.insert(e.src).second) changed = true;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("criteria for the kernel: out-param then written global") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  auto cs = collect_criteria(p, *calc);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].location == "da_out");
  CHECK(cs[0].kind == Criterion::Kind::OutParam);
  CHECK(cs[1].location == "b");
  CHECK(cs[1].kind == Criterion::Kind::Global);
  CHECK(cs[1].seeds.size() == 2);  // b[0] init + b[j] update
}

TEST_CASE("pure value-returning function has a single return criterion") {
  Program p = workloads::program("listcalc");
  const Function* seq = p.find_function("seq");
  auto cs = collect_criteria(p, *seq);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].kind == Criterion::Kind::Return);
}

TEST_CASE("function without outputs cannot be sliced") {
  Program p = parse_program(R"(
func main() {
  local x: real
entry:
  x = 1.0
  ret
}
)");
  CHECK_THROWS_WITH_AS(collect_criteria(p, p.functions[0]),
                       doctest::Contains("nothing to slice"),
                       std::runtime_error);
}

TEST_CASE("non-pure inner call disqualifies slicing") {
  Program p = parse_program(R"(
global g: real[4]

func main() {
entry:
  call f(1.0)
  ret
}

func f(v: real) {
entry:
  call w(v)
  g[0] = v
  ret
}

func w(v: real) {
entry:
  g[1] = v
  ret
}
)");
  CHECK_THROWS_WITH_AS(collect_criteria(p, *p.find_function("f")),
                       doctest::Contains("non-pure call"),
                       std::runtime_error);
}

TEST_CASE("slice on a constant assignment is that instruction") {
  Program p = parse_program(R"(
global g: real[4]

func main() {
entry:
  g[0] = 1.5
  ret
}
)");
  const Function& f = p.functions[0];
  auto cs = collect_criteria(p, f);
  REQUIRE(cs.size() == 1);
  Pdg g = build_pdg(p, f);
  Slice s = compute_slice(g, f, cs[0]);
  CHECK(s.instrs == std::set<InstrId>{f.body[0].instrs[0].id});
}

TEST_CASE("the two kernel slices match the documented shape") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  auto slices = slice_function(p, *calc);
  REQUIRE(slices.size() == 2);

  const Slice* s_da = slice_on(slices, "da_out");
  const Slice* s_b = slice_on(slices, "b");
  REQUIRE(s_da);
  REQUIRE(s_b);

  auto da_set = s_da->full_set();
  auto b_set = s_b->full_set();

  const Instr* m_acc = by_text(*calc, "m = m + t0");
  const Instr* s_call = by_text(*calc, "s = call seq(j)");
  const Instr* da_store = by_text(*calc, "da_out[0] = t6");
  const Instr* b_store = by_text(*calc, "b[j] = t9");
  const Instr* b_init = by_text(*calc, "b[0] = 0.0");
  const Instr* xx_call = by_text(*calc, "t7 = call xx(m)");
  const Instr* cos_call = by_text(*calc, "t3 = call cos(m)");

  // the shared accumulator chain appears in both slices
  CHECK(da_set.count(m_acc->id));
  CHECK(b_set.count(m_acc->id));
  CHECK(da_set.count(s_call->id));
  CHECK(b_set.count(s_call->id));

  // each criterion keeps its own update and drops the other's
  CHECK(da_set.count(da_store->id));
  CHECK(da_set.count(cos_call->id));
  CHECK_FALSE(da_set.count(b_store->id));
  CHECK_FALSE(da_set.count(b_init->id));
  CHECK_FALSE(da_set.count(xx_call->id));

  CHECK(b_set.count(b_store->id));
  CHECK(b_set.count(b_init->id));
  CHECK(b_set.count(xx_call->id));
  CHECK_FALSE(b_set.count(da_store->id));
  CHECK_FALSE(b_set.count(cos_call->id));

  // both carry the loop skeleton
  const Instr* j_init = by_text(*calc, "j = 0");
  const Instr* j_upd = by_text(*calc, "j = j + 1");
  for (const auto* s : {s_da, s_b}) {
    auto fs = s->full_set();
    CHECK(fs.count(j_init->id));
    CHECK(fs.count(j_upd->id));
  }

  // parameters: the slice on da_out uses M, da_in and da_out
  CHECK(s_da->params_used ==
        std::vector<std::string>{"M", "da_in", "da_out"});
  CHECK(s_b->params_used == std::vector<std::string>{"M", "da_in"});
}

TEST_CASE("control attachment: straight-line slice unchanged, loops add skeletons") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  ControlTable t = build_control_table(*calc);
  REQUIRE(t.entries.size() == 1);

  Pdg g = build_pdg(p, *calc);
  auto cs = collect_criteria(p, *calc);
  Slice raw = compute_slice(g, *calc, cs[0]);
  Slice with = attach_control(raw, t, *calc, g);
  CHECK(with.control_skeleton.size() > 0);
  // idempotent
  Slice again = attach_control(with, t, *calc, g);
  CHECK(again.full_set() == with.full_set());
}

TEST_CASE("straight-line functions have an empty control table") {
  Program p = parse_program(R"(
func main() {
  local x: real
entry:
  x = 1.0
  ret
}
)");
  CHECK(build_control_table(p.functions[0]).entries.empty());
}

TEST_CASE("filtering drops contained and duplicate slices") {
  Slice a, b, c;
  a.criterion.location = "a";
  a.instrs = {1, 2};
  b.criterion.location = "b";
  b.instrs = {1, 2, 3};
  c.criterion.location = "c";
  c.instrs = {1, 2};

  auto kept = filter_redundant({a, b, c});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].criterion.location == "b");

  // equal sets: first survives
  auto kept2 = filter_redundant({a, c});
  REQUIRE(kept2.size() == 1);
  CHECK(kept2[0].criterion.location == "a");

  // overlapping but incomparable sets both survive
  Slice d;
  d.criterion.location = "d";
  d.instrs = {2, 4};
  auto kept3 = filter_redundant({a, d});
  CHECK(kept3.size() == 2);
}

TEST_CASE("materialized slices validate and run") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  auto slices = slice_function(p, *calc);
  REQUIRE(slices.size() == 2);

  Program probe = p;
  for (const auto& s : slices)
    probe.functions.push_back(
        materialize(*calc, s, "calc_slice_" + s.criterion.location));
  renumber(probe);
  CHECK(validate(probe).empty());
}

TEST_CASE("slice semantics: criterion locations match the full kernel") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  auto slices = slice_function(p, *calc);
  Program probe = p;
  for (const auto& s : slices)
    probe.functions.push_back(
        materialize(*calc, s, "calc_slice_" + s.criterion.location));
  renumber(probe);
  validate_or_throw(probe);
  Engine eng(probe);

  testutil::Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    int64_t m_bound = rng.range(0, 12);
    double da_in = rng.range(-20, 20) * 0.125;

    auto run_fn = [&](const std::string& name) {
      Memory mem = eng.make_memory({});
      Engine::Ctx ctx(&mem);
      std::vector<Value> args{Value::of_int(m_bound), Value::of_real(da_in),
                              Value::of_array(eng.global_index("acc"))};
      // slices may take a subset of the kernel's parameters
      const Function* fn = probe.find_function(name);
      std::vector<Value> act;
      for (const auto& prm : fn->params) {
        if (prm.name == "M") act.push_back(args[0]);
        if (prm.name == "da_in") act.push_back(args[1]);
        if (prm.name == "da_out") act.push_back(args[2]);
      }
      eng.call(eng.function_index(name), act, ctx);
      return mem;
    };

    Memory full = run_fn("calc");
    Memory s_da = run_fn("calc_slice_da_out");
    Memory s_b = run_fn("calc_slice_b");

    int acc_idx = eng.global_index("acc");
    int b_idx = eng.global_index("b");
    CAPTURE(trial);
    CHECK(s_da.arrays[static_cast<size_t>(acc_idx)].reals[0] ==
          doctest::Approx(full.arrays[static_cast<size_t>(acc_idx)].reals[0])
              .epsilon(1e-9));
    for (int64_t j = 0; j < m_bound; ++j)
      CHECK(s_b.arrays[static_cast<size_t>(b_idx)].reals[static_cast<size_t>(j)] ==
            doctest::Approx(
                full.arrays[static_cast<size_t>(b_idx)].reals[static_cast<size_t>(j)])
                .epsilon(1e-9));
  }
}

TEST_CASE("slicing a materialized slice returns its whole body") {
  Program p = workloads::program("listcalc");
  const Function* calc = p.find_function("calc");
  auto slices = slice_function(p, *calc);
  Program probe = p;
  probe.functions.push_back(materialize(*calc, slices[0], "again"));
  renumber(probe);
  const Function* again = probe.find_function("again");

  auto sub = slice_function(probe, *again);
  REQUIRE(sub.size() == 1);
  // every instruction of the rematerialized body is retained
  Function m2 = materialize(*again, sub[0], "again2");
  int count_body = 0, count_m2 = 0;
  for (const auto& b : again->body) count_body += static_cast<int>(b.instrs.size());
  for (const auto& b : m2.body) count_m2 += static_cast<int>(b.instrs.size());
  CHECK(count_body == count_m2);
}

TEST_CASE("oracle: slices equal brute-force closure on a generated corpus") {
  int functions_checked = 0;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    testutil::GenOpts opts;
    opts.with_outputs = true;
    opts.max_stmts = 3;
    Program p = testutil::gen_program(seed, opts);
    for (const auto& f : p.functions) {
      if (f.name == "hlp") continue;
      int n_instrs = 0;
      for (const auto& b : f.body) n_instrs += static_cast<int>(b.instrs.size());
      if (n_instrs > 10) continue;

      std::vector<Criterion> cs;
      try {
        cs = collect_criteria(p, f);
      } catch (const std::exception&) {
        continue;  // no outputs
      }
      ++functions_checked;
      Pdg g = build_pdg(p, f);
      for (const auto& c : cs) {
        Slice s = compute_slice(g, f, c);
        auto want = closure_oracle(p, f, c);
        CAPTURE(seed);
        CAPTURE(f.name);
        CAPTURE(c.location);
        REQUIRE(s.instrs == want);
      }
    }
  }
  CHECK(functions_checked >= 50);
}

TEST_CASE("every output is covered by exactly one kept slice") {
  Program p = workloads::program("linkedlist3");
  const Function* f = p.find_function("ll_work3");
  auto slices = slice_function(p, *f);
  auto criteria = collect_criteria(p, *f);
  // each criterion's seeds are contained in exactly one kept slice
  for (const auto& c : criteria) {
    int covered = 0;
    for (const auto& s : slices) {
      auto fs = s.full_set();
      bool all = true;
      for (InstrId seed : c.seeds)
        if (!fs.count(seed)) all = false;
      if (all) ++covered;
    }
    CAPTURE(c.location);
    CHECK(covered >= 1);
    if (slice_on(slices, c.location)) CHECK(covered >= 1);
  }
  // kept slices are pairwise incomparable
  for (size_t i = 0; i < slices.size(); ++i)
    for (size_t j = i + 1; j < slices.size(); ++j) {
      auto a = slices[i].full_set(), b = slices[j].full_set();
      CHECK_FALSE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
      CHECK_FALSE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
}

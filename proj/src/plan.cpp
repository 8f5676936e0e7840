#include "pipeslice/plan.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pipeslice/validate.hpp"

namespace pipeslice {

StagePlan assign_stages(const DagScc& d, int max_stages,
                        const std::set<SccId>& force_stage0) {
  StagePlan sp;
  size_t n = d.components.size();
  sp.stage_of.assign(n, 0);
  auto degenerate_plan = [&] {
    sp.stage_count = 1;
    sp.degenerate = true;
    sp.stage_of.assign(n, 0);
    sp.stage_latency.assign(1, 0);
    for (const auto& c : d.components) sp.stage_latency[0] += c.latency;
    return sp;
  };
  if (n < 2 || max_stages < 2) return degenerate_plan();

  std::map<SccId, std::vector<SccId>> preds;
  for (const auto& [a, b] : d.edges) preds[b].push_back(a);

  // stage 0: the traversal -- recurrence SCCs whose inputs are already in
  // stage 0 (induction and pointer-chasing chains), any caller-forced
  // SCCs, and all their ancestors
  std::set<SccId> stage0(force_stage0.begin(), force_stage0.end());
  {
    std::vector<SccId> work(stage0.begin(), stage0.end());
    while (!work.empty()) {
      SccId v = work.back();
      work.pop_back();
      for (SccId p : preds[v])
        if (stage0.insert(p).second) work.push_back(p);
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (SccId id : d.topo_order) {
      if (stage0.count(id)) continue;
      const Scc& c = d.components[static_cast<size_t>(id)];
      if (!c.carries_recurrence) continue;
      bool all_preds_in = true;
      for (SccId p : preds[id])
        if (p != id && !stage0.count(p)) all_preds_in = false;
      if (all_preds_in) {
        stage0.insert(id);
        changed = true;
      }
    }
  }
  if (stage0.empty()) return degenerate_plan();

  std::vector<SccId> rest;
  for (SccId id : d.topo_order)
    if (!stage0.count(id)) rest.push_back(id);
  if (rest.empty()) return degenerate_plan();

  int64_t grand = 0;
  for (const auto& c : d.components) grand += c.latency;
  int64_t stage0_lat = 0;
  for (SccId id : stage0)
    stage0_lat += d.components[static_cast<size_t>(id)].latency;

  // balance: absorb a topological prefix into stage 0 (a prefix is closed
  // under predecessors, so edges stay forward). For the common two-stage
  // case pick the split minimizing the bottleneck; at least one SCC stays
  // downstream.
  size_t absorb = 0;
  if (max_stages == 2) {
    int64_t suffix = 0;
    for (SccId id : rest) suffix += d.components[static_cast<size_t>(id)].latency;
    int64_t best = std::max(stage0_lat, suffix);
    size_t best_k = 0;
    int64_t prefix = stage0_lat;
    int64_t tail = suffix;
    for (size_t k = 1; k < rest.size(); ++k) {
      int64_t lat = d.components[static_cast<size_t>(rest[k - 1])].latency;
      prefix += lat;
      tail -= lat;
      int64_t cost = std::max(prefix, tail);
      if (cost < best) {
        best = cost;
        best_k = k;
      }
    }
    absorb = best_k;
    for (size_t k = 0; k < absorb; ++k) {
      stage0_lat += d.components[static_cast<size_t>(rest[k])].latency;
      stage0.insert(rest[k]);
    }
  } else {
    while (absorb + 1 < rest.size() && stage0_lat < grand / max_stages) {
      stage0_lat += d.components[static_cast<size_t>(rest[absorb])].latency;
      stage0.insert(rest[absorb]);
      ++absorb;
    }
  }
  rest.erase(rest.begin(), rest.begin() + static_cast<long>(absorb));

  // distribute the remainder over stages 1..max_stages-1
  int64_t rest_total = 0;
  for (SccId id : rest)
    rest_total += d.components[static_cast<size_t>(id)].latency;
  int stages_for_rest = max_stages - 1;
  int64_t target = (rest_total + stages_for_rest - 1) / stages_for_rest;

  int stage = 1;
  int64_t acc = 0;
  for (size_t i = 0; i < rest.size(); ++i) {
    SccId id = rest[i];
    sp.stage_of[static_cast<size_t>(id)] = stage;
    acc += d.components[static_cast<size_t>(id)].latency;
    size_t left = rest.size() - i - 1;
    if (acc >= target && stage < stages_for_rest &&
        left >= static_cast<size_t>(stages_for_rest - stage)) {
      ++stage;
      acc = 0;
    }
  }
  sp.stage_count = stage + 1;
  sp.stage_latency.assign(static_cast<size_t>(sp.stage_count), 0);
  for (const auto& c : d.components)
    sp.stage_latency[static_cast<size_t>(sp.stage_of[static_cast<size_t>(c.id)])] +=
        c.latency;
  return sp;
}

namespace {

struct ArrayFootprint {
  std::set<std::string> reads, writes;
};

void merge_into(ArrayFootprint& a, const ArrayFootprint& b) {
  a.reads.insert(b.reads.begin(), b.reads.end());
  a.writes.insert(b.writes.begin(), b.writes.end());
}

// transitive array footprint of a function (direct accesses + callees)
ArrayFootprint function_footprint(const Program& p, const Function& f,
                                  std::set<std::string>& seen) {
  ArrayFootprint fp;
  if (!seen.insert(f.name).second) return fp;
  for (const auto& b : f.body) {
    auto visit = [&](const Instr& i) {
      if (i.op == Opcode::ArrayLoad) fp.reads.insert(i.array);
      if (i.op == Opcode::ArrayStore) fp.writes.insert(i.array);
      if (i.op == Opcode::Call && !is_intrinsic(i.callee)) {
        const Function* callee = p.find_function(i.callee);
        if (callee) merge_into(fp, function_footprint(p, *callee, seen));
      }
    };
    for (const auto& i : b.instrs) visit(i);
    visit(b.terminator);
  }
  seen.erase(f.name);
  return fp;
}

ArrayFootprint instrs_footprint(const Program& p, const Function& f,
                                const std::vector<InstrId>& ids) {
  ArrayFootprint fp;
  for (InstrId id : ids) {
    const Instr* i = f.find_instr(id);
    if (i->op == Opcode::ArrayLoad) fp.reads.insert(i->array);
    if (i->op == Opcode::ArrayStore) fp.writes.insert(i->array);
    if (i->op == Opcode::Call && !is_intrinsic(i->callee)) {
      const Function* callee = p.find_function(i->callee);
      std::set<std::string> seen;
      if (callee) merge_into(fp, function_footprint(p, *callee, seen));
    }
  }
  return fp;
}

bool overlaps(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a)
    if (b.count(x)) return true;
  return false;
}

// map array-ref call arguments through to the storage they name; slices
// read criterion arrays through their parameters
ArrayFootprint slice_runtime_footprint(const Program& p, const Function& slice_fn,
                                       const Instr& call,
                                       const Function& callee) {
  std::set<std::string> seen;
  ArrayFootprint fp = function_footprint(p, slice_fn, seen);
  // translate footprint entries that are parameters of the slice into the
  // call-site arrays
  ArrayFootprint out;
  auto translate = [&](const std::string& name) -> std::string {
    for (size_t i = 0; i < callee.params.size(); ++i) {
      if (callee.params[i].kind != Kind::ArrayRef) continue;
      if (callee.params[i].name != name) continue;
      if (i < call.args.size() && call.args[i].is_var()) return call.args[i].var;
    }
    return name;
  };
  for (const auto& r : fp.reads) out.reads.insert(translate(r));
  for (const auto& w : fp.writes) out.writes.insert(translate(w));
  return out;
}

Kind var_kind(const Function& f, const std::string& v) {
  for (const auto& prm : f.params)
    if (prm.name == v) return prm.kind;
  for (const auto& l : f.locals)
    if (l.name == v) return l.kind;
  return Kind::Real;  // global arrays never appear as scalar record fields
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += v[i];
  }
  return s;
}

struct Planner {
  const Program& p;
  const PlanConfig& cfg;
  PipelinePlan plan;
  const Function* f = nullptr;
  Pdg g;
  std::vector<InstrId> loop_instrs;
  std::map<InstrId, const Instr*> instr_of;
  int loop_construct = -1;
  StructureInfo st;

  void log(const std::string& line) { plan.decision_log.push_back(line); }

  void degenerate(const std::string& why) {
    plan.degenerate = true;
    plan.sliced = false;
    plan.worker_count = 1;
    plan.channels.clear();
    plan.slices.clear();
    plan.stage1_instrs.clear();
    plan.stage1_inputs.clear();
    plan.deferred_reduction.clear();
    log("fallback to sequential: " + why);
  }

  bool top_level_straight_line(const std::vector<InstrId>& ids) const {
    for (InstrId id : ids) {
      const Instr* i = instr_of.at(id);
      if (i->is_terminator()) return false;
      if (st.innermost[static_cast<size_t>(id)] != loop_construct) return false;
    }
    return true;
  }

  // stage-0 instructions depending (transitively, data edges) on `var`
  // defined by the given producer instructions
  std::vector<InstrId> reduction_set(const std::set<InstrId>& producers,
                                     const std::string& var) {
    std::set<InstrId> dset;
    std::vector<InstrId> work;
    for (const auto& e : g.edges) {
      if (e.kind != PdgEdge::Kind::Data) continue;
      if (producers.count(e.src) && e.loc == var && !producers.count(e.dst)) {
        if (dset.insert(e.dst).second) work.push_back(e.dst);
      }
    }
    while (!work.empty()) {
      InstrId n = work.back();
      work.pop_back();
      for (const auto& e : g.edges) {
        if (e.kind != PdgEdge::Kind::Data || e.src != n) continue;
        if (producers.count(e.dst)) continue;
        if (dset.insert(e.dst).second) work.push_back(e.dst);
      }
    }
    return {dset.begin(), dset.end()};
  }

  // true when the deferred set is a clean scalar reduction: straight-line,
  // no array traffic, inputs limited to the result value plus its own or
  // loop-invariant state, and its values feed nothing else inside the loop
  bool reduction_legal(const std::vector<InstrId>& dset,
                       const std::set<InstrId>& producers,
                       const std::string& result_var, std::string* why) {
    std::set<InstrId> ds(dset.begin(), dset.end());
    std::set<std::string> loop_defs;
    for (InstrId id : loop_instrs)
      for (const auto& d : instr_of.at(id)->defs()) loop_defs.insert(d);
    std::set<std::string> own_defs;
    for (InstrId id : dset)
      for (const auto& d : instr_of.at(id)->defs()) own_defs.insert(d);

    for (InstrId id : dset) {
      const Instr* i = instr_of.at(id);
      if (i->is_terminator()) { *why = "reduction reaches a terminator"; return false; }
      if (st.innermost[static_cast<size_t>(id)] != loop_construct) {
        *why = "reduction not straight-line";
        return false;
      }
      if (i->may_touch()) { *why = "reduction touches memory"; return false; }
      if (i->op == Opcode::Call) { *why = "reduction contains a call"; return false; }
      for (const auto& u : i->uses()) {
        if (u == result_var || own_defs.count(u) || !loop_defs.count(u))
          continue;
        *why = "reduction reads loop-varying value '" + u + "'";
        return false;
      }
    }
    for (const auto& e : g.edges) {
      if (e.kind != PdgEdge::Kind::Data) continue;
      if (!ds.count(e.src)) continue;
      if (ds.count(e.dst) || producers.count(e.dst)) {
        if (producers.count(e.dst)) {
          *why = "reduction feeds back into the long stage";
          return false;
        }
        continue;
      }
      *why = "reduction value used elsewhere in the loop";
      return false;
    }
    return true;
  }

  void run() {
    LoopSelection sel = select_candidate_loop(p, cfg.latency);
    plan.loop = sel.loop;
    plan.loop_function = sel.function;
    plan.transformed = p;
    f = plan.transformed.find_function(sel.function);
    {
      std::ostringstream s;
      s << "selected loop '" << sel.loop.header << "' in " << sel.function
        << " (" << sel.scores.size() << " loops scored)";
      log(s.str());
    }

    try {
      g = build_pdg(p, *f, plan.loop);
      st = analyze_structure(*f);
    } catch (const std::exception& e) {
      degenerate(e.what());
      return;
    }
    loop_instrs = loop_instr_ids(*f, plan.loop);
    for (InstrId id : loop_instrs) instr_of[id] = f->find_instr(id);
    for (const auto& c : st.constructs)
      if (c.k == Construct::K::Loop && c.header_label == plan.loop.header)
        loop_construct = c.id;

    auto latfn = [&](InstrId id) {
      return estimate_instr_cost(p, *f, *instr_of.at(id), cfg.latency);
    };
    auto callfn = [&](InstrId id) {
      const Instr* i = instr_of.at(id);
      return i->op == Opcode::Call && !is_intrinsic(i->callee);
    };
    auto sccs = compute_sccs(g);
    DagScc dag = build_dagscc(g, std::move(sccs), latfn, callfn);

    // control scaffolding (jumps, branches) always runs on stage 0
    std::set<SccId> force0;
    for (const auto& c : dag.components)
      for (InstrId m : c.members)
        if (instr_of.at(m)->is_terminator()) force0.insert(c.id);
    plan.stage_plan = assign_stages(dag, 2, force0);

    if (plan.stage_plan.degenerate) {
      degenerate("DSWP degenerate: fewer than 2 pipeline stages");
      return;
    }
    {
      std::ostringstream s;
      s << "2-stage split: stage0 lat=" << plan.stage_plan.stage_latency[0]
        << " stage1 lat=" << plan.stage_plan.stage_latency[1];
      log(s.str());
    }

    // stage-1 instruction set; downstream SCALAR recurrences (reductions)
    // are deferred to the drain phase rather than run by a worker. Array
    // recurrences stay: their state lives in the shared arrays, which the
    // ownership check pins to a single worker.
    auto scalar_recurrence = [&](const Scc& c) {
      std::set<InstrId> mem(c.members.begin(), c.members.end());
      for (const auto& e : g.edges) {
        if (e.kind != PdgEdge::Kind::Data || !e.carried) continue;
        if (!mem.count(e.src) || !mem.count(e.dst)) continue;
        if (!e.loc.empty() && e.loc[0] != '$' && !p.find_global(e.loc))
          return true;
      }
      return false;
    };
    std::vector<InstrId> s1, deferred;
    for (const auto& c : dag.components) {
      if (plan.stage_plan.stage_of[static_cast<size_t>(c.id)] != 1) continue;
      if (c.carries_recurrence && scalar_recurrence(c))
        deferred.insert(deferred.end(), c.members.begin(), c.members.end());
      else
        s1.insert(s1.end(), c.members.begin(), c.members.end());
    }
    std::sort(s1.begin(), s1.end());
    std::sort(deferred.begin(), deferred.end());
    if (s1.empty()) {
      degenerate("no pipelineable work outside the traversal");
      return;
    }

    if (!top_level_straight_line(s1)) {
      degenerate("stage 1 is not a straight-line top-level region");
      return;
    }

    if (!wire_plain_dswp(s1, deferred)) return;

    if (cfg.slice != PlanConfig::SliceMode::Off) {
      try_slice(s1, deferred);
    } else {
      log("slicing disabled by configuration");
    }

    if (static_cast<int>(plan.worker_count) > cfg.max_workers) {
      degenerate("worker count exceeds max-workers");
      return;
    }
  }

  // returns false if the plan fell back to sequential
  bool wire_plain_dswp(const std::vector<InstrId>& s1,
                       const std::vector<InstrId>& deferred) {
    plan.sliced = false;
    plan.call_site = kNoInstr;
    plan.sliced_callee.clear();
    plan.slices.clear();
    std::set<InstrId> s1set(s1.begin(), s1.end());
    std::set<InstrId> defset(deferred.begin(), deferred.end());
    std::set<InstrId> s0set;
    for (InstrId id : loop_instrs)
      if (!s1set.count(id) && !defset.count(id)) s0set.insert(id);

    // crossing vars: defined in stage 0 (inside the loop), used in stage 1
    std::map<std::string, InstrId> first_def;
    for (InstrId id : loop_instrs) {
      const Instr* i = instr_of.at(id);
      if (!s0set.count(id)) continue;
      for (const auto& d : i->defs())
        if (!first_def.count(d)) first_def[d] = id;
    }
    std::set<std::string> crossing;
    for (InstrId id : s1) {
      const Instr* i = instr_of.at(id);
      for (const auto& u : i->uses())
        if (first_def.count(u)) crossing.insert(u);
    }
    // stage 0 captures the forward record when it reaches the first
    // stage-1 position; that value is right for every stage-1 use as long
    // as no stage-0 def of a crossing var sits between the first and last
    // stage-1 instruction
    InstrId first_s1 = s1.front(), last_s1 = s1.back();
    for (InstrId id : loop_instrs) {
      if (s1set.count(id)) continue;
      if (id < first_s1 || id > last_s1) continue;
      for (const auto& d : instr_of.at(id)->defs())
        if (crossing.count(d)) {
          degenerate("crossing value '" + d +
                     "' is redefined inside the stage-1 span");
          return false;
        }
    }
    std::vector<std::string> inputs(crossing.begin(), crossing.end());
    std::sort(inputs.begin(), inputs.end(),
              [&](const std::string& a, const std::string& b) {
                return first_def[a] < first_def[b];
              });
    if (inputs.size() > 4) {
      degenerate("stage 1 consumes more than 4 crossing values");
      return false;
    }

    // values flowing from stage 1 back toward stage 0: only allowed into
    // the deferred reduction
    std::set<std::string> back;
    for (const auto& e : g.edges) {
      if (e.kind != PdgEdge::Kind::Data) continue;
      if (!s1set.count(e.src) || e.loc.empty() || e.loc[0] == '$' ||
          p.find_global(e.loc))
        continue;
      if (s0set.count(e.dst)) {
        degenerate("stage-1 value '" + e.loc + "' used by the traversal");
        return false;
      }
      if (defset.count(e.dst)) back.insert(e.loc);
    }
    std::vector<InstrId> dset(deferred.begin(), deferred.end());
    std::string result_var;
    if (!defset.empty()) {
      if (back.size() != 1) {
        degenerate("deferred reduction needs exactly one stage-1 value, got " +
                   std::to_string(back.size()));
        return false;
      }
      result_var = *back.begin();
      std::string why;
      if (!reduction_legal(dset, s1set, result_var, &why)) {
        degenerate(why);
        return false;
      }
    }

    // stage-1 values read after the loop must arrive through the return
    // channel; only one such value is supported
    std::set<std::string> s1defs;
    for (InstrId id : s1)
      for (const auto& d : instr_of.at(id)->defs()) s1defs.insert(d);
    std::set<std::string> post_uses;
    for (const auto& b : f->body) {
      if (plan.loop.body.count(b.label)) continue;
      auto visit = [&](const Instr& i) {
        for (const auto& u : i.uses())
          if (s1defs.count(u)) post_uses.insert(u);
      };
      for (const auto& i : b.instrs) visit(i);
      visit(b.terminator);
    }
    if (!post_uses.empty()) {
      if (post_uses.size() > 1 ||
          (!result_var.empty() && !post_uses.count(result_var))) {
        degenerate("multiple stage-1 values read after the loop");
        return false;
      }
      if (result_var.empty()) result_var = *post_uses.begin();
    }

    // array ownership: the two stages must touch disjoint written arrays
    std::vector<InstrId> s0vec(s0set.begin(), s0set.end());
    ArrayFootprint fp0 = instrs_footprint(p, *f, s0vec);
    ArrayFootprint fp1 = instrs_footprint(p, *f, s1);
    if (overlaps(fp0.writes, fp1.writes) || overlaps(fp0.writes, fp1.reads) ||
        overlaps(fp1.writes, fp0.reads)) {
      degenerate("stages share written arrays");
      return false;
    }

    plan.stage1_instrs = s1;
    plan.stage1_inputs = inputs;
    plan.deferred_reduction = dset;
    plan.call_result_var = result_var;
    plan.worker_count = 2;
    plan.channels.clear();

    ChannelSpec fwd;
    fwd.name = "fwd.stage1";
    fwd.producer = "stage0";
    fwd.consumer = "stage1";
    for (const auto& v : inputs) {
      fwd.schema.push_back(var_kind(*f, v));
      fwd.field_vars.push_back(v);
    }
    fwd.capacity = cfg.queue_capacity;
    plan.channels.push_back(std::move(fwd));
    if (!dset.empty()) {
      ChannelSpec ret;
      ret.name = "ret.stage1";
      ret.producer = "stage1";
      ret.consumer = "stage0";
      ret.schema.push_back(var_kind(*f, result_var));
      ret.field_vars.push_back(result_var);
      ret.capacity = cfg.queue_capacity;
      ret.dir = ChannelDir::Return;
      plan.channels.push_back(std::move(ret));
    }
    log("plain DSWP wired: stage 1 has " + std::to_string(s1.size()) +
        " instrs, forward record [" + join(inputs) + "]" +
        (dset.empty() ? "" : ", return value '" + result_var + "'"));
    return true;
  }

  void try_slice(const std::vector<InstrId>& s1,
                 const std::vector<InstrId>& deferred) {
    if (plan.stage_plan.stage_latency[1] < plan.stage_plan.stage_latency[0]) {
      log("longest stage is the traversal stage; slicing not applicable");
      return;
    }
    // the call to slice: most expensive user call in stage 1
    InstrId call_id = kNoInstr;
    int64_t best = -1;
    for (InstrId id : s1) {
      const Instr* i = instr_of.at(id);
      if (i->op != Opcode::Call || is_intrinsic(i->callee)) continue;
      int64_t c = estimate_instr_cost(p, *f, *i, cfg.latency);
      if (c > best) {
        best = c;
        call_id = id;
      }
    }
    if (call_id == kNoInstr) {
      log("longest stage contains no user call; slicing not applicable");
      return;
    }
    const Instr& call = *instr_of.at(call_id);
    const Function* callee = p.find_function(call.callee);

    std::vector<Slice> kept;
    try {
      kept = slice_function(p, *callee);
    } catch (const std::exception& e) {
      log(std::string("slicing not applicable: ") + e.what());
      return;
    }
    if (kept.size() < 2) {
      log("slicer yields " + std::to_string(kept.size()) +
          " slice(s); falling back to plain DSWP");
      return;
    }
    if (1 + kept.size() > static_cast<size_t>(cfg.max_workers)) {
      // merge the cheapest slices' work back? capped: drop slicing instead
      log("slice count exceeds max-workers; falling back to plain DSWP");
      return;
    }

    // stage 0 takes everything except the call; values flowing from the
    // call into stage 0 must form a clean reduction
    std::set<InstrId> producers{call_id};
    std::vector<InstrId> dset;
    std::string result_var;
    if (!call.dst.empty()) {
      bool used_in_loop = false;
      for (const auto& e : g.edges)
        if (e.kind == PdgEdge::Kind::Data && e.src == call_id &&
            e.loc == call.dst)
          used_in_loop = true;
      bool used_after = false;
      for (const auto& b : f->body) {
        if (plan.loop.body.count(b.label)) continue;
        auto visit = [&](const Instr& i) {
          for (const auto& u : i.uses())
            if (u == call.dst) used_after = true;
        };
        for (const auto& i : b.instrs) visit(i);
        visit(b.terminator);
      }
      if (used_in_loop) {
        result_var = call.dst;
        dset = reduction_set(producers, result_var);
        std::string why;
        if (!reduction_legal(dset, producers, result_var, &why)) {
          log("slicing not applicable: " + why);
          return;
        }
      } else if (used_after) {
        result_var = call.dst;  // delivered by the drain, no reduction
      }
    }

    // a value-returning wiring needs a slice that computes the return
    bool need_ret = !result_var.empty();
    int ret_slice = -1;
    if (need_ret) {
      for (size_t i = 0; i < kept.size(); ++i)
        if (kept[i].returns_value) ret_slice = static_cast<int>(i);
      if (ret_slice < 0) {
        // the return slice was filtered into a containing slice; let that
        // slice carry the return value out
        Pdg cg = build_pdg(p, *callee);
        auto criteria = collect_criteria(p, *callee);
        ControlTable t = build_control_table(*callee);
        for (const auto& c : criteria) {
          if (c.kind != Criterion::Kind::Return) continue;
          Slice rs = attach_control(compute_slice(cg, *callee, c), t, *callee, cg);
          auto rset = rs.full_set();
          for (size_t i = 0; i < kept.size(); ++i) {
            auto kset = kept[i].full_set();
            if (std::includes(kset.begin(), kset.end(), rset.begin(),
                              rset.end())) {
              kept[static_cast<size_t>(i)].returns_value = true;
              ret_slice = static_cast<int>(i);
              break;
            }
          }
        }
      }
      if (ret_slice < 0) {
        log("no slice can deliver the return value; keeping plain DSWP");
        return;
      }
    }

    // materialize slice functions and check array ownership
    std::vector<Function> fns;
    std::vector<ArrayFootprint> fps;
    for (const auto& s : kept) {
      std::string name = callee->name + "_slice_" + s.criterion.location;
      fns.push_back(materialize(*callee, s, name));
      fps.push_back(slice_runtime_footprint(p, fns.back(), call, *callee));
    }
    for (size_t i = 0; i < fps.size(); ++i)
      for (size_t j = i + 1; j < fps.size(); ++j)
        if (overlaps(fps[i].writes, fps[j].writes) ||
            overlaps(fps[i].writes, fps[j].reads) ||
            overlaps(fps[j].writes, fps[i].reads)) {
          log("slices share written arrays; keeping plain DSWP");
          return;
        }
    {
      std::set<InstrId> s1set{call_id};
      std::vector<InstrId> s0vec;
      std::set<InstrId> dexcl(dset.begin(), dset.end());
      for (InstrId id : loop_instrs)
        if (id != call_id && !dexcl.count(id)) s0vec.push_back(id);
      ArrayFootprint fp0 = instrs_footprint(p, *f, s0vec);
      for (const auto& fp : fps)
        if (overlaps(fp0.writes, fp.writes) || overlaps(fp0.writes, fp.reads) ||
            overlaps(fp.writes, fp0.reads)) {
          log("slice and traversal share written arrays; keeping plain DSWP");
          return;
        }
    }

    // wire it
    plan.sliced = true;
    plan.call_site = call_id;
    plan.sliced_callee = callee->name;
    plan.deferred_reduction = dset;
    plan.call_result_var = result_var;
    plan.stage1_instrs.clear();
    plan.stage1_inputs.clear();
    plan.channels.clear();
    plan.slices.clear();

    for (size_t i = 0; i < kept.size(); ++i) {
      const Slice& s = kept[i];
      SliceWorkerSpec w;
      w.criterion = s.criterion.location;
      w.func = fns[i].name;
      w.returns_value = s.returns_value && static_cast<int>(i) == ret_slice;
      // map slice params to call-site argument positions
      std::map<std::string, int> param_pos;
      for (size_t k = 0; k < callee->params.size(); ++k)
        param_pos[callee->params[k].name] = static_cast<int>(k);
      ChannelSpec fwd;
      fwd.name = "fwd." + s.criterion.location;
      fwd.producer = "stage0";
      fwd.consumer = "slice:" + s.criterion.location;
      fwd.capacity = cfg.queue_capacity;
      for (const auto& prm : fns[i].params) {
        int pos = param_pos.at(prm.name);
        if (prm.kind == Kind::ArrayRef) {
          w.array_arg_positions.push_back(pos);
        } else {
          w.arg_positions.push_back(pos);
          fwd.schema.push_back(prm.kind);
          fwd.field_vars.push_back(call.args[static_cast<size_t>(pos)].is_var()
                                       ? call.args[static_cast<size_t>(pos)].var
                                       : "#lit");
        }
      }
      if (fwd.schema.size() > 4) {
        log("slice argument record exceeds 4 fields; keeping plain DSWP");
        wire_plain_dswp(s1, deferred);
        return;
      }
      w.channel = fwd.name;
      plan.channels.push_back(fwd);
      if (w.returns_value) {
        ChannelSpec rc;
        rc.name = "ret." + s.criterion.location;
        rc.producer = fwd.consumer;
        rc.consumer = "stage0";
        rc.schema.push_back(callee->return_kind.value_or(Kind::Real));
        rc.field_vars.push_back(result_var);
        rc.capacity = cfg.queue_capacity;
        rc.dir = ChannelDir::Return;
        plan.channels.push_back(rc);
        w.ret_channel = rc.name;
      }
      plan.slices.push_back(std::move(w));
    }
    for (auto& fn : fns) plan.transformed.functions.push_back(std::move(fn));
    renumber(plan.transformed);
    validate_or_throw(plan.transformed);

    plan.worker_count = 1 + static_cast<int>(plan.slices.size());
    std::ostringstream s;
    s << "sliced call to " << callee->name << " into " << plan.slices.size()
      << " workers (criteria:";
    for (const auto& w : plan.slices) s << " " << w.criterion;
    s << ")";
    log(s.str());
  }
};

}  // namespace

PipelinePlan plan_dswp_slice(const Program& p, const PlanConfig& cfg) {
  validate_or_throw(p);
  Planner pl{p, cfg, {}};
  pl.run();
  return pl.plan;
}

Profitability decide_profitability(const PipelinePlan& plan,
                                   const LatencyModel& m, double comm_cost,
                                   double threshold) {
  Profitability out;
  std::ostringstream why;
  if (plan.degenerate) {
    out.apply = false;
    out.predicted_speedup = 1.0;
    out.rationale = "plan is sequential (degenerate)";
    return out;
  }
  const Program& p = plan.transformed;
  const Function* f = p.find_function(plan.loop_function);
  auto ids = loop_instr_ids(*f, plan.loop);

  auto instr_cost_sum = [&](const std::vector<InstrId>& v) {
    int64_t c = 0;
    for (InstrId id : v) c += estimate_instr_cost(p, *f, *f->find_instr(id), m);
    return static_cast<double>(c);
  };

  double seq = instr_cost_sum(ids);
  double per_op = comm_cost / 2.0;  // one end of the enqueue+dequeue pair

  std::vector<std::pair<std::string, double>> workers;
  if (!plan.sliced) {
    std::set<InstrId> s1(plan.stage1_instrs.begin(), plan.stage1_instrs.end());
    std::vector<InstrId> s0;
    for (InstrId id : ids)
      if (!s1.count(id)) s0.push_back(id);
    double ret_ops = plan.deferred_reduction.empty() ? 0.0 : 1.0;
    workers.push_back({"stage0", instr_cost_sum(s0) + (1.0 + ret_ops) * per_op});
    workers.push_back(
        {"stage1", instr_cost_sum(plan.stage1_instrs) + (1.0 + ret_ops) * per_op});
  } else {
    std::vector<InstrId> s0;
    for (InstrId id : ids)
      if (id != plan.call_site) s0.push_back(id);
    double n_fwd = static_cast<double>(plan.slices.size());
    double n_ret = 0;
    for (const auto& s : plan.slices)
      if (s.returns_value) n_ret += 1;
    workers.push_back({"stage0", instr_cost_sum(s0) + (n_fwd + n_ret) * per_op});
    for (const auto& s : plan.slices) {
      const Function* sf = p.find_function(s.func);
      double c = static_cast<double>(estimate_function_cost(p, *sf, m));
      double ops = 1.0 + (s.returns_value ? 1.0 : 0.0);
      workers.push_back({"slice:" + s.criterion, c + ops * per_op});
    }
  }

  double worst = 0;
  std::string worst_name;
  for (const auto& [name, c] : workers)
    if (c > worst) {
      worst = c;
      worst_name = name;
    }
  out.predicted_speedup = worst > 0 ? seq / worst : 1.0;
  out.apply = out.predicted_speedup > threshold;
  why << "sequential=" << seq << " cycles/iter; bottleneck " << worst_name
      << "=" << worst << " cycles/iter (comm " << comm_cost
      << " cy/elem); predicted speedup " << out.predicted_speedup
      << (out.apply ? " > " : " <= ") << threshold;
  out.rationale = why.str();
  return out;
}

std::string export_json(const PipelinePlan& plan) {
  nlohmann::json j;
  j["loop"] = {{"function", plan.loop_function},
               {"header", plan.loop.header},
               {"contains_call", plan.loop.contains_call}};
  j["degenerate"] = plan.degenerate;
  j["sliced"] = plan.sliced;
  j["worker_count"] = plan.worker_count;
  j["stage_latencies"] = plan.stage_plan.stage_latency;
  j["stage1_instrs"] = plan.stage1_instrs;
  j["stage1_inputs"] = plan.stage1_inputs;
  if (plan.sliced) {
    j["call_site"] = plan.call_site;
    j["sliced_callee"] = plan.sliced_callee;
  }
  j["slices"] = nlohmann::json::array();
  for (const auto& s : plan.slices)
    j["slices"].push_back({{"criterion", s.criterion},
                           {"func", s.func},
                           {"returns_value", s.returns_value},
                           {"channel", s.channel},
                           {"ret_channel", s.ret_channel}});
  j["channels"] = nlohmann::json::array();
  for (const auto& c : plan.channels) {
    std::vector<std::string> schema;
    for (Kind k : c.schema) schema.push_back(kind_name(k));
    j["channels"].push_back({{"name", c.name},
                             {"producer", c.producer},
                             {"consumer", c.consumer},
                             {"schema", schema},
                             {"capacity", c.capacity},
                             {"direction", c.dir == ChannelDir::Forward
                                               ? "forward"
                                               : "return"}});
  }
  j["deferred_reduction"] = plan.deferred_reduction;
  j["decision_log"] = plan.decision_log;
  return j.dump(2);
}

}  // namespace pipeslice

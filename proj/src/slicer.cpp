#include "pipeslice/slicer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace pipeslice {

namespace {

// induction-update instructions of every loop in f (the stopping frontier
// of the backward traversal)
std::set<InstrId> induction_updates(const Function& f) {
  std::set<InstrId> out;
  for (const auto& l : find_loops(f)) {
    if (!l.induction) continue;
    for (const auto& label : l.body) {
      const Block* b = f.find_block(label);
      for (const auto& i : b->instrs) {
        if (i.dst != *l.induction) continue;
        auto uses = i.uses();
        if (std::find(uses.begin(), uses.end(), *l.induction) != uses.end())
          out.insert(i.id);
      }
    }
  }
  return out;
}

bool writes_array(const Instr& i, const std::string& name) {
  return i.op == Opcode::ArrayStore && i.array == name;
}

}  // namespace

std::set<InstrId> Slice::full_set() const {
  std::set<InstrId> s = instrs;
  s.insert(control_skeleton.begin(), control_skeleton.end());
  return s;
}

std::vector<Criterion> collect_criteria(const Program& p, const Function& f) {
  for (const auto& b : f.body)
    for (const auto& i : b.instrs)
      if (i.op == Opcode::Call && !is_intrinsic(i.callee)) {
        const Function* callee = p.find_function(i.callee);
        if (callee && !callee->pure)
          throw std::runtime_error("non-pure call disqualifies slicing: " +
                                   i.callee + " in " + f.name);
      }

  std::vector<Criterion> out;
  auto all_stores = [&](const std::string& array) {
    std::vector<InstrId> ids;
    for (const auto& b : f.body)
      for (const auto& i : b.instrs)
        if (writes_array(i, array)) ids.push_back(i.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  for (const auto& prm : f.params) {
    if (prm.kind != Kind::ArrayRef) continue;
    auto seeds = all_stores(prm.name);
    if (!seeds.empty())
      out.push_back({Criterion::Kind::OutParam, prm.name, std::move(seeds)});
  }
  for (const auto& g : p.globals) {
    auto seeds = all_stores(g.name);
    if (!seeds.empty())
      out.push_back({Criterion::Kind::Global, g.name, std::move(seeds)});
  }
  if (f.return_kind) {
    // defs of the returned variable that reach the return
    const Instr* ret = nullptr;
    for (const auto& b : f.body)
      if (b.terminator.op == Opcode::Ret) ret = &b.terminator;
    std::vector<InstrId> seeds;
    if (ret && ret->a.is_var()) {
      Pdg g = build_pdg(p, f);
      for (const auto& e : g.edges)
        if (e.kind == PdgEdge::Kind::Data && e.dst == ret->id &&
            e.loc == ret->a.var)
          seeds.push_back(e.src);
      std::sort(seeds.begin(), seeds.end());
      seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    }
    out.push_back({Criterion::Kind::Return, "ret", std::move(seeds)});
  }
  if (out.empty()) throw std::runtime_error("nothing to slice in " + f.name);
  return out;
}

Slice compute_slice(const Pdg& g, const Function& f, const Criterion& c) {
  Slice s;
  s.criterion = c;
  s.returns_value = c.kind == Criterion::Kind::Return;

  std::set<InstrId> stops = induction_updates(f);
  std::map<InstrId, std::vector<InstrId>> data_preds;
  for (const auto& e : g.edges)
    if (e.kind == PdgEdge::Kind::Data) data_preds[e.dst].push_back(e.src);

  std::vector<InstrId> work(c.seeds.begin(), c.seeds.end());
  for (InstrId seed : work) s.instrs.insert(seed);
  while (!work.empty()) {
    InstrId n = work.back();
    work.pop_back();
    if (stops.count(n)) continue;  // keep induction updates, do not follow
    for (InstrId m : data_preds[n])
      if (s.instrs.insert(m).second) work.push_back(m);
  }
  return s;
}

ControlTable build_control_table(const Function& f) {
  ControlTable t;
  StructureInfo st = analyze_structure(f);
  for (const auto& c : st.constructs) t.entries.push_back({c.branch, c.skeleton});
  return t;
}

Slice attach_control(Slice s, const ControlTable& t, const Function& f,
                     const Pdg& g) {
  StructureInfo st = analyze_structure(f);
  std::set<InstrId> stops = induction_updates(f);
  std::map<InstrId, std::vector<InstrId>> data_preds;
  for (const auto& e : g.edges)
    if (e.kind == PdgEdge::Kind::Data) data_preds[e.dst].push_back(e.src);

  auto close_data = [&](std::set<InstrId>& into, std::vector<InstrId> work) {
    while (!work.empty()) {
      InstrId n = work.back();
      work.pop_back();
      if (stops.count(n)) continue;
      for (InstrId m : data_preds[n])
        if (!s.instrs.count(m) && !s.control_skeleton.count(m)) {
          into.insert(m);
          work.push_back(m);
        }
    }
  };

  bool changed = true;
  while (changed) {
    changed = false;
    std::set<InstrId> have = s.full_set();
    for (const auto& [branch, skeleton] : t.entries) {
      const Construct* c = st.find_by_branch(branch);
      if (!c) continue;
      bool contains = false;
      for (InstrId m : c->members)
        if (have.count(m)) { contains = true; break; }
      if (!contains) continue;
      for (InstrId k : skeleton) {
        if (!have.count(k)) {
          s.control_skeleton.insert(k);
          changed = true;
        }
      }
    }
    if (changed) {
      // skeleton instructions need their data inputs as well
      std::set<InstrId> extra;
      close_data(extra, std::vector<InstrId>(s.control_skeleton.begin(),
                                             s.control_skeleton.end()));
      for (InstrId e : extra)
        if (s.instrs.insert(e).second) changed = true;
    }
  }

  // params used by the final set, in declaration order
  std::set<std::string> used;
  for (InstrId id : s.full_set()) {
    const Instr* i = f.find_instr(id);
    for (const auto& u : i->uses()) used.insert(u);
  }
  s.params_used.clear();
  for (const auto& prm : f.params)
    if (used.count(prm.name)) s.params_used.push_back(prm.name);
  return s;
}

std::vector<Slice> filter_redundant(std::vector<Slice> ss) {
  std::vector<std::set<InstrId>> sets;
  sets.reserve(ss.size());
  for (const auto& s : ss) sets.push_back(s.full_set());
  std::vector<Slice> out;
  for (size_t i = 0; i < ss.size(); ++i) {
    bool drop = false;
    for (size_t j = 0; j < ss.size() && !drop; ++j) {
      if (i == j) continue;
      bool subset = std::includes(sets[j].begin(), sets[j].end(),
                                  sets[i].begin(), sets[i].end());
      if (!subset) continue;
      if (sets[i] == sets[j]) {
        if (j < i) drop = true;  // equal sets: first one survives
      } else {
        drop = true;
      }
    }
    if (!drop) out.push_back(ss[i]);
  }
  return out;
}

namespace {

struct Emitter {
  const Function& f;
  const std::set<InstrId>& retained;
  bool keep_return_value;

  std::vector<Block> blocks;
  Block cur;

  void open(const std::string& label) {
    cur = Block{};
    cur.label = label;
  }

  void close_with_jump(const std::string& target) {
    cur.terminator = Instr{};
    cur.terminator.op = Opcode::Jump;
    cur.terminator.label1 = target;
    blocks.push_back(std::move(cur));
  }

  void close_with(const Instr& term) {
    cur.terminator = term;
    blocks.push_back(std::move(cur));
  }

  bool construct_retained(const StructureInfo& st, int cid) const {
    const Construct& c = st.constructs[static_cast<size_t>(cid)];
    for (InstrId m : c.members)
      if (retained.count(m)) return true;
    for (InstrId k : c.skeleton)
      if (retained.count(k)) return true;
    return false;
  }

  void emit_region(const StructureInfo& st, const Region& r) {
    for (const auto& item : r.items) {
      switch (item.k) {
        case RegionItem::K::Instr: {
          const Instr* i = f.find_instr(item.instr);
          if (i->op == Opcode::Ret) {
            Instr ret = *i;
            if (!keep_return_value) ret.a = Operand{};
            close_with(ret);
            return;
          }
          if (retained.count(item.instr)) cur.instrs.push_back(*i);
          break;
        }
        case RegionItem::K::Loop: {
          const LoopNode& ln = *item.loop;
          if (!construct_retained(st, ln.construct)) break;
          close_with_jump(ln.header_label);
          open(ln.header_label);
          for (InstrId id : ln.header_instrs)
            if (retained.count(id)) cur.instrs.push_back(*f.find_instr(id));
          close_with(*f.find_instr(ln.branch));
          open(ln.body_label);
          emit_region(st, ln.body);
          close_with_jump(ln.header_label);
          open(ln.exit_label);
          break;
        }
        case RegionItem::K::If: {
          const IfNode& in = *item.iff;
          if (!construct_retained(st, in.construct)) break;
          close_with(*f.find_instr(in.branch));
          if (in.then_label != in.merge_label) {
            open(in.then_label);
            emit_region(st, in.then_region);
            close_with_jump(in.merge_label);
          }
          if (in.else_label != in.merge_label) {
            open(in.else_label);
            emit_region(st, in.else_region);
            close_with_jump(in.merge_label);
          }
          open(in.merge_label);
          break;
        }
      }
    }
  }
};

}  // namespace

Function materialize(const Function& f, const Slice& s,
                     const std::string& name) {
  std::set<InstrId> retained = s.full_set();

  Function out;
  out.name = name;
  out.pure = false;
  if (s.returns_value) out.return_kind = f.return_kind;

  std::set<std::string> params_used(s.params_used.begin(),
                                    s.params_used.end());
  for (const auto& prm : f.params)
    if (params_used.count(prm.name)) out.params.push_back(prm);

  // locals referenced by the retained instructions
  std::set<std::string> referenced;
  for (InstrId id : retained) {
    const Instr* i = f.find_instr(id);
    for (const auto& v : i->uses()) referenced.insert(v);
    for (const auto& v : i->defs()) referenced.insert(v);
  }
  for (const auto& l : f.locals)
    if (referenced.count(l.name)) out.locals.push_back(l);

  StructureInfo st = analyze_structure(f);
  Emitter em{f, retained, s.returns_value, {}, {}};
  em.open(f.body.front().label);
  em.emit_region(st, st.top);
  out.body = std::move(em.blocks);
  renumber(out);
  return out;
}

std::vector<Slice> slice_function(const Program& p, const Function& f) {
  auto criteria = collect_criteria(p, f);
  Pdg g = build_pdg(p, f);
  ControlTable t = build_control_table(f);
  std::vector<Slice> slices;
  for (const auto& c : criteria)
    slices.push_back(attach_control(compute_slice(g, f, c), t, f, g));
  return filter_redundant(std::move(slices));
}

}  // namespace pipeslice

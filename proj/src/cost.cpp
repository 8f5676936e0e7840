#include "pipeslice/cost.hpp"

#include <map>
#include <stdexcept>

namespace pipeslice {

int64_t opcode_cost(const LatencyModel& m, Opcode op) {
  switch (op) {
    case Opcode::ArrayLoad:
    case Opcode::ArrayStore:
    case Opcode::LoadData:
    case Opcode::LoadNext:
      return m.memory;
    case Opcode::Call:
      return m.arith;  // call overhead itself; callee added separately
    default:
      return m.arith;
  }
}

namespace {

struct Estimator {
  const Program& p;
  const LatencyModel& m;

  int64_t instr_cost(const Function& f, const Instr& i, int depth) const {
    if (i.op != Opcode::Call) return opcode_cost(m, i.op);
    if (is_intrinsic(i.callee)) return m.transcendental;
    if (m.fixed_call) return *m.fixed_call;
    if (depth >= 1) return m.nested_call;
    const Function* callee = p.find_function(i.callee);
    if (!callee) return m.nested_call;
    return m.arith + function_cost(*callee, depth + 1);
  }

  int64_t trip_of(const Function& f, const std::string& header) const {
    for (const auto& l : find_loops(f))
      if (l.header == header) return l.static_trip.value_or(m.default_trip);
    return m.default_trip;
  }

  int64_t region_cost(const Function& f, const Region& r, int depth) const {
    int64_t total = 0;
    for (const auto& item : r.items) {
      switch (item.k) {
        case RegionItem::K::Instr: {
          const Instr* i = f.find_instr(item.instr);
          total += instr_cost(f, *i, depth);
          break;
        }
        case RegionItem::K::Loop:
          total += loop_node_cost(f, *item.loop, depth);
          break;
        case RegionItem::K::If: {
          // branch already charged with the compare chain (plain items);
          // both arms counted
          total += opcode_cost(m, Opcode::CondBr);
          total += region_cost(f, item.iff->then_region, depth);
          total += region_cost(f, item.iff->else_region, depth);
          break;
        }
      }
    }
    return total;
  }

  int64_t loop_node_cost(const Function& f, const LoopNode& ln,
                         int depth) const {
    int64_t header = 0;
    for (InstrId id : ln.header_instrs)
      header += instr_cost(f, *f.find_instr(id), depth);
    header += opcode_cost(m, Opcode::CondBr);
    int64_t body = region_cost(f, ln.body, depth);
    return trip_of(f, ln.header_label) * (header + body);
  }

  int64_t function_cost(const Function& f, int depth) const {
    StructureInfo st = analyze_structure(f);
    return region_cost(f, st.top, depth);
  }

  const LoopNode* find_loop_node(const Region& r,
                                 const std::string& header) const {
    for (const auto& item : r.items) {
      if (item.k == RegionItem::K::Loop) {
        if (item.loop->header_label == header) return item.loop.get();
        if (const LoopNode* n = find_loop_node(item.loop->body, header))
          return n;
      } else if (item.k == RegionItem::K::If) {
        if (const LoopNode* n = find_loop_node(item.iff->then_region, header))
          return n;
        if (const LoopNode* n = find_loop_node(item.iff->else_region, header))
          return n;
      }
    }
    return nullptr;
  }
};

}  // namespace

int64_t estimate_function_cost(const Program& p, const Function& f,
                               const LatencyModel& m) {
  return Estimator{p, m}.function_cost(f, 0);
}

int64_t estimate_instr_cost(const Program& p, const Function& f,
                            const Instr& i, const LatencyModel& m) {
  return Estimator{p, m}.instr_cost(f, i, 0);
}

int64_t estimate_loop_cost(const Program& p, const Function& f,
                           const LoopInfo& loop, const LatencyModel& m) {
  Estimator e{p, m};
  StructureInfo st = analyze_structure(f);
  const LoopNode* ln = e.find_loop_node(st.top, loop.header);
  if (!ln)
    throw std::runtime_error("loop '" + loop.header + "' not found in " +
                             f.name);
  return e.loop_node_cost(f, *ln, 0);
}

LoopSelection select_candidate_loop(const Program& p, const LatencyModel& m) {
  LoopSelection sel;
  const LoopInfo* best = nullptr;
  int64_t best_cost = -1;
  std::vector<std::pair<LoopInfo, std::string>> all;

  for (const auto& f : p.functions) {
    for (const auto& l : find_loops(f)) {
      int64_t cost = estimate_loop_cost(p, f, l, m);
      sel.scores.push_back({f.name, l.header, cost, l.contains_call, l.depth});
      all.push_back({l, f.name});
    }
  }
  for (size_t i = 0; i < all.size(); ++i) {
    const LoopInfo& l = all[i].first;
    if (!l.contains_call) continue;
    int64_t cost = sel.scores[i].cost;
    bool better = false;
    if (!best) {
      better = true;
    } else if (cost != best_cost) {
      better = cost > best_cost;
    } else if (l.depth != best->depth) {
      better = l.depth < best->depth;  // outermost wins ties
    }  // otherwise keep the earlier (textual order)
    if (better) {
      best = &all[i].first;
      best_cost = cost;
      sel.function = all[i].second;
    }
  }
  if (!best) throw std::runtime_error("no candidate loop");
  sel.loop = *best;
  return sel;
}

}  // namespace pipeslice

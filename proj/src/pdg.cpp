#include "pipeslice/pdg.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace pipeslice {

namespace {

struct InstrPos {
  int block = -1;
  int pos = -1;  // index within block (terminator = instrs.size())
};

struct RegionCfg {
  const Function& f;
  std::vector<int> blocks;              // block indices in region
  std::map<std::string, int> block_idx;  // label -> function block index
  std::vector<std::vector<int>> succs;  // per function-block index, in-region
  int header = -1;                      // loop region header block, else -1
  std::map<InstrId, InstrPos> pos;

  RegionCfg(const Function& fn, const LoopInfo* loop) : f(fn) {
    for (size_t i = 0; i < f.body.size(); ++i)
      block_idx[f.body[i].label] = static_cast<int>(i);
    for (size_t i = 0; i < f.body.size(); ++i) {
      const std::string& label = f.body[i].label;
      if (!loop || loop->body.count(label))
        blocks.push_back(static_cast<int>(i));
    }
    if (loop) header = block_idx.at(loop->header);
    std::set<int> in_region(blocks.begin(), blocks.end());
    succs.resize(f.body.size());
    for (int b : blocks) {
      const Instr& t = f.body[static_cast<size_t>(b)].terminator;
      auto add = [&](const std::string& l) {
        int s = block_idx.at(l);
        if (in_region.count(s)) succs[static_cast<size_t>(b)].push_back(s);
      };
      if (t.op == Opcode::Jump) add(t.label1);
      if (t.op == Opcode::CondBr) {
        add(t.label1);
        if (t.label2 != t.label1) add(t.label2);
      }
    }
    for (int b : blocks) {
      const Block& blk = f.body[static_cast<size_t>(b)];
      for (size_t i = 0; i < blk.instrs.size(); ++i)
        pos[blk.instrs[i].id] = {b, static_cast<int>(i)};
      pos[blk.terminator.id] = {b, static_cast<int>(blk.instrs.size())};
    }
  }

  // block-level reachability via paths of >= 1 edge; when skip_back, edges
  // into the region header (the loop back edge) are removed
  std::vector<std::vector<bool>> reach(bool skip_back) const {
    size_t n = f.body.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (int b : blocks)
      for (int s : succs[static_cast<size_t>(b)]) {
        if (skip_back && s == header) continue;
        r[static_cast<size_t>(b)][static_cast<size_t>(s)] = true;
      }
    for (int k : blocks)
      for (int i : blocks)
        if (r[static_cast<size_t>(i)][static_cast<size_t>(k)])
          for (int j : blocks)
            if (r[static_cast<size_t>(k)][static_cast<size_t>(j)])
              r[static_cast<size_t>(i)][static_cast<size_t>(j)] = true;
    return r;
  }
};

// reaching definition sets; each def site is tagged with whether the path
// to here crossed the region's back edge (loop regions only)
using TaggedDef = std::pair<InstrId, bool>;
using DefSets = std::map<std::string, std::set<TaggedDef>>;

DefSets merge(const DefSets& a, const DefSets& b) {
  DefSets out = a;
  for (const auto& [v, ids] : b) out[v].insert(ids.begin(), ids.end());
  return out;
}

DefSets transfer(const Block& blk, DefSets state) {
  auto def = [&](const Instr& ins) {
    if (!ins.dst.empty()) state[ins.dst] = {{ins.id, false}};
  };
  for (const auto& ins : blk.instrs) def(ins);
  def(blk.terminator);
  return state;
}

// in-sets per region block. For a loop region the header's in-set is the
// defs flowing around the back edge (from the full fixpoint's latch
// out-sets), tagged carried; the back edge itself is then not followed.
std::map<int, DefSets> reaching_defs(const RegionCfg& rc) {
  const Function& f = rc.f;
  std::map<int, DefSets> in, out;

  auto run = [&](const DefSets* header_in) {
    in.clear();
    out.clear();
    bool changed = true;
    while (changed) {
      changed = false;
      for (int b : rc.blocks) {
        DefSets i;
        if (header_in && b == rc.header) {
          i = *header_in;
        } else {
          for (int p : rc.blocks) {
            const auto& ps = rc.succs[static_cast<size_t>(p)];
            if (std::find(ps.begin(), ps.end(), b) == ps.end()) continue;
            i = merge(i, out[p]);
          }
        }
        DefSets o = transfer(f.body[static_cast<size_t>(b)], i);
        // preserve carried tags killed by transfer? transfer rewrites the
        // var entirely, which is correct (a same-iteration def kills)
        if (o != out[b] || i != in[b]) {
          // tags: transfer() resets to false; carried tags survive only
          // where no def intervenes, handled by merge of in-state
          out[b] = std::move(o);
          in[b] = std::move(i);
          changed = true;
        }
      }
    }
  };

  if (rc.header < 0) {
    run(nullptr);
    return in;
  }
  // pass 1: plain fixpoint with back edges to find what reaches the
  // latches
  run(nullptr);
  DefSets around;
  for (int p : rc.blocks) {
    const auto& ps = rc.succs[static_cast<size_t>(p)];
    if (std::find(ps.begin(), ps.end(), rc.header) == ps.end()) continue;
    for (const auto& [v, ids] : out[p])
      for (const auto& [id, tag] : ids) {
        (void)tag;
        around[v].insert({id, true});
      }
  }
  // pass 2: carried defs injected at the header, back edge blocked
  run(&around);
  return in;
}

bool is_nonpure_call(const Program& p, const Instr& i) {
  if (i.op != Opcode::Call || is_intrinsic(i.callee)) return false;
  const Function* callee = p.find_function(i.callee);
  return callee && !callee->pure;
}

struct MemAccess {
  InstrId id;
  std::string loc;
  bool write;
};

// location set of one instruction; non-pure calls touch every global and
// the $world location, both as read and write
std::vector<MemAccess> mem_accesses(const Program& p, const Instr& i) {
  std::vector<MemAccess> out;
  if (auto loc = i.may_touch()) {
    out.push_back({i.id, *loc, i.touches_write()});
    if (i.op == Opcode::ArrayLoad) return out;
    if (i.op == Opcode::ArrayStore) return out;
    return out;  // field loads: read only
  }
  if (is_nonpure_call(p, i)) {
    for (const auto& g : p.globals) {
      out.push_back({i.id, g.name, true});
      out.push_back({i.id, g.name, false});
    }
    out.push_back({i.id, "$world", true});
    out.push_back({i.id, "$world", false});
  }
  return out;
}

}  // namespace

bool Pdg::has_node(InstrId id) const {
  return std::binary_search(nodes.begin(), nodes.end(), id);
}

std::vector<InstrId> Pdg::preds_of(InstrId id) const {
  std::vector<InstrId> out;
  for (const auto& e : edges)
    if (e.dst == id) out.push_back(e.src);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

static Pdg build_impl(const Program& p, const Function& f,
                      const LoopInfo* loop) {
  Pdg g;
  g.function = f.name;
  if (loop) g.loop = *loop;

  RegionCfg rc(f, loop);
  std::set<InstrId> region;
  for (int b : rc.blocks) {
    const Block& blk = f.body[static_cast<size_t>(b)];
    for (const auto& i : blk.instrs) region.insert(i.id);
    region.insert(blk.terminator.id);
  }
  g.nodes.assign(region.begin(), region.end());

  std::set<std::tuple<InstrId, InstrId, std::string, bool>> seen;
  auto add_data = [&](InstrId src, InstrId dst, const std::string& loc,
                      bool carried) {
    if (!region.count(src) || !region.count(dst)) return;
    if (src == dst && !carried) return;  // reflexive deps only as carried
    if (seen.insert({src, dst, loc, carried}).second)
      g.edges.push_back({src, dst, PdgEdge::Kind::Data, loc, carried});
  };

  // --- scalar def-use via (tagged) reaching definitions
  auto rd_in = reaching_defs(rc);
  for (int b : rc.blocks) {
    DefSets state = rd_in.count(b) ? rd_in.at(b) : DefSets{};
    const Block& blk = f.body[static_cast<size_t>(b)];
    auto visit = [&](const Instr& ins) {
      for (const auto& u : ins.uses()) {
        auto it = state.find(u);
        if (it != state.end())
          for (const auto& [d, carried] : it->second)
            add_data(d, ins.id, u, carried);
      }
      if (!ins.dst.empty()) state[ins.dst] = {{ins.id, false}};
    };
    for (const auto& ins : blk.instrs) visit(ins);
    visit(blk.terminator);
  }

  // --- conservative location-based dependences (arrays, node fields,
  // non-pure calls)
  std::vector<MemAccess> acc;
  for (int b : rc.blocks) {
    const Block& blk = f.body[static_cast<size_t>(b)];
    for (const auto& ins : blk.instrs) {
      auto a = mem_accesses(p, ins);
      acc.insert(acc.end(), a.begin(), a.end());
    }
  }
  auto reach_full = rc.reach(false);
  std::optional<std::vector<std::vector<bool>>> reach_nb;
  if (loop) reach_nb = rc.reach(true);

  auto ordered_intra = [&](InstrId a, InstrId b2) {
    const InstrPos& pa = rc.pos.at(a);
    const InstrPos& pb = rc.pos.at(b2);
    const auto& r = loop ? *reach_nb : reach_full;
    if (pa.block == pb.block && pa.pos < pb.pos) return true;
    return r[static_cast<size_t>(pa.block)][static_cast<size_t>(pb.block)];
  };

  for (const auto& w : acc) {
    if (!w.write) continue;
    for (const auto& r : acc) {
      if (r.loc != w.loc) continue;
      // a call does not conflict with itself: one worker executes all of
      // that call's iterations in order
      if (r.id == w.id && f.find_instr(w.id)->op == Opcode::Call) continue;
      if (!r.write && r.id == w.id) continue;
      if (loop) {
        add_data(w.id, r.id, w.loc, true);  // around the back edge
        if (ordered_intra(w.id, r.id)) add_data(w.id, r.id, w.loc, false);
      } else if (ordered_intra(w.id, r.id)) {
        add_data(w.id, r.id, w.loc, false);
      }
    }
  }

  // --- control edges: innermost construct branch -> instruction
  StructureInfo st = analyze_structure(f);
  for (InstrId id : g.nodes) {
    int c = st.innermost[static_cast<size_t>(id)];
    if (c < 0) continue;
    InstrId br = st.constructs[static_cast<size_t>(c)].branch;
    if (!region.count(br)) continue;
    g.edges.push_back({br, id, PdgEdge::Kind::Control, "", false});
  }

  std::sort(g.edges.begin(), g.edges.end(), [](const PdgEdge& a, const PdgEdge& b) {
    return std::tie(a.src, a.dst, a.kind, a.loc, a.carried) <
           std::tie(b.src, b.dst, b.kind, b.loc, b.carried);
  });
  return g;
}

Pdg build_pdg(const Program& p, const Function& f) {
  return build_impl(p, f, nullptr);
}

Pdg build_pdg(const Program& p, const Function& f, const LoopInfo& loop) {
  return build_impl(p, f, &loop);
}

bool depends_on(const Pdg& g, InstrId a, InstrId b) {
  if (!g.has_node(a) || !g.has_node(b))
    throw std::runtime_error("depends_on: unknown node");
  if (a == b) return true;
  // walk reversed edges from a
  std::map<InstrId, std::vector<InstrId>> preds;
  for (const auto& e : g.edges) preds[e.dst].push_back(e.src);
  std::set<InstrId> vis{a};
  std::vector<InstrId> work{a};
  while (!work.empty()) {
    InstrId cur = work.back();
    work.pop_back();
    for (InstrId p : preds[cur]) {
      if (p == b) return true;
      if (vis.insert(p).second) work.push_back(p);
    }
  }
  return false;
}

std::string export_dot(const Pdg& g, const Function& f) {
  std::string s = "digraph pdg {\n";
  for (InstrId id : g.nodes) {
    const Instr* i = f.find_instr(id);
    std::string label = std::to_string(id) + ": " + (i ? i->text() : "?");
    std::string esc;
    for (char c : label) {
      if (c == '"' || c == '\\') esc += '\\';
      esc += c;
    }
    s += "  n" + std::to_string(id) + " [label=\"" + esc + "\"];\n";
  }
  for (const auto& e : g.edges) {
    s += "  n" + std::to_string(e.src) + " -> n" + std::to_string(e.dst);
    if (e.kind == PdgEdge::Kind::Control) {
      s += " [style=dashed]";
    } else {
      std::string lbl = e.loc + (e.carried ? " (carried)" : "");
      s += " [style=solid, color=red, label=\"" + lbl + "\"]";
    }
    s += ";\n";
  }
  s += "}\n";
  return s;
}

std::string export_json(const Pdg& g) {
  nlohmann::json j;
  j["function"] = g.function;
  j["region"] = g.loop ? ("loop:" + g.loop->header) : "function";
  j["nodes"] = g.nodes;
  j["edges"] = nlohmann::json::array();
  for (const auto& e : g.edges) {
    j["edges"].push_back({
        {"src", e.src},
        {"dst", e.dst},
        {"kind", e.kind == PdgEdge::Kind::Data ? "data" : "control"},
        {"carried", e.carried},
        {"loc", e.loc},
    });
  }
  return j.dump(2);
}

}  // namespace pipeslice

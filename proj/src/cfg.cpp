#include "pipeslice/cfg.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace pipeslice {

namespace {

struct Cfg {
  const Function& f;
  std::map<std::string, int> index;          // label -> block idx
  std::vector<std::vector<int>> succs, preds;

  explicit Cfg(const Function& fn) : f(fn) {
    for (size_t i = 0; i < f.body.size(); ++i)
      index[f.body[i].label] = static_cast<int>(i);
    succs.resize(f.body.size());
    preds.resize(f.body.size());
    for (size_t i = 0; i < f.body.size(); ++i) {
      const Instr& t = f.body[i].terminator;
      auto link = [&](const std::string& l) {
        auto it = index.find(l);
        if (it == index.end())
          throw std::runtime_error("unknown label '" + l + "' in " + f.name);
        succs[i].push_back(it->second);
        preds[static_cast<size_t>(it->second)].push_back(static_cast<int>(i));
      };
      if (t.op == Opcode::Jump) link(t.label1);
      if (t.op == Opcode::CondBr) {
        link(t.label1);
        if (t.label2 != t.label1) link(t.label2);
      }
    }
  }

  int n() const { return static_cast<int>(f.body.size()); }
};

// iterative dominator sets; graphs here are small
std::vector<std::vector<bool>> dominators(const Cfg& cfg) {
  int n = cfg.n();
  std::vector<std::vector<bool>> dom(
      static_cast<size_t>(n), std::vector<bool>(static_cast<size_t>(n), true));
  // entry dominated only by itself, others initially by all
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dom[static_cast<size_t>(i)][static_cast<size_t>(j)] = (i == 0) ? (j == 0) : true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b = 1; b < n; ++b) {
      std::vector<bool> nd(static_cast<size_t>(n), true);
      if (cfg.preds[static_cast<size_t>(b)].empty()) {
        // unreachable block: dominated by itself only
        std::fill(nd.begin(), nd.end(), false);
      } else {
        for (int p : cfg.preds[static_cast<size_t>(b)])
          for (int j = 0; j < n; ++j)
            nd[static_cast<size_t>(j)] =
                nd[static_cast<size_t>(j)] && dom[static_cast<size_t>(p)][static_cast<size_t>(j)];
      }
      nd[static_cast<size_t>(b)] = true;
      if (nd != dom[static_cast<size_t>(b)]) {
        dom[static_cast<size_t>(b)] = std::move(nd);
        changed = true;
      }
    }
  }
  return dom;
}

// immediate post-dominators; requires single exit block (validated IR)
std::vector<int> ipostdom(const Cfg& cfg) {
  int n = cfg.n();
  int exit = -1;
  for (int i = 0; i < n; ++i)
    if (cfg.f.body[static_cast<size_t>(i)].terminator.op == Opcode::Ret) exit = i;
  if (exit < 0) throw std::runtime_error("no exit block in " + cfg.f.name);

  std::vector<std::vector<bool>> pdom(
      static_cast<size_t>(n), std::vector<bool>(static_cast<size_t>(n), true));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      pdom[static_cast<size_t>(i)][static_cast<size_t>(j)] = (i == exit) ? (j == exit) : true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b = 0; b < n; ++b) {
      if (b == exit) continue;
      std::vector<bool> nd(static_cast<size_t>(n), true);
      if (cfg.succs[static_cast<size_t>(b)].empty()) {
        std::fill(nd.begin(), nd.end(), false);
      } else {
        for (int s : cfg.succs[static_cast<size_t>(b)])
          for (int j = 0; j < n; ++j)
            nd[static_cast<size_t>(j)] =
                nd[static_cast<size_t>(j)] && pdom[static_cast<size_t>(s)][static_cast<size_t>(j)];
      }
      nd[static_cast<size_t>(b)] = true;
      if (nd != pdom[static_cast<size_t>(b)]) {
        pdom[static_cast<size_t>(b)] = std::move(nd);
        changed = true;
      }
    }
  }
  // immediate: the nearest strict post-dominator -- every other strict
  // post-dominator of b also post-dominates it
  std::vector<int> ipd(static_cast<size_t>(n), -1);
  for (int b = 0; b < n; ++b) {
    if (b == exit) continue;
    std::vector<int> strict;
    for (int j = 0; j < n; ++j)
      if (j != b && pdom[static_cast<size_t>(b)][static_cast<size_t>(j)]) strict.push_back(j);
    for (int c : strict) {
      bool imm = true;
      for (int d : strict)
        if (d != c && !pdom[static_cast<size_t>(c)][static_cast<size_t>(d)]) { imm = false; break; }
      if (imm) { ipd[static_cast<size_t>(b)] = c; break; }
    }
  }
  return ipd;
}

bool is_user_call(const Instr& i) {
  return i.op == Opcode::Call && !is_intrinsic(i.callee);
}

// last def of `var` in the function with id < limit and outside `exclude`
InstrId find_prior_def(const Function& f, const std::string& var, InstrId limit,
                       const std::set<std::string>& exclude_blocks) {
  InstrId best = kNoInstr;
  for (const auto& b : f.body) {
    if (exclude_blocks.count(b.label)) continue;
    for (const auto& i : b.instrs)
      if (i.id < limit && i.dst == var && i.id > best) best = i.id;
  }
  return best;
}

}  // namespace

std::vector<LoopInfo> find_loops(const Function& f) {
  Cfg cfg(f);
  auto dom = dominators(cfg);
  int n = cfg.n();

  // back edges: u -> h where h dominates u
  std::map<int, std::set<int>> loops;  // header idx -> body idxs
  std::vector<std::pair<int, int>> back_edges;
  for (int u = 0; u < n; ++u)
    for (int v : cfg.succs[static_cast<size_t>(u)])
      if (dom[static_cast<size_t>(u)][static_cast<size_t>(v)]) back_edges.push_back({u, v});

  // reducibility: removing back edges must leave a DAG
  {
    std::vector<int> state(static_cast<size_t>(n), 0);
    std::vector<int> stack;
    std::vector<size_t> pos;
    for (int start = 0; start < n; ++start) {
      if (state[static_cast<size_t>(start)]) continue;
      stack = {start};
      pos = {0};
      state[static_cast<size_t>(start)] = 1;
      while (!stack.empty()) {
        int b = stack.back();
        bool descended = false;
        for (size_t& i = pos.back(); i < cfg.succs[static_cast<size_t>(b)].size();) {
          int s = cfg.succs[static_cast<size_t>(b)][i];
          ++i;
          bool is_back = dom[static_cast<size_t>(b)][static_cast<size_t>(s)];
          if (is_back) continue;
          if (state[static_cast<size_t>(s)] == 1)
            throw std::runtime_error("irreducible region in " + f.name);
          if (state[static_cast<size_t>(s)] == 0) {
            state[static_cast<size_t>(s)] = 1;
            stack.push_back(s);
            pos.push_back(0);
            descended = true;
            break;
          }
        }
        if (!descended) {
          state[static_cast<size_t>(stack.back())] = 2;
          stack.pop_back();
          pos.pop_back();
        }
      }
    }
  }

  for (auto [u, h] : back_edges) {
    auto& body = loops[h];
    body.insert(h);
    // reverse reachability from u without passing h
    std::vector<int> work{u};
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      if (body.count(b)) continue;
      body.insert(b);
      for (int p : cfg.preds[static_cast<size_t>(b)])
        if (p != h) work.push_back(p);
    }
  }

  std::vector<LoopInfo> out;
  for (auto& [h, body] : loops) {
    LoopInfo li;
    li.function = f.name;
    li.header = f.body[static_cast<size_t>(h)].label;
    for (int b : body) li.body.insert(f.body[static_cast<size_t>(b)].label);
    out.push_back(std::move(li));
  }
  // nesting depth by containment
  for (auto& a : out) {
    for (const auto& b : out) {
      if (&a == (const LoopInfo*)&b) continue;
      if (a.header != b.header &&
          std::includes(b.body.begin(), b.body.end(), a.body.begin(),
                        a.body.end()))
        ++a.depth;
    }
  }
  // contains_call, induction, static trip
  for (auto& li : out) {
    for (const auto& label : li.body) {
      const Block* b = f.find_block(label);
      for (const auto& i : b->instrs)
        if (is_user_call(i)) li.contains_call = true;
    }
    const Block* header = f.find_block(li.header);
    const Instr& term = header->terminator;
    if (term.op != Opcode::CondBr) continue;
    // candidates: variables feeding the branch var inside the header block
    std::set<std::string> want{term.a.var};
    std::vector<const Instr*> compare_chain;
    for (auto it = header->instrs.rbegin(); it != header->instrs.rend(); ++it) {
      if (!it->dst.empty() && want.count(it->dst)) {
        compare_chain.push_back(&*it);
        for (const auto& u : it->uses()) want.insert(u);
      }
    }
    // induction: candidate with exactly one in-loop def, self-updating
    for (const auto& cand : want) {
      const Instr* update = nullptr;
      int defs = 0;
      for (const auto& label : li.body) {
        for (const auto& i : f.find_block(label)->instrs) {
          if (i.dst == cand) {
            bool in_chain = false;
            for (const Instr* c : compare_chain)
              if (c->id == i.id) in_chain = true;
            if (in_chain) continue;
            ++defs;
            update = &i;
          }
        }
      }
      if (defs != 1 || !update) continue;
      auto uses = update->uses();
      if (std::find(uses.begin(), uses.end(), cand) == uses.end()) continue;
      li.induction = cand;
      // static trip for the pattern: v = C; while (v < B) { ... v = v + K }
      if (update->op == Opcode::Bin &&
          (update->bin == BinOp::Add || update->bin == BinOp::Sub) &&
          update->a.is_var() && update->a.var == cand &&
          update->b.k == Operand::K::IntLit) {
        int64_t step = update->bin == BinOp::Add ? update->b.ival : -update->b.ival;
        const Instr* cmp = nullptr;
        for (const Instr* c : compare_chain)
          if (c->dst == term.a.var && c->op == Opcode::Bin) cmp = c;
        InstrId init_id =
            find_prior_def(f, cand, header->instrs.empty()
                                        ? term.id
                                        : header->instrs.front().id,
                           li.body);
        const Instr* init = init_id >= 0 ? f.find_instr(init_id) : nullptr;
        if (cmp && init && init->op == Opcode::ConstAssign &&
            init->a.k == Operand::K::IntLit && step != 0) {
          // normalize to v RELOP bound
          std::optional<int64_t> bound;
          BinOp rel = cmp->bin;
          if (cmp->a.is_var() && cmp->a.var == cand &&
              cmp->b.k == Operand::K::IntLit) {
            bound = cmp->b.ival;
          } else if (cmp->b.is_var() && cmp->b.var == cand &&
                     cmp->a.k == Operand::K::IntLit) {
            bound = cmp->a.ival;
            switch (rel) {
              case BinOp::Lt: rel = BinOp::Gt; break;
              case BinOp::Le: rel = BinOp::Ge; break;
              case BinOp::Gt: rel = BinOp::Lt; break;
              case BinOp::Ge: rel = BinOp::Le; break;
              default: break;
            }
          }
          if (bound) {
            int64_t v0 = init->a.ival, b0 = *bound, trips = -1;
            if (rel == BinOp::Lt && step > 0)
              trips = b0 > v0 ? (b0 - v0 + step - 1) / step : 0;
            else if (rel == BinOp::Le && step > 0)
              trips = b0 >= v0 ? (b0 - v0) / step + 1 : 0;
            else if (rel == BinOp::Gt && step < 0)
              trips = v0 > b0 ? (v0 - b0 + (-step) - 1) / (-step) : 0;
            else if (rel == BinOp::Ge && step < 0)
              trips = v0 >= b0 ? (v0 - b0) / (-step) + 1 : 0;
            if (trips >= 0) li.static_trip = trips;
          }
        }
      }
      break;
    }
  }
  // stable order: by header's first instr id
  std::sort(out.begin(), out.end(), [&](const LoopInfo& a, const LoopInfo& b) {
    return f.find_block(a.header)->terminator.id <
           f.find_block(b.header)->terminator.id;
  });
  return out;
}

std::vector<InstrId> loop_instr_ids(const Function& f, const LoopInfo& loop) {
  std::vector<InstrId> out;
  for (const auto& label : loop.body) {
    const Block* b = f.find_block(label);
    if (!b) continue;
    for (const auto& i : b->instrs) out.push_back(i.id);
    out.push_back(b->terminator.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const Construct* StructureInfo::find_by_branch(InstrId id) const {
  for (const auto& c : constructs)
    if (c.branch == id) return &c;
  return nullptr;
}

namespace {

struct StructureBuilder {
  const Function& f;
  Cfg cfg;
  std::vector<int> ipd;
  std::vector<LoopInfo> loops;
  StructureInfo info;
  std::set<std::string> visited;

  explicit StructureBuilder(const Function& fn)
      : f(fn), cfg(fn), ipd(ipostdom(cfg)), loops(find_loops(fn)) {
    info.innermost.assign(static_cast<size_t>(f.instr_count), -1);
  }

  [[noreturn]] void irregular(const std::string& why) {
    throw std::runtime_error("irregular control structure in " + f.name +
                             ": " + why);
  }

  const LoopInfo* loop_with_header(const std::string& label) {
    for (const auto& l : loops)
      if (l.header == label) return &l;
    return nullptr;
  }

  void note_instr(InstrId id, int construct) {
    info.innermost[static_cast<size_t>(id)] = construct;
    int c = construct;
    while (c >= 0) {
      info.constructs[static_cast<size_t>(c)].members.push_back(id);
      c = info.constructs[static_cast<size_t>(c)].parent;
    }
  }

  // walk from `label` until one of `stops`; returns the region and sets
  // `reached`
  Region walk(const std::string& label, const std::set<std::string>& stops,
              int construct, std::string& reached) {
    Region region;
    std::string cur = label;
    for (;;) {
      if (stops.count(cur)) {
        reached = cur;
        return region;
      }
      if (visited.count(cur)) irregular("block '" + cur + "' revisited");
      visited.insert(cur);
      const Block* b = f.find_block(cur);
      if (!b) irregular("missing block '" + cur + "'");

      const LoopInfo* li = loop_with_header(cur);
      if (li) {
        append_loop(region, *li, construct);
        const auto& ln = *region.items.back().loop;
        cur = ln.exit_label;
        continue;
      }

      for (const auto& i : b->instrs) {
        note_instr(i.id, construct);
        RegionItem item;
        item.k = RegionItem::K::Instr;
        item.instr = i.id;
        region.items.push_back(std::move(item));
      }
      const Instr& t = b->terminator;
      if (t.op == Opcode::Ret) {
        note_instr(t.id, construct);
        RegionItem item;
        item.k = RegionItem::K::Instr;
        item.instr = t.id;
        region.items.push_back(std::move(item));
        reached = "";
        return region;
      }
      if (t.op == Opcode::Jump) {
        // structural no-op; target handled by loop condition above
        cur = t.label1;
        continue;
      }
      // CondBr on a non-header block: if/else joining at the immediate
      // post-dominator
      int bi = cfg.index.at(cur);
      int m = ipd[static_cast<size_t>(bi)];
      if (m < 0) irregular("no merge point for branch in block '" + cur + "'");
      std::string merge = f.body[static_cast<size_t>(m)].label;

      int cid = static_cast<int>(info.constructs.size());
      info.constructs.push_back({});
      Construct& cons = info.constructs.back();
      cons.k = Construct::K::If;
      cons.id = cid;
      cons.parent = construct;
      cons.branch = t.id;
      cons.header_label = cur;
      build_if_skeleton(cons, *b);
      note_instr(t.id, construct);  // branch belongs to parent level

      auto node = std::make_unique<IfNode>();
      node->construct = cid;
      node->branch = t.id;
      node->then_label = t.label1;
      node->else_label = t.label2;
      node->merge_label = merge;
      std::set<std::string> inner_stops{merge};
      std::string r;
      if (t.label1 != merge) {
        node->then_region = walk(t.label1, inner_stops, cid, r);
        if (r != merge) irregular("then branch escapes");
      }
      if (t.label2 != merge) {
        node->else_region = walk(t.label2, inner_stops, cid, r);
        if (r != merge) irregular("else branch escapes");
      }
      RegionItem item;
      item.k = RegionItem::K::If;
      item.iff = std::move(node);
      region.items.push_back(std::move(item));
      cur = merge;
    }
  }

  void append_loop(Region& region, const LoopInfo& li, int parent) {
    const Block* header = f.find_block(li.header);
    visited.insert(li.header);
    const Instr& t = header->terminator;
    if (t.op != Opcode::CondBr)
      irregular("loop header '" + li.header + "' must end in a branch");
    bool then_in = li.body.count(t.label1) > 0;
    bool else_in = li.body.count(t.label2) > 0;
    if (then_in == else_in)
      irregular("loop header '" + li.header + "' has no unique exit");

    int cid = static_cast<int>(info.constructs.size());
    info.constructs.push_back({});
    {
      Construct& cons = info.constructs[static_cast<size_t>(cid)];
      cons.k = Construct::K::Loop;
      cons.id = cid;
      cons.parent = parent;
      cons.branch = t.id;
      cons.header_label = li.header;
      cons.induction = li.induction;
    }

    auto node = std::make_unique<LoopNode>();
    node->construct = cid;
    node->header_label = li.header;
    node->branch = t.id;
    node->body_is_then = then_in;
    node->body_label = then_in ? t.label1 : t.label2;
    node->exit_label = then_in ? t.label2 : t.label1;

    // header instrs + branch are members of the loop itself (carried
    // control)
    for (const auto& i : header->instrs) {
      note_instr(i.id, cid);
      node->header_instrs.push_back(i.id);
    }
    note_instr(t.id, cid);

    std::string r;
    node->body = walk(node->body_label, {li.header}, cid, r);
    if (r != li.header) irregular("loop body does not return to header");

    build_loop_skeleton(info.constructs[static_cast<size_t>(cid)], li, *header);

    RegionItem item;
    item.k = RegionItem::K::Loop;
    item.loop = std::move(node);
    region.items.push_back(std::move(item));
  }

  // compare chain inside one block feeding the branch variable
  std::vector<InstrId> compare_chain(const Block& b) {
    std::vector<InstrId> chain;
    std::set<std::string> want{b.terminator.a.var};
    for (auto it = b.instrs.rbegin(); it != b.instrs.rend(); ++it) {
      if (!it->dst.empty() && want.count(it->dst)) {
        chain.push_back(it->id);
        for (const auto& u : it->uses()) want.insert(u);
      }
    }
    std::sort(chain.begin(), chain.end());
    return chain;
  }

  void build_if_skeleton(Construct& cons, const Block& b) {
    cons.skeleton = compare_chain(b);
    cons.skeleton.push_back(b.terminator.id);
  }

  void build_loop_skeleton(Construct& cons, const LoopInfo& li,
                           const Block& header) {
    cons.skeleton = compare_chain(header);
    cons.skeleton.push_back(header.terminator.id);
    if (li.induction) {
      // update: in-loop defs of the induction variable
      for (const auto& label : li.body) {
        const Block* b = f.find_block(label);
        for (const auto& i : b->instrs)
          if (i.dst == *li.induction &&
              std::find(cons.skeleton.begin(), cons.skeleton.end(), i.id) ==
                  cons.skeleton.end())
            cons.skeleton.push_back(i.id);
      }
      // init: last def before the loop
      InstrId first = header.instrs.empty() ? header.terminator.id
                                            : header.instrs.front().id;
      InstrId init = find_prior_def(f, *li.induction, first, li.body);
      if (init >= 0) cons.skeleton.push_back(init);
    }
    std::sort(cons.skeleton.begin(), cons.skeleton.end());
  }

  StructureInfo build() {
    if (f.body.empty()) return std::move(info);
    std::string r;
    info.top = walk(f.body.front().label, {}, -1, r);
    if (visited.size() != f.body.size())
      irregular("unreachable or unvisited blocks");
    for (auto& c : info.constructs) {
      std::sort(c.members.begin(), c.members.end());
      c.members.erase(std::unique(c.members.begin(), c.members.end()),
                      c.members.end());
    }
    return std::move(info);
  }
};

}  // namespace

StructureInfo analyze_structure(const Function& f) {
  StructureBuilder b(f);
  return b.build();
}

}  // namespace pipeslice

#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pipeslice/ir.hpp"

namespace pipeslice {

struct LoopInfo {
  std::string function;
  std::string header;          // header block label
  std::set<std::string> body;  // block labels, header included
  std::optional<std::string> induction;
  int depth = 0;               // 0 = outermost
  bool contains_call = false;  // user-function call in body
  std::optional<int64_t> static_trip;
};

// Natural-loop discovery over the block CFG. Loops sharing a header are
// merged. Throws std::runtime_error("irreducible region ...") when the
// CFG is not reducible.
std::vector<LoopInfo> find_loops(const Function& f);

// All instruction ids (including terminators) of the loop's body blocks.
std::vector<InstrId> loop_instr_ids(const Function& f, const LoopInfo& loop);

// ---------------------------------------------------------------------
// Structured-region recovery. The mini-IR is block based, but every
// analysis that needs control structure (control dependence, control
// tables, slice materialization) works on the canonical structured form:
// a tree of sequences, while-shaped loops and if/else regions.

struct LoopNode;
struct IfNode;

struct RegionItem {
  enum class K { Instr, Loop, If } k = K::Instr;
  InstrId instr = kNoInstr;
  std::unique_ptr<LoopNode> loop;
  std::unique_ptr<IfNode> iff;
};

struct Region {
  std::vector<RegionItem> items;
};

struct LoopNode {
  int construct = -1;               // index into StructureInfo::constructs
  std::string header_label;
  std::vector<InstrId> header_instrs;  // compare chain etc., run every trip
  InstrId branch = kNoInstr;           // header CondBr
  std::string body_label, exit_label;
  bool body_is_then = false;  // branch label1 enters the body
  Region body;
};

struct IfNode {
  int construct = -1;
  InstrId branch = kNoInstr;  // CondBr (its block's instrs precede this item)
  std::string then_label, else_label, merge_label;
  Region then_region, else_region;
};

struct Construct {
  enum class K { Loop, If } k = K::Loop;
  int id = -1;
  int parent = -1;  // enclosing construct or -1
  InstrId branch = kNoInstr;
  std::string header_label;  // loop header / cond block
  // Instructions controlled by this construct's branch. For loops this
  // includes the header instructions and the branch itself (the next
  // iteration runs only if the branch stays in the loop).
  std::vector<InstrId> members;
  // Control skeleton: compare chain + branch (+ induction init/update for
  // loops).
  std::vector<InstrId> skeleton;
  std::optional<std::string> induction;  // loops
};

struct StructureInfo {
  Region top;
  std::vector<Construct> constructs;
  std::vector<int> innermost;  // per InstrId: construct id or -1
  const Construct* find_by_branch(InstrId id) const;
};

// Throws std::runtime_error("irregular control structure ...") when the
// function does not fit the canonical shape (while loops with a
// conditional header, if/else joining at the immediate post-dominator).
StructureInfo analyze_structure(const Function& f);

}  // namespace pipeslice

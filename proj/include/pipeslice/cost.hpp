#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pipeslice/cfg.hpp"
#include "pipeslice/ir.hpp"

namespace pipeslice {

// Abstract per-opcode cycle model. The numbers are declared calibration
// constants, reported alongside every plan, not hardware measurements.
struct LatencyModel {
  int64_t arith = 1;            // const/copy/neg/bin, jumps, branches, ret
  int64_t memory = 3;           // array load/store, node field loads
  int64_t transcendental = 20;  // cos/sin/sqrt intrinsics
  int64_t nested_call = 20;     // calls seen while inlining one level deep
  std::optional<int64_t> fixed_call;  // when set, user calls cost this flat
  int64_t default_trip = 100;   // loop trip when no static bound is known
};

int64_t opcode_cost(const LatencyModel& m, Opcode op);

// One-level inline estimate of a whole function body: nested loops
// multiply by trip hints (or default_trip), calls inside the callee cost
// nested_call.
int64_t estimate_function_cost(const Program& p, const Function& f,
                               const LatencyModel& m);

// Cost of a single instruction, calls estimated per the model.
int64_t estimate_instr_cost(const Program& p, const Function& f,
                            const Instr& i, const LatencyModel& m);

// Total cycles for all iterations of the loop (trip x one-iteration cost,
// nested loops handled recursively).
int64_t estimate_loop_cost(const Program& p, const Function& f,
                           const LoopInfo& loop, const LatencyModel& m);

struct LoopScore {
  std::string function;
  std::string header;
  int64_t cost = 0;
  bool contains_call = false;
  int depth = 0;
};

struct LoopSelection {
  LoopInfo loop;
  std::string function;
  std::vector<LoopScore> scores;  // all loops in the program
};

// The most expensive call-bearing loop; ties broken by outermost then
// textual order. Throws std::runtime_error("no candidate loop") when no
// loop contains a call.
LoopSelection select_candidate_loop(const Program& p, const LatencyModel& m);

}  // namespace pipeslice

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pipeslice/ir.hpp"
#include "pipeslice/parser.hpp"
#include "pipeslice/validate.hpp"

namespace testutil {

using namespace pipeslice;

// deterministic generator state
struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed * 0x9e3779b97f4a7c15ULL + 1) {}
  uint64_t next() {
    s += 0x9e3779b97f4a7c15ULL;
    uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
  }
  bool chance(int percent) { return range(1, 100) <= percent; }
};

struct GenOpts {
  int max_depth = 2;      // loop/if nesting
  int max_stmts = 4;      // per region
  bool with_outputs = false;  // writes to globals/out-param, maybe a return
  bool with_calls = false;    // calls to a tiny pure helper
};

// A random structured, valid program: canonical counted loops, if/else
// joining at a merge block, scalar arithmetic, bounded array accesses.
Program gen_program(uint64_t seed, const GenOpts& opts = {});

// find instructions by shape
const Instr* find_store(const Function& f, const std::string& array,
                        int occurrence = 0);
const Instr* find_call(const Function& f, const std::string& callee,
                       int occurrence = 0);
std::vector<InstrId> all_ids(const Function& f);

}  // namespace testutil

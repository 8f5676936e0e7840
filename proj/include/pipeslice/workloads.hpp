#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pipeslice/interp.hpp"
#include "pipeslice/ir.hpp"

namespace pipeslice::workloads {

// Built-in benchmark programs. Each is a self-contained mini-IR program
// whose candidate loop calls a multi-output kernel, so the full
// transform (2-stage pipeline, then slicing of the kernel call) applies.
//
//   overhead     two independent convolution passes per item; kernels are
//                pure single-result functions, so only the plain 2-stage
//                pipeline applies -- the communication-cost study program
//   fftlike      per-item Fourier-style accumulation into a real and an
//                imaginary table (slices: fre, fim)
//   deriv        first/second finite-difference accumulation (f1, f2)
//   sphharm      init call + harmonic accumulation kernel with four
//                arguments (slices: ctab, stab)
//   linkedlist2  list traversal, kernel writes two tables, returns nothing
//   linkedlist3  list traversal, kernel also returns a value the loop
//                reduces into a running sum (extra return channel)
//
// "listcalc" (not part of the benchmark set) is the small
// list-plus-kernel example used by documentation and tests.

std::vector<std::string> names();  // the six benchmark workloads
bool exists(const std::string& name);

std::string source(const std::string& name);
Program program(const std::string& name);  // parsed and validated

// Parameter sets. Every parameter is >= 1; list lengths are taken from
// the "outer_len" parameter for list-based workloads.
std::map<std::string, int64_t> default_params(const std::string& name);
// larger sizes for timing runs
std::map<std::string, int64_t> bench_params(const std::string& name);
// randomized small sizes for equivalence sweeps (deterministic in seed)
std::map<std::string, int64_t> random_params(const std::string& name,
                                             uint64_t seed);

WorkloadInput input(const std::string& name,
                    const std::map<std::string, int64_t>& params,
                    uint64_t seed);

}  // namespace pipeslice::workloads

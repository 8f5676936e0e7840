#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pipeslice/interp.hpp"
#include "pipeslice/plan.hpp"

namespace pipeslice {

enum class Mode { Sequential, Dswp, DswpSlice };

const char* mode_name(Mode m);
Mode mode_from_string(const std::string& s);

struct RunConfig {
  Mode mode = Mode::Sequential;
  int workers = 8;
  int queue_capacity = 1024;
  int repetitions = 1;
  uint64_t seed = 0;
  double tolerance = 1e-9;
  int64_t fuel = 4'000'000'000;
  double watchdog_seconds = 10.0;
};

struct ChannelStats {
  std::string name;
  uint64_t enqueues = 0, dequeues = 0;
  uint64_t full_stalls = 0, empty_stalls = 0;
};

struct RunReport {
  std::string mode;
  std::vector<std::pair<std::string, OutputValue>> outputs;
  std::vector<double> wall_times;  // seconds, one per repetition
  double median_time = 0.0;
  int64_t items_processed = 0;  // outer-loop iterations through the pipeline
  std::vector<ChannelStats> channel_stats;
};

// Interprets the whole program; timing covers execution only (workload
// construction happens before the clock starts).
RunReport execute_sequential(const Program& p, const WorkloadInput& in,
                             const RunConfig& cfg);

// Runs the plan: the calling thread acts as stage 0 (the traversal),
// workers run stage 1 or the slice functions, channels carry per-iteration
// argument records, return values merge in iteration order during the
// drain. Degenerate plans run sequentially.
RunReport execute_plan(const PipelinePlan& plan, const WorkloadInput& in,
                       const RunConfig& cfg);

// true iff outputs match: ints exactly, reals within relative tolerance.
// When diff is non-null a human-readable mismatch listing is appended.
bool verify_equivalence(const RunReport& a, const RunReport& b, double tol,
                        std::string* diff = nullptr);

std::string export_json(const RunReport& r);

}  // namespace pipeslice

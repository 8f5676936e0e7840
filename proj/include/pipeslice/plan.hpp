#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pipeslice/cost.hpp"
#include "pipeslice/ir.hpp"
#include "pipeslice/scc.hpp"
#include "pipeslice/slicer.hpp"

namespace pipeslice {

// Stage assignment over the DAG of SCCs. Stage 0 holds the traversal
// recurrences (recurrence SCCs fed only by stage 0), caller-forced SCCs,
// their ancestors, and a balancing prefix; the rest is merged greedily in
// topological order. Downstream recurrences (scalar reductions) stay
// whole in a later stage.
struct StagePlan {
  int stage_count = 0;
  std::vector<int> stage_of;          // per SccId
  std::vector<int64_t> stage_latency;
  bool degenerate = false;  // fewer than 2 usable stages
};

StagePlan assign_stages(const DagScc& d, int max_stages,
                        const std::set<SccId>& force_stage0 = {});

enum class ChannelDir { Forward, Return };

struct ChannelSpec {
  std::string name;
  std::string producer;  // "stage0", "stage1", "slice:<criterion>"
  std::string consumer;
  std::vector<Kind> schema;              // record fields (<= 4 scalars)
  std::vector<std::string> field_vars;   // producer-side variable names
  int capacity = 1024;
  ChannelDir dir = ChannelDir::Forward;
};

struct SliceWorkerSpec {
  std::string criterion;
  std::string func;                   // materialized function name
  std::vector<int> arg_positions;     // call-site arg indices sent (scalars)
  std::vector<int> array_arg_positions;  // bound statically at spawn
  bool returns_value = false;
  std::string channel;      // forward channel name
  std::string ret_channel;  // when returns_value
};

struct PlanConfig {
  int max_workers = 4;
  int queue_capacity = 1024;
  LatencyModel latency;
  enum class SliceMode { On, Off, Auto } slice = SliceMode::Auto;
};

struct PipelinePlan {
  std::string loop_function;
  LoopInfo loop;
  StagePlan stage_plan;
  bool degenerate = false;  // execute sequentially
  bool sliced = false;

  // plain DSWP wiring (sliced == false, degenerate == false)
  std::vector<InstrId> stage1_instrs;       // subset of the loop body
  std::vector<std::string> stage1_inputs;   // crossing vars, def order

  // sliced wiring
  InstrId call_site = kNoInstr;    // the call replaced by slice workers
  std::string sliced_callee;
  std::vector<SliceWorkerSpec> slices;

  // return-value handling (either mode): instructions deferred to the
  // drain phase, executed once per dequeued return record
  std::vector<InstrId> deferred_reduction;
  std::string call_result_var;

  std::vector<ChannelSpec> channels;
  int worker_count = 1;
  std::vector<std::string> decision_log;

  Program transformed;  // original program + materialized slice functions
};

// The full decision pipeline: candidate loop, PDG, DAG-SCC, stage
// assignment, optional slicing of the longest stage, channel wiring.
// Throws "no candidate loop" when no loop contains a call.
PipelinePlan plan_dswp_slice(const Program& p, const PlanConfig& cfg);

struct Profitability {
  bool apply = false;
  double predicted_speedup = 0.0;
  std::string rationale;
};

// comm_cost: cycles per element enqueue+dequeue pair.
Profitability decide_profitability(const PipelinePlan& plan,
                                   const LatencyModel& m, double comm_cost,
                                   double threshold = 1.1);

std::string export_json(const PipelinePlan& plan);

}  // namespace pipeslice

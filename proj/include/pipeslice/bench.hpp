#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pipeslice/plan.hpp"
#include "pipeslice/runtime.hpp"

namespace pipeslice {

struct CalibrationResult {
  double cycles_per_element = 0;  // one enqueue+dequeue pair
  double seconds = 0;
  uint64_t elements = 0;
  bool fallback = false;  // timer too coarse, constant used
  std::string note;
};

struct CalibrateConfig {
  uint64_t elements = 1'000'000;
  int capacity = 1024;
  int repeats = 3;
  double cycles_per_ns = 1.0;  // abstract cycle = 1ns by default
};

// Streams elements through one channel with both ends live and reports
// the amortized per-element cost of an enqueue+dequeue pair.
CalibrationResult calibrate(const CalibrateConfig& cfg);

struct BenchConfig {
  std::vector<std::string> workloads;  // default: all six
  std::vector<Mode> modes = {Mode::Dswp, Mode::DswpSlice};
  int repetitions = 5;
  uint64_t seed = 1;
  int queue_capacity = 1024;
  int max_workers = 8;
  double tolerance = 1e-9;
  bool full_scale = false;  // bench_params instead of default_params
  double comm_cost_scale = 1.0;
  std::optional<double> comm_cost_override;  // cycles per element
  double profit_threshold = 1.1;
  LatencyModel latency;
};

struct BenchRow {
  std::string workload;
  std::string param_set;  // "M=60;N=40"
  std::string mode;
  double median_s = 0;
  double speedup = 0;  // sequential median / this median
  bool ok = true;      // equivalence verified (or sequential row)
  std::string note;
};

struct BenchDecision {
  std::string workload;
  bool apply = false;
  double predicted_speedup = 0;
  std::string chosen;  // mode picked by the profitability gate
  std::string rationale;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchDecision> decisions;
  double comm_cost = 0;  // cycles per element used for decisions
  bool calibrated = false;
  std::string environment;
  // recorded reference ratios from the experiments this harness models;
  // informational only, never gated
  double reference_slice_vs_seq = 2.4;
  double reference_slice_vs_dswp = 1.6;

  bool all_verified() const;
};

BenchReport run_suite(const BenchConfig& cfg);

struct SweepResult {
  BenchReport report;
  // per N: smallest M index where the pipeline first beats sequential
  // (-1 = never), and whether wins are monotone in M
  std::vector<int64_t> n_values;
  std::vector<int64_t> m_values;
  std::vector<int> crossover_index;
  std::vector<bool> monotone;
};

SweepResult sweep_overhead(const std::vector<int64_t>& n_values,
                           const std::vector<int64_t>& m_values,
                           const BenchConfig& cfg);

std::string emit_csv(const BenchReport& r);
void write_csv(const BenchReport& r, const std::string& path);
std::string export_json(const BenchReport& r);

}  // namespace pipeslice
